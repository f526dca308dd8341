#!/usr/bin/env python3
"""OCR adapter: prints tesseract-style TSV word boxes for one image, using RapidOCR.

usage: ocr.py IMAGE.png
"""
import sys

from rapidocr_onnxruntime import RapidOCR

HEADER = "level\tpage_num\tblock_num\tpar_num\tline_num\tword_num\tleft\ttop\twidth\theight\tconf\ttext"


def split_words(box, text):
    """RapidOCR reports lines. Split one into words, sharing the width by character count."""
    xs = [p[0] for p in box]
    ys = [p[1] for p in box]
    left, top = min(xs), min(ys)
    width, height = max(xs) - left, max(ys) - top
    per_char = width / max(len(text), 1)
    words, start = [], 0
    for part in text.split(" "):
        if part:
            words.append((part, left + start * per_char, top, len(part) * per_char, height))
        start += len(part) + 1
    return words


def rows_of(result):
    """Groups RapidOCR line boxes into visual rows, top to bottom, each left to right."""
    boxes = []
    for box, text, score in result or []:
        ys = [p[1] for p in box]
        boxes.append(((min(ys) + max(ys)) / 2, max(ys) - min(ys), min(p[0] for p in box), box, text, score))
    boxes.sort(key=lambda b: (b[0], b[2]))
    rows = []
    for b in boxes:
        if rows and abs(b[0] - rows[-1][0][0]) < 0.5 * min(b[1], rows[-1][0][1]):
            rows[-1].append(b)
        else:
            rows.append([b])
    return [sorted(r, key=lambda b: b[2]) for r in rows]


def recognize(image_path):
    engine = RapidOCR()
    result, _ = engine(image_path)
    out = [HEADER]
    for line_no, row in enumerate(rows_of(result), start=1):
        word_no = 0
        for _, _, _, box, text, score in row:
            for word, x, y, w, h in split_words(box, text.strip()):
                word_no += 1
                out.append(
                    f"5\t1\t1\t1\t{line_no}\t{word_no}\t{round(x)}\t{round(y)}\t{round(w)}\t{round(h)}\t{score * 100:.1f}\t{word}"
                )
    return "\n".join(out) + "\n"


def main(argv):
    if len(argv) != 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    sys.stdout.write(recognize(argv[1]))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
