#!/usr/bin/env python3
"""Rasterizer adapter: renders a PDF to page-NNNN.png files with PyMuPDF.

usage: rasterize.py INPUT.pdf OUTPUT_DIR DPI
"""
import pathlib
import sys

import pymupdf


def render(pdf_path, out_dir, dpi):
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with pymupdf.open(pdf_path) as doc:
        for i, page in enumerate(doc):
            pix = page.get_pixmap(dpi=dpi, annots=True, alpha=False)
            target = out / f"page-{i + 1:04d}.png"
            pix.save(target)
            written.append(target)
    return written


def main(argv):
    if len(argv) != 4:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    render(argv[1], argv[2], int(argv[3]))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
