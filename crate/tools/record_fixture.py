#!/usr/bin/env python3
"""Records rasterizer and OCR output for a stamped PDF, for replay in tests.

usage: record_fixture.py STAMPED.pdf FIXTURE_DIR [--dpi 200] [--edit FROM=TO ...]

Writes FIXTURE_DIR/pages/page-NNNN.png, FIXTURE_DIR/ocr/page-NNNN.tsv and
FIXTURE_DIR/manifest.json. Each --edit replaces a recognised word verbatim
after OCR, to inject a known misreading; edits are listed in the manifest.
"""
import argparse
import hashlib
import json
import pathlib
import sys

import pymupdf
from importlib.metadata import version

import ocr
import rasterize


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("stamped")
    parser.add_argument("fixture_dir")
    parser.add_argument("--dpi", type=int, default=200)
    parser.add_argument("--edit", action="append", default=[], metavar="FROM=TO")
    args = parser.parse_args()

    edits = [tuple(e.split("=", 1)) for e in args.edit]
    out = pathlib.Path(args.fixture_dir)
    pages = rasterize.render(args.stamped, out / "pages", args.dpi)
    (out / "ocr").mkdir(parents=True, exist_ok=True)
    applied = set()
    for image in pages:
        tsv = ocr.recognize(str(image))
        rows = tsv.splitlines()
        for i, row in enumerate(rows[1:], start=1):
            cols = row.split("\t")
            for old, new in edits:
                if cols[-1] == old:
                    cols[-1] = new
                    applied.add(old)
            rows[i] = "\t".join(cols)
        (out / "ocr" / image.with_suffix(".tsv").name).write_text("\n".join(rows) + "\n")

    missing = [old for old, _ in edits if old not in applied]
    if missing:
        print(f"edits matched no word: {missing}", file=sys.stderr)
        return 1

    manifest = {
        "stamped_sha256": hashlib.sha256(pathlib.Path(args.stamped).read_bytes()).hexdigest(),
        "dpi": args.dpi,
        "pages": len(pages),
        "rasterizer": f"tools/rasterize.py (PyMuPDF {pymupdf.VersionBind})",
        "ocr": f"tools/ocr.py (rapidocr_onnxruntime {version('rapidocr_onnxruntime')})",
        "edits": [f"{old} -> {new}" for old, new in edits],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
