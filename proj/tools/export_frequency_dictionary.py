#!/usr/bin/env python3
"""Write the English word-frequency list shipped with pyspellchecker as a
`word<TAB>count` file for `revcf preprocess --dict`.

The source can be the installed package (default), a downloaded wheel, or
the en.json.gz resource itself. Only lowercase [a-z]+ words are kept.
"""

import argparse
import gzip
import io
import json
import pathlib
import re
import sys
import zipfile

RESOURCE = "spellchecker/resources/en.json.gz"
WORD = re.compile(r"[a-z]+")


def load(source):
    if source is None:
        import spellchecker  # noqa: PLC0415

        path = pathlib.Path(spellchecker.__file__).parent / "resources" / "en.json.gz"
        return json.loads(gzip.decompress(path.read_bytes()))
    path = pathlib.Path(source)
    if path.suffix == ".whl":
        with zipfile.ZipFile(path) as whl:
            return json.loads(gzip.decompress(whl.read(RESOURCE)))
    return json.loads(gzip.decompress(path.read_bytes()))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--source", help="wheel or en.json.gz (default: installed pyspellchecker)")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    counts = load(args.source)
    rows = sorted((w, int(c)) for w, c in counts.items() if WORD.fullmatch(w) and int(c) > 0)
    if not rows:
        sys.exit("no usable words in source")
    buf = io.StringIO()
    for w, c in rows:
        buf.write(f"{w}\t{c}\n")
    pathlib.Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
    print(f"{len(rows)} words -> {args.out}")


if __name__ == "__main__":
    main()
