#!/usr/bin/env python3
"""Download the MovieLens 100K rating file for the real-data experiments.

Writes data/ml-100k/u.data (tab-separated user, item, rating, timestamp).
The acceptance tests and the README pipeline look for it there, or wherever
GANC_ML100K points. Needs outbound network access; run it on a machine that
has some if the current one does not.
"""

import io
import sys
import urllib.request
import zipfile
from pathlib import Path

URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"


def main() -> int:
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/ml-100k/u.data")
    if target.exists():
        print(f"already present: {target}")
        return 0
    print(f"downloading {URL} ...")
    with urllib.request.urlopen(URL) as resp:
        payload = resp.read()
    with zipfile.ZipFile(io.BytesIO(payload)) as zf:
        raw = zf.read("ml-100k/u.data")
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(raw)
    print(f"wrote {target} ({len(raw)} bytes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
