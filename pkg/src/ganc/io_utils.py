"""Small shared helpers for artifact files: hashing, JSON, and stable id handling."""

from __future__ import annotations

import hashlib
import json
import zlib
from pathlib import Path


def id_int(x) -> int:
    """Stable non-negative integer for an opaque id (ints pass through)."""
    if isinstance(x, int):
        return x & 0xFFFFFFFFFFFFFFFF
    return zlib.crc32(str(x).encode("utf-8"))


def canonical_ids(values):
    """Convert a homogeneous id column to ints when every value is int-like."""
    out = []
    all_int = True
    for v in values:
        try:
            out.append(int(v))
        except (TypeError, ValueError):
            all_int = False
            break
    return out if all_int else [str(v) for v in values]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def split_hash(directory) -> str:
    """Combined content hash of a split's train and test files."""
    d = Path(directory)
    h = hashlib.sha256()
    for name in ("train.csv", "test.csv"):
        h.update(sha256_file(d / name).encode())
    return h.hexdigest()


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
