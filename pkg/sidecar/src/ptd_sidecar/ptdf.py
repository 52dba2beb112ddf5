"""Writer for the pipeline's binary feature-cache format.

Layout (all integers little-endian u32): magic "PTDF", version, kind
code, n_rows, dim, then row-major float32 payload.  Ids go to a
JSON-lines sidecar at <file>.index.jsonl.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"PTDF"
VERSION = 1
KIND_CODES = {
    "clip_image": 1,
    "clip_text": 2,
    "inception_pool": 3,
    "inception_logits": 4,
    "classifier_probs": 5,
}


def write(kind: str, rows: np.ndarray, ids: list, path) -> Path:
    rows = np.asarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise ValueError("rows must be 2-D")
    if len(ids) != rows.shape[0]:
        raise ValueError("one id per row required")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIII", VERSION, KIND_CODES[kind],
                             rows.shape[0], rows.shape[1]))
        fh.write(rows.tobytes(order="C"))
    with open(str(path) + ".index.jsonl", "w", encoding="utf-8",
              newline="\n") as fh:
        for row, key in enumerate(ids):
            fh.write(json.dumps({"id": key, "row": row}))
            fh.write("\n")
    return path
