"""On-disk formats: image manifest, quarantine ledger, binary feature cache.

The feature cache ("PTDF") is a fixed little-endian layout so files are
portable across platforms and languages:

    bytes 0..3    magic  b"PTDF"
    bytes 4..7    format version (u32 LE)
    bytes 8..11   kind code (u32 LE)
    bytes 12..15  n_rows (u32 LE)
    bytes 16..19  dim (u32 LE)
    bytes 20..    n_rows * dim float32 LE, row-major

Row ids live in a human-readable JSON-lines sidecar (<file>.index.jsonl),
one ``{"id": ..., "row": ...}`` object per line.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FeatureFormatError

MAGIC = b"PTDF"
FORMAT_VERSION = 1

KIND_CODES = {
    "clip_image": 1,
    "clip_text": 2,
    "inception_pool": 3,
    "inception_logits": 4,
    "classifier_probs": 5,
}
_CODE_TO_KIND = {v: k for k, v in KIND_CODES.items()}

_HEADER = struct.Struct("<4sIIII")

STAGES = ("freq", "patchvar", "clip")


@dataclass
class FeatureMatrix:
    """N x D float32 matrix with an id-to-row index."""

    kind: str
    values: np.ndarray  # (n_rows, dim) float32
    index: dict  # id -> row number

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def row_for(self, key) -> np.ndarray:
        return self.values[self.index[key]]


def index_path(path) -> Path:
    return Path(str(path) + ".index.jsonl")


def write_features(kind: str, rows, index: dict, path) -> Path:
    """Write a feature matrix and its id index; returns the binary path."""
    if kind not in KIND_CODES:
        raise FeatureFormatError(f"unknown feature kind {kind!r}")
    try:
        values = np.asarray(rows, dtype=np.float32)
    except ValueError as exc:
        raise FeatureFormatError(f"ragged rows: {exc}") from exc
    if values.ndim == 1 and values.size == 0:
        values = values.reshape(0, 0)
    if values.ndim != 2:
        raise FeatureFormatError(
            f"rows must form a rectangular 2-D matrix, got ndim={values.ndim}")
    n_rows, dim = values.shape
    if len(index) != len(set(index.values())):
        raise FeatureFormatError("duplicate row numbers in index")
    if len(index) != n_rows or set(index.values()) != set(range(n_rows)):
        raise FeatureFormatError(
            f"index must map ids bijectively onto rows 0..{n_rows - 1}")

    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, KIND_CODES[kind],
                              n_rows, dim))
        fh.write(values.astype("<f4", copy=False).tobytes(order="C"))
    with open(index_path(path), "w", encoding="utf-8", newline="\n") as fh:
        for key, row in sorted(index.items(), key=lambda kv: kv[1]):
            fh.write(json.dumps({"id": key, "row": row}))
            fh.write("\n")
    return path


def load_features(path) -> FeatureMatrix:
    """Load and validate a PTDF file plus its index sidecar."""
    path = Path(path)
    data = open(path, "rb").read()
    if len(data) < _HEADER.size:
        raise FeatureFormatError(f"{path}: truncated header")
    magic, version, kind_code, n_rows, dim = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FeatureFormatError(f"{path}: unsupported version {version}")
    if kind_code not in _CODE_TO_KIND:
        raise FeatureFormatError(f"{path}: unknown kind code {kind_code}")
    expected = n_rows * dim * 4
    payload = data[_HEADER.size:]
    if len(payload) < expected:
        raise FeatureFormatError(
            f"{path}: truncated payload ({len(payload)} < {expected} bytes)")
    if len(payload) > expected:
        raise FeatureFormatError(
            f"{path}: trailing garbage ({len(payload)} > {expected} bytes)")
    values = np.frombuffer(payload, dtype="<f4").reshape(n_rows, dim).copy()
    if not np.all(np.isfinite(values)):
        raise FeatureFormatError(f"{path}: non-finite values in payload")

    index: dict = {}
    idx_file = index_path(path)
    if idx_file.exists():
        with open(idx_file, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                if obj["id"] in index:
                    raise FeatureFormatError(
                        f"{idx_file}: duplicate id {obj['id']!r}")
                index[obj["id"]] = obj["row"]
        if len(index) != n_rows or set(index.values()) != set(range(n_rows)):
            raise FeatureFormatError(
                f"{idx_file}: index inconsistent with {n_rows} rows")
    return FeatureMatrix(_CODE_TO_KIND[kind_code], values, index)


@dataclass
class ImageRecord:
    """One generated image with provenance, scores, and survival flags."""

    image_id: int
    prompt_id: int
    seed: int
    attempt: int
    flagged: bool
    file_path: str
    width: int
    height: int
    texture_class: str
    slots: dict = field(default_factory=dict)
    prompt_text: str = ""
    status: str = "kept"  # "kept" | "incomplete"
    stage_scores: dict = field(default_factory=dict)
    survives: dict = field(default_factory=dict)
    exclude_reason: str = ""

    def is_live(self) -> bool:
        """Still in the running after all cuts applied so far."""
        if self.status != "kept" or self.flagged:
            return False
        return all(self.survives.get(s, True) for s in STAGES)

    def to_json(self) -> str:
        return json.dumps({
            "image_id": self.image_id,
            "prompt_id": self.prompt_id,
            "seed": self.seed,
            "attempt": self.attempt,
            "flagged": self.flagged,
            "file_path": self.file_path,
            "width": self.width,
            "height": self.height,
            "texture_class": self.texture_class,
            "slots": self.slots,
            "prompt_text": self.prompt_text,
            "status": self.status,
            "stage_scores": self.stage_scores,
            "survives": self.survives,
            "exclude_reason": self.exclude_reason,
        }, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ImageRecord":
        obj = json.loads(line)
        return cls(**obj)


@dataclass
class FlagLedgerEntry:
    """One safety-flag event (the image itself stays quarantined)."""

    prompt_id: int
    seed: int
    attempt: int
    timestamp: float

    def to_json(self) -> str:
        return json.dumps({
            "prompt_id": self.prompt_id,
            "seed": self.seed,
            "attempt": self.attempt,
            "timestamp": self.timestamp,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "FlagLedgerEntry":
        return cls(**json.loads(line))


def write_manifest(records, path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")
            n += 1
    return n


def read_manifest(path) -> list[ImageRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return [ImageRecord.from_json(line) for line in fh if line.strip()]


def write_ledger(entries, path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in entries:
            fh.write(entry.to_json())
            fh.write("\n")
            n += 1
    return n


def read_ledger(path) -> list[FlagLedgerEntry]:
    with open(path, "r", encoding="utf-8") as fh:
        return [FlagLedgerEntry.from_json(line) for line in fh
                if line.strip()]


def verify_tree(root) -> list[str]:
    """Consistency pass over a dataset directory; returns problem strings.

    Checks manifest <-> ledger prompt ids, manifest <-> feature index ids,
    and that every kept record's image file exists.
    """
    root = Path(root)
    problems: list[str] = []
    manifest_file = root / "manifest.jsonl"
    if not manifest_file.exists():
        return [f"missing manifest: {manifest_file}"]
    records = read_manifest(manifest_file)
    known_prompts = {r.prompt_id for r in records}
    known_images = {r.image_id for r in records if r.status == "kept"}

    ledger_file = root / "flag_ledger.jsonl"
    if ledger_file.exists():
        for entry in read_ledger(ledger_file):
            if entry.prompt_id not in known_prompts:
                problems.append(
                    f"ledger prompt_id {entry.prompt_id} not in manifest")

    for rec in records:
        if rec.status == "kept" and rec.file_path:
            # file_path is relative to the image root, conventionally the
            # manifest directory or its images/ subdirectory
            if not ((root / rec.file_path).exists()
                    or (root / "images" / rec.file_path).exists()):
                problems.append(f"missing image file: {rec.file_path}")

    for ptdf in sorted(root.glob("features/*.ptdf")):
        try:
            matrix = load_features(ptdf)
        except FeatureFormatError as exc:
            problems.append(str(exc))
            continue
        if matrix.kind == "clip_text":
            continue  # indexed by prompt_id, checked loosely
        for key in matrix.index:
            if key not in known_images:
                problems.append(f"{ptdf.name}: orphan id {key}")
    return problems
