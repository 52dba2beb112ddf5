"""Three-stage filter cascade: frequency cutoff, patch variance, CLIP score.

Each stage scores the images still alive, then applies a per-texture-class
quantile cut, keeping the top ``keep_fraction`` of each class.  Survival is
recorded on every record so downstream reports can reconstruct any stage.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ScoreError
from .spectra import (frequency_cutoff, load_grayscale,
                      radial_power_spectrum, to_grayscale)
from .store import FeatureMatrix, ImageRecord

PATCH_SIDE = 50
DEFAULT_CLIP_SCALE = 100.0
DEFAULT_FRACTIONS = {"freq": 0.8, "patchvar": 0.8, "clip": 0.8}

STAGE_SCORE_KEYS = {"freq": "f_c", "patchvar": "patch_var", "clip": "clip"}


@dataclass
class StageReport:
    """Outcome of one quantile cut."""

    stage: str
    per_class: dict = field(default_factory=dict)
    # per_class[name] = {"input": n, "kept": k, "threshold": last kept score}

    @property
    def total_input(self) -> int:
        return sum(c["input"] for c in self.per_class.values())

    @property
    def total_kept(self) -> int:
        return sum(c["kept"] for c in self.per_class.values())

    @property
    def retention(self) -> float:
        return self.total_kept / self.total_input if self.total_input else 0.0

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "per_class": self.per_class,
            "total_input": self.total_input,
            "total_kept": self.total_kept,
            "retention": self.retention,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_table(self) -> str:
        lines = [f"stage {self.stage}: kept {self.total_kept}/"
                 f"{self.total_input} (retention {self.retention:.4f})",
                 f"{'class':<16}{'input':>8}{'kept':>8}{'threshold':>14}"]
        for name in sorted(self.per_class):
            c = self.per_class[name]
            thr = c["threshold"]
            thr_s = f"{thr:.4f}" if thr is not None else "-"
            lines.append(f"{name:<16}{c['input']:>8}{c['kept']:>8}{thr_s:>14}")
        return "\n".join(lines)


def patch_variance(pixels) -> float:
    """Population variance of mean intensities over full 50x50 patches.

    Partial edge patches are discarded; an image smaller than one patch
    cannot be scored.
    """
    gray = to_grayscale(pixels)
    h, w = gray.shape
    rows, cols = h // PATCH_SIDE, w // PATCH_SIDE
    if rows == 0 or cols == 0:
        raise ScoreError(
            f"image {h}x{w} smaller than one {PATCH_SIDE}x{PATCH_SIDE} patch")
    trimmed = gray[:rows * PATCH_SIDE, :cols * PATCH_SIDE]
    means = trimmed.reshape(rows, PATCH_SIDE, cols, PATCH_SIDE).mean(
        axis=(1, 3))
    return float(means.var())


def clip_score(image_embedding, text_embedding,
               scale: float = DEFAULT_CLIP_SCALE) -> float:
    """Scaled, zero-clamped cosine similarity between the two embeddings."""
    a = np.asarray(image_embedding, dtype=np.float64)
    b = np.asarray(text_embedding, dtype=np.float64)
    if a.shape != b.shape:
        raise ScoreError(f"embedding dim mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ScoreError("zero-norm embedding")
    cosine = float(np.dot(a, b) / (na * nb))
    return scale * max(cosine, 0.0)


def _score_image_file(record: ImageRecord, root: Path, which: str) -> float:
    gray = load_grayscale(root / record.file_path)
    if which == "freq":
        return float(frequency_cutoff(radial_power_spectrum(gray)))
    return patch_variance(gray)


def score_stage_from_pixels(records, root, stage: str,
                            workers: int = 1) -> None:
    """Fill f_c or patch_var scores for live records, in place."""
    root = Path(root)
    live = [r for r in records if r.is_live()]

    def score_one(rec):
        try:
            return _score_image_file(rec, root, stage), ""
        except ScoreError as exc:
            return None, str(exc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(score_one, live))
    else:
        results = [score_one(r) for r in live]

    key = STAGE_SCORE_KEYS[stage]
    for rec, (value, reason) in zip(live, results):
        if value is None:
            rec.survives[stage] = False
            rec.exclude_reason = reason
        else:
            rec.stage_scores[key] = value


def score_clip_stage(records, clip_image: FeatureMatrix,
                     clip_text: FeatureMatrix,
                     scale: float = DEFAULT_CLIP_SCALE) -> None:
    """Fill CLIP scores for live records from cached embeddings, in place."""
    for rec in records:
        if not rec.is_live():
            continue
        try:
            rec.stage_scores["clip"] = clip_score(
                clip_image.row_for(rec.image_id),
                clip_text.row_for(rec.prompt_id), scale)
        except KeyError as exc:
            raise ScoreError(
                f"missing embedding for key {exc.args[0]!r}") from exc
        except ScoreError as exc:
            rec.survives["clip"] = False
            rec.exclude_reason = str(exc)


def quantile_cut(records, score_key: str, keep_fraction: float,
                 stage: str) -> StageReport:
    """Keep the top ceil(keep_fraction * n) of each texture class.

    Sorting is descending by score with ties broken by ascending image_id,
    so the cut is deterministic and independent of record order.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ConfigError(f"keep_fraction must be in (0, 1], "
                          f"got {keep_fraction}")
    report = StageReport(stage=stage)
    by_class: dict[str, list[ImageRecord]] = {}
    for rec in records:
        if rec.is_live():
            by_class.setdefault(rec.texture_class, []).append(rec)

    for name, group in sorted(by_class.items()):
        for rec in group:
            score = rec.stage_scores.get(score_key)
            if score is None or not math.isfinite(score):
                raise ScoreError(
                    f"record {rec.image_id} lacks a finite {score_key!r} "
                    f"score")
        group.sort(key=lambda r: (-r.stage_scores[score_key], r.image_id))
        keep_count = math.ceil(keep_fraction * len(group))
        for rec in group[:keep_count]:
            rec.survives[stage] = True
        for rec in group[keep_count:]:
            rec.survives[stage] = False
        report.per_class[name] = {
            "input": len(group),
            "kept": keep_count,
            "threshold": group[keep_count - 1].stage_scores[score_key],
        }
    return report


def run_stage(records, stage: str, keep_fraction: float, *, root=None,
              clip_image=None, clip_text=None,
              clip_scale: float = DEFAULT_CLIP_SCALE,
              workers: int = 1) -> StageReport:
    """Score one stage over the live records, then apply its cut."""
    if stage in ("freq", "patchvar"):
        if root is None:
            raise ConfigError(f"stage {stage!r} needs the image root")
        score_stage_from_pixels(records, root, stage, workers=workers)
    elif stage == "clip":
        if clip_image is None or clip_text is None:
            raise ConfigError("stage 'clip' needs image and text embeddings")
        score_clip_stage(records, clip_image, clip_text, scale=clip_scale)
    else:
        raise ConfigError(f"unknown stage {stage!r}")
    return quantile_cut(records, STAGE_SCORE_KEYS[stage], keep_fraction,
                        stage)


def refine_all(records, *, root=None, clip_image=None, clip_text=None,
               fractions: dict | None = None,
               clip_scale: float = DEFAULT_CLIP_SCALE,
               workers: int = 1) -> list[StageReport]:
    """Apply the full cascade freq -> patchvar -> clip, in order."""
    fractions = dict(DEFAULT_FRACTIONS, **(fractions or {}))
    reports = []
    for stage in ("freq", "patchvar", "clip"):
        reports.append(run_stage(
            records, stage, fractions[stage], root=root,
            clip_image=clip_image, clip_text=clip_text,
            clip_scale=clip_scale, workers=workers))
    return reports


def balance_classes(records) -> int:
    """Optional post-step: truncate every class to the smallest class size.

    Drops the highest image_ids from oversized classes by flipping their
    final-stage survival.  Returns the per-class size after balancing.
    """
    by_class: dict[str, list[ImageRecord]] = {}
    for rec in records:
        if rec.is_live():
            by_class.setdefault(rec.texture_class, []).append(rec)
    if not by_class:
        return 0
    floor = min(len(g) for g in by_class.values())
    for group in by_class.values():
        group.sort(key=lambda r: r.image_id)
        for rec in group[floor:]:
            rec.survives["clip"] = False
            rec.exclude_reason = "class balancing"
    return floor
