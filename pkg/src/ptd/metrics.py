"""Dataset quality metrics: Inception Score, FID, CLIP statistics, curves.

Mean power spectra live in :mod:`ptd.spectra`; this module covers the
feature-space metrics and the descriptor-level CLIP aggregations.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError

EIG_CLAMP_REL_TOL = 1e-8

# Table-style label for an empty descriptor slot, qualified by its category.
SLOT_LABELS = {
    "texture": "texture",
    "artistic": "artistic",
    "spatial": "spatial",
    "enhancer": "color enhancer",
    "color": "color",
}


@dataclass
class FeatureStats:
    """Gaussian fit (mean, covariance) of a feature matrix."""

    mu: np.ndarray
    sigma: np.ndarray

    @classmethod
    def from_rows(cls, rows) -> "FeatureStats":
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 2:
            raise ConfigError("need a 2-D matrix with at least 2 rows")
        mu = rows.mean(axis=0)
        sigma = np.cov(rows, rowvar=False)
        sigma = np.atleast_2d(sigma)
        return cls(mu=mu, sigma=sigma)


@dataclass
class ISResult:
    scores: list[float]
    mean: float
    std: float
    n_splits: int


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def inception_score(logits, n_splits: int = 10) -> ISResult:
    """exp(mean KL(p(y|x) || p(y))), reported over row splits."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ConfigError("logits must be a 2-D matrix")
    if not np.all(np.isfinite(logits)):
        raise ConfigError("logits contain non-finite values")
    n = logits.shape[0]
    if n < n_splits:
        raise ConfigError(f"need at least n_splits={n_splits} rows, got {n}")

    probs = _softmax(logits)
    scores = []
    for chunk in np.array_split(probs, n_splits):
        marginal = chunk.mean(axis=0)
        # KL with 0 log 0 = 0; marginal is 0 only where every p(y|x) is 0.
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(chunk > 0, chunk / marginal, 1.0)
            kl = np.sum(chunk * np.log(ratio), axis=1)
        scores.append(float(np.exp(kl.mean())))
    mean = float(np.mean(scores))
    std = float(np.std(scores))
    return ISResult(scores=scores, mean=mean, std=std, n_splits=n_splits)


def _psd_sqrt(sigma: np.ndarray, label: str) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition."""
    eigvals, eigvecs = np.linalg.eigh(sigma)
    bound = EIG_CLAMP_REL_TOL * max(abs(eigvals).max(), 1.0)
    if eigvals.min() < -bound:
        raise NumericalError(
            f"{label} is not PSD: eigenvalue {eigvals.min():.3e}")
    clamped = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(clamped)) @ eigvecs.T


def fid(stats_a: FeatureStats, stats_b: FeatureStats) -> float:
    """Frechet distance between two Gaussian feature fits.

    ||mu_a - mu_b||^2 + Tr(Sig_a + Sig_b - 2 (Sig_a Sig_b)^{1/2}), with the
    product square root computed through the symmetric form
    sqrt(A) B sqrt(A), which shares its spectrum with A B and keeps the
    whole computation real.
    """
    mu_a, sig_a = stats_a.mu, np.asarray(stats_a.sigma, dtype=np.float64)
    mu_b, sig_b = stats_b.mu, np.asarray(stats_b.sigma, dtype=np.float64)
    if mu_a.shape != mu_b.shape or sig_a.shape != sig_b.shape:
        raise ConfigError("feature stats have mismatched dimensions")

    sqrt_a = _psd_sqrt((sig_a + sig_a.T) / 2.0, "covariance A")
    inner = sqrt_a @ ((sig_b + sig_b.T) / 2.0) @ sqrt_a
    inner = (inner + inner.T) / 2.0
    eigvals = np.linalg.eigvalsh(inner)
    bound = EIG_CLAMP_REL_TOL * max(abs(eigvals).max(), 1.0)
    if eigvals.min() < -bound:
        raise NumericalError(
            f"product matrix not PSD: eigenvalue {eigvals.min():.3e}")
    trace_sqrt = np.sqrt(np.clip(eigvals, 0.0, None)).sum()

    diff = mu_a - mu_b
    return float(diff @ diff + np.trace(sig_a) + np.trace(sig_b)
                 - 2.0 * trace_sqrt)


def clip_stats_by_pair(records) -> list[dict]:
    """Aggregate CLIP scores over co-occurring descriptor word pairs.

    ``records`` yields ``(slots, score)`` where slots maps the five
    category names to their words.  Every unordered pair of slots
    contributes; empty words are labeled by their category, e.g.
    "∅(color enhancer)".  Rows come back sorted by descending mean.
    """
    buckets: dict[tuple, list[float]] = {}
    slot_order = list(SLOT_LABELS)
    for slots, score in records:
        labels = []
        for cat in slot_order:
            word = slots[cat]
            labels.append(word if word else f"∅({SLOT_LABELS[cat]})")
        for i in range(len(slot_order)):
            for j in range(i + 1, len(slot_order)):
                key = (slot_order[i], slot_order[j], labels[i], labels[j])
                buckets.setdefault(key, []).append(score)

    rows = []
    for (cat_a, cat_b, word_a, word_b), scores in buckets.items():
        rows.append({
            "word_pair": f"{word_a} {word_b}",
            "categories": (cat_a, cat_b),
            "mean": float(np.mean(scores)),
            "median": float(statistics.median(scores)),
            "n": len(scores),
        })
    rows.sort(key=lambda r: (-r["mean"], r["word_pair"]))
    return rows


def top_bottom_pairs(rows: list[dict], k: int = 5) -> dict:
    return {"top": rows[:k], "bottom": rows[-k:] if len(rows) > k else []}


def human_vs_clip_curve(ratings, clip_scores: dict, quantile_grid,
                        score_population=None) -> list[dict]:
    """Mean representativeness of images at or below CLIP score quantiles.

    ``ratings`` yields ``(image_id, representativeness)``; ``clip_scores``
    maps rated image ids to their CLIP score.  Quantiles are taken over
    ``score_population`` (defaults to the rated images' own scores).
    Quantile points with an empty bucket are omitted.
    """
    ratings = list(ratings)
    if not ratings:
        return []
    for image_id, _ in ratings:
        if image_id not in clip_scores:
            raise ConfigError(f"rated image {image_id} has no CLIP score")
    if score_population is None:
        score_population = [clip_scores[i] for i, _ in ratings]
    population = np.asarray(list(score_population), dtype=np.float64)

    points = []
    for q in quantile_grid:
        threshold = float(np.quantile(population, q))
        bucket = [rep for image_id, rep in ratings
                  if clip_scores[image_id] <= threshold]
        if not bucket:
            continue
        points.append({
            "quantile": float(q),
            "cutoff": threshold,
            "mean_representativeness": float(np.mean(bucket)),
            "n": len(bucket),
        })
    return points
