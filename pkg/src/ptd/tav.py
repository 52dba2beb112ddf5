"""Texture-object association values.

For each texture class, the association with an object label is the mean
classifier probability of that label over the class's images.  Rows are
means of probability vectors, so each row sums to 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .store import FeatureMatrix

PROB_SUM_TOL = 1e-5


@dataclass
class AssociationTable:
    texture_classes: list[str]
    object_labels: list[str]
    values: np.ndarray  # (n_textures, n_objects)

    def row(self, texture_class: str) -> np.ndarray:
        return self.values[self.texture_classes.index(texture_class)]


def compute_tav(records, probs: FeatureMatrix,
                object_labels: list[str]) -> AssociationTable:
    """Mean per-class object probabilities over live manifest records."""
    if probs.dim != len(object_labels):
        raise ConfigError(f"probs dim {probs.dim} != "
                          f"{len(object_labels)} labels")
    sums = np.abs(probs.values.sum(axis=1) - 1.0)
    if probs.n_rows and sums.max() > PROB_SUM_TOL:
        raise ConfigError(
            f"probability rows must sum to 1 (worst deviation "
            f"{sums.max():.2e})")

    by_class: dict[str, list[int]] = {}
    for rec in records:
        if rec.is_live():
            by_class.setdefault(rec.texture_class, []).append(rec.image_id)

    classes, rows = [], []
    for name in sorted(by_class):
        image_ids = [i for i in by_class[name] if i in probs.index]
        if not image_ids:
            warnings.warn(f"texture class {name!r} has no classified "
                          "images; row omitted")
            continue
        stacked = np.stack([probs.row_for(i) for i in image_ids])
        classes.append(name)
        rows.append(stacked.mean(axis=0, dtype=np.float64))
    values = np.stack(rows) if rows else np.zeros((0, probs.dim))
    return AssociationTable(classes, list(object_labels), values)


def top_k_associations(table: AssociationTable, k: int = 3) -> dict:
    """Per texture class, the k strongest (object, value) pairs.

    Descending by value; ties broken by ascending object label.
    """
    if k > len(table.object_labels):
        raise ConfigError(f"k={k} exceeds {len(table.object_labels)} "
                          "object labels")
    result = {}
    for name, row in zip(table.texture_classes, table.values):
        ranked = sorted(zip(table.object_labels, row),
                        key=lambda pair: (-pair[1], pair[0]))
        result[name] = [(label, float(value)) for label, value in ranked[:k]]
    return result
