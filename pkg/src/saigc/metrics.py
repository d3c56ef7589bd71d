"""Reconstruction quality, the template classifier, Recall@k and compression ratio."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .codec import match_scores, template_bank
from .scene import N_CELLS, N_CLASSES, RASTER_BYTES
from .validation import check_raster, check_rasters

DESK_REFERENCE_BYTES = RASTER_BYTES  # 36 x 24 x 3
PHOTO_REFERENCE_BYTES = 360 * 240 * 3  # a 360 x 240 RGB photo
REFERENCES = {"desk": DESK_REFERENCE_BYTES, "photo": PHOTO_REFERENCE_BYTES}


def quality(decoded, original) -> float:
    """Fraction of cells whose RGB triples agree exactly."""
    a = np.asarray(decoded)
    b = np.asarray(original)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    a = check_raster(a, "decoded")
    b = check_raster(b, "original")
    return float(np.all(a == b, axis=-1).sum()) / N_CELLS


def class_scores(raster) -> np.ndarray:
    """Per-class template agreement (in cells), maximised over direction, heading and distance."""
    raster = check_raster(raster)
    scores = match_scores(raster)
    # all_specs() is lexicographic, so each (type, color) owns a contiguous block of 36
    return scores.reshape(N_CLASSES, -1).max(axis=1)


def classify(raster) -> list[tuple[int, float]]:
    """Ranked ``(class_id, score)`` pairs, best first; ties go to the smaller class id."""
    scores = class_scores(raster)
    order = np.lexsort((np.arange(N_CLASSES), -scores))
    return [(int(c), float(scores[c]) / N_CELLS) for c in order]


def rank_of(raster, true_class: int) -> int:
    """1-based position of ``true_class`` in the classifier's ranking."""
    for rank, (cid, _) in enumerate(classify(raster), 1):
        if cid == true_class:
            return rank
    raise ValueError(f"class {true_class} not in 0..{N_CLASSES - 1}")


class TemplateClassifier(ClassifierMixin, BaseEstimator):
    """Nearest-template classifier over the 40 (vehicle type, color) classes.

    It has no free parameters; ``fit`` only records the class labels so the
    estimator plugs into sklearn scoring utilities.
    """

    def fit(self, X=None, y=None):
        template_bank()
        self.classes_ = np.arange(N_CLASSES)
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "classes_")
        return np.stack([class_scores(r) / N_CELLS for r in check_rasters(X)])

    def predict(self, X) -> np.ndarray:
        return np.array([classify(r)[0][0] for r in check_rasters(X)])

    def rank(self, X, y) -> np.ndarray:
        check_is_fitted(self, "classes_")
        return np.array([rank_of(r, int(c)) for r, c in zip(check_rasters(X), y)])


@dataclass(frozen=True)
class EvalRecord:
    scene_id: int
    true_class: int
    rank_of_true: int
    payload_bytes: int
    compression_ratio: float
    quality: float

    def __post_init__(self):
        if not 1 <= self.rank_of_true <= N_CLASSES:
            raise ValueError(f"rank_of_true={self.rank_of_true} out of range")
        if self.compression_ratio <= 0:
            raise ValueError("compression_ratio must be positive")


def recall_at_k(records: Sequence[EvalRecord], k: int) -> float:
    if not records:
        raise ValueError("recall_at_k needs at least one record")
    if not 1 <= k <= N_CLASSES:
        raise ValueError(f"k must be in 1..{N_CLASSES}, got {k}")
    return sum(r.rank_of_true <= k for r in records) / len(records)


def cumulative_recall(records: Sequence[EvalRecord]) -> list[float]:
    """Recall@k for k = 1..40."""
    return [recall_at_k(records, k) for k in range(1, N_CLASSES + 1)]


def rank_histogram(records: Iterable[EvalRecord]) -> np.ndarray:
    """Count of records per rank of the true class (index 0 is rank 1)."""
    counts = np.zeros(N_CLASSES, dtype=int)
    for r in records:
        counts[r.rank_of_true - 1] += 1
    return counts


def compression_ratio(payload_bytes: int, reference_bytes: int | str = DESK_REFERENCE_BYTES) -> float:
    if isinstance(reference_bytes, str):
        reference_bytes = REFERENCES[reference_bytes]
    if payload_bytes <= 0:
        raise ValueError("payload_bytes must be positive")
    if reference_bytes <= 0:
        raise ValueError("reference_bytes must be positive")
    return reference_bytes / payload_bytes


CSV_HEADER = [f.name for f in fields(EvalRecord)]


def write_records(records: Iterable[EvalRecord], path: str | Path) -> None:
    rows = sorted(records, key=lambda r: r.scene_id)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow(astuple(r))


def read_records(path: str | Path) -> list[EvalRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [
            EvalRecord(
                int(row["scene_id"]),
                int(row["true_class"]),
                int(row["rank_of_true"]),
                int(row["payload_bytes"]),
                float(row["compression_ratio"]),
                float(row["quality"]),
            )
            for row in reader
        ]
