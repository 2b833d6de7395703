"""
Turning classifier scores into bodies of evidence.

Confusion matrices follow the layout ``counts[i, k]`` = number of samples
predicted as class ``i`` whose true class is ``k`` (rows predicted, columns true).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

from .core import Frame, MassFunction, TotalConflictError

log = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-9


class WeightScheme(str, Enum):
    W0 = "w0"  # unweighted
    W1 = "w1"  # overall accuracy
    W2 = "w2"  # per-class precision
    W3 = "w3"  # per-class recall
    W4 = "w4"  # precision (+) recall
    W5 = "w5"  # accuracy (+) precision

    @property
    def index(self) -> int:
        return int(self.value[1:])


ALL_SCHEMES = tuple(WeightScheme)


class ConfusionMatrix:
    """Square matrix of counts; rows are predicted classes, columns true classes."""

    def __init__(self, counts):
        counts = np.asarray(counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"confusion matrix must be square, got shape {counts.shape}")
        if counts.shape[0] < 2:
            raise ValueError("confusion matrix needs at least two classes")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise ValueError("confusion counts must be non-negative")
        if np.any(counts != np.round(counts)):
            raise ValueError("confusion counts must be integers")
        if counts.sum() <= 0:
            raise ValueError("confusion matrix is empty")
        self.counts = counts.astype(np.int64)
        self.counts.setflags(write=False)

    @classmethod
    def from_predictions(cls, predicted, truth, n_classes: int) -> "ConfusionMatrix":
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (np.asarray(predicted), np.asarray(truth)), 1)
        return cls(counts)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"ConfusionMatrix({self.counts.tolist()})"


def accuracy(cm: ConfusionMatrix) -> float:
    return float(np.trace(cm.counts) / cm.counts.sum())


def _safe_ratio(num: np.ndarray, den: np.ndarray, what: str) -> np.ndarray:
    out = np.zeros(len(num), dtype=float)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    if not ok.all():
        warnings.warn(f"{what} undefined for classes {np.flatnonzero(~ok).tolist()}; set to 0", RuntimeWarning, stacklevel=3)
    return out


def precision_per_class(cm: ConfusionMatrix) -> np.ndarray:
    """``N_kk / sum_i N_ik``: correct hits over the column total of class k."""
    return _safe_ratio(np.diag(cm.counts).astype(float), cm.counts.sum(axis=0), "precision")


def recall_per_class(cm: ConfusionMatrix) -> np.ndarray:
    """``N_kk / sum_j N_kj``: correct hits over the row total of class k."""
    return _safe_ratio(np.diag(cm.counts).astype(float), cm.counts.sum(axis=1), "recall")


def scalar_dempster(a: float, b: float) -> float:
    """Dempster's rule on the binary frame {reliable, unreliable}.

    Both arguments are Bayesian masses on "reliable"; the result is the fused
    mass on "reliable", ``ab / (ab + (1 - a)(1 - b))``.
    """
    for x in (a, b):
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"reliability {x!r} outside [0, 1]")
    agree = a * b
    norm = agree + (1.0 - a) * (1.0 - b)
    if norm <= 0.0:
        raise TotalConflictError(f"reliabilities {a!r} and {b!r} are in total conflict")
    return agree / norm


@dataclass(frozen=True, eq=False)
class WeightVector:
    scheme: WeightScheme
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or np.any(values < 0) or np.any(values > 1):
            raise ValueError(f"weights must be a vector in [0, 1], got {values}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "scheme", WeightScheme(self.scheme))


def build_weight(scheme: WeightScheme | str, cm: ConfusionMatrix) -> WeightVector:
    scheme = WeightScheme(scheme)
    n = cm.n_classes
    if scheme is WeightScheme.W0:
        values = np.ones(n)
    elif scheme is WeightScheme.W1:
        values = np.full(n, accuracy(cm))
    elif scheme is WeightScheme.W2:
        values = precision_per_class(cm)
    elif scheme is WeightScheme.W3:
        values = recall_per_class(cm)
    elif scheme is WeightScheme.W4:
        pre, rec = precision_per_class(cm), recall_per_class(cm)
        values = np.array([scalar_dempster(p, r) for p, r in zip(pre, rec)])
    else:
        acc = accuracy(cm)
        values = np.array([scalar_dempster(acc, p) for p in precision_per_class(cm)])
    return WeightVector(scheme, values)


def normalize_scores(raw) -> np.ndarray:
    """Clamp negatives to zero and scale each row to unit sum.

    All-zero rows become uniform.
    """
    scores = np.asarray(raw, dtype=float)
    if scores.ndim != 2:
        raise ValueError(f"scores must be 2-D, got shape {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores contain NaN or infinity")
    scores = np.clip(scores, 0.0, None)
    sums = scores.sum(axis=1, keepdims=True)
    zero = sums[:, 0] == 0
    if zero.any():
        log.debug("%d all-zero score rows replaced by uniform rows", int(zero.sum()))
        scores[zero] = 1.0
        sums[zero] = scores.shape[1]
    return scores / sums


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Per-sample class scores of one classifier, rows normalized on construction."""

    scores: np.ndarray
    classifier_id: str = ""

    def __post_init__(self):
        scores = normalize_scores(self.scores)
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    @property
    def n_samples(self) -> int:
        return self.scores.shape[0]

    @property
    def n_classes(self) -> int:
        return self.scores.shape[1]

    def predictions(self) -> np.ndarray:
        return np.argmax(self.scores, axis=1)


@dataclass(frozen=True, eq=False)
class BodyOfEvidence:
    """
    Mass functions of one classifier over all samples.

    ``masses`` has shape ``(n_samples, n_classes + 1)``: singleton masses in
    class order followed by the ignorance mass on the whole frame.
    """

    masses: np.ndarray
    classifier_id: str = ""
    frame: Frame | None = field(default=None, compare=False)

    def __post_init__(self):
        masses = np.array(self.masses, dtype=float)
        if masses.ndim != 2 or masses.shape[1] < 3:
            raise ValueError(f"masses must have shape (n_samples, n_classes + 1), got {masses.shape}")
        if np.any(masses < -MASS_TOLERANCE) or np.any(masses > 1 + MASS_TOLERANCE):
            raise ValueError("masses outside [0, 1]")
        if np.any(np.abs(masses.sum(axis=1) - 1.0) > MASS_TOLERANCE):
            raise ValueError("mass rows must sum to 1")
        masses = np.clip(masses, 0.0, 1.0)
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)
        if self.frame is None:
            object.__setattr__(self, "frame", Frame.of_size(masses.shape[1] - 1))
        elif len(self.frame) != masses.shape[1] - 1:
            raise ValueError("frame size does not match the number of classes")

    @property
    def n_samples(self) -> int:
        return self.masses.shape[0]

    @property
    def n_classes(self) -> int:
        return self.masses.shape[1] - 1

    def basis(self) -> list[int]:
        return [1 << k for k in range(self.n_classes)] + [self.frame.full]

    def mass_function(self, i: int) -> MassFunction:
        return MassFunction.from_vector(self.frame, self.basis(), self.masses[i])

    @property
    def per_sample(self) -> Iterator[MassFunction]:
        return (self.mass_function(i) for i in range(self.n_samples))

    def predictions(self) -> np.ndarray:
        return np.argmax(self.masses[:, :-1], axis=1)


def build_boe(scores: ScoreMatrix, w: WeightVector, frame: Frame | None = None) -> BodyOfEvidence:
    """Singleton masses ``w_k * y_k`` and ignorance ``1 - sum_k w_k * y_k``."""
    if len(w.values) != scores.n_classes:
        raise ValueError(f"{len(w.values)} weights for {scores.n_classes} classes")
    singles = scores.scores * w.values[None, :]
    ignorance = 1.0 - singles.sum(axis=1)
    if np.any(singles < 0) or np.any(singles > 1) or np.any(ignorance < -MASS_TOLERANCE):
        raise ValueError("weighted scores do not form a valid mass assignment")
    masses = np.column_stack([singles, np.clip(ignorance, 0.0, 1.0)])
    return BodyOfEvidence(masses, scores.classifier_id, frame)


def build_boes(
    score_list: Sequence[ScoreMatrix], confusions: Sequence[ConfusionMatrix | None], scheme: WeightScheme | str
) -> list[BodyOfEvidence]:
    scheme = WeightScheme(scheme)
    if len(score_list) != len(confusions):
        raise ValueError(f"{len(confusions)} confusion matrices for {len(score_list)} score matrices")
    out = []
    for s, cm in zip(score_list, confusions):
        if cm is None:
            if scheme is not WeightScheme.W0:
                raise ValueError(f"scheme {scheme.value} needs a confusion matrix for {s.classifier_id or 'classifier'}")
            w = WeightVector(scheme, np.ones(s.n_classes))
        else:
            w = build_weight(scheme, cm)
        out.append(build_boe(s, w))
    return out
