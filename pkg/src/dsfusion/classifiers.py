"""
Small built-in classifiers producing normalized score matrices.

They exist so the benchmark harness runs end to end; any external classifier
can be plugged in through score-matrix CSV files instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_softmax, softmax

from .evidence import ConfusionMatrix, ScoreMatrix


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        y = np.array(self.labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[1] < 1:
            raise ValueError(f"features must be (n_samples, n_features), got {x.shape}")
        if y.shape != (x.shape[0],):
            raise ValueError("one label per sample is required")
        if len(y) and y.min() < 0:
            raise ValueError("labels must be non-negative class indices")
        names = tuple(self.class_names) or tuple(str(i) for i in range(int(y.max()) + 1 if len(y) else 0))
        if len(y) and y.max() >= len(names):
            raise ValueError("label index exceeds the number of classes")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "class_names", names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    @property
    def imbalance_ratio(self) -> float:
        counts = self.class_counts()
        counts = counts[counts > 0]
        return float(counts.max() / counts.min())

    def subset(self, idx, name: str | None = None) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.labels[idx], name or self.name, self.class_names)

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features, self.labels, self.name, self.class_names)


class ClassifierKind(str, Enum):
    KNN = "knn"
    NEAREST_CENTROID = "nearest_centroid"
    LOGISTIC_LINEAR = "logistic_linear"


@dataclass(frozen=True)
class ClassifierSpec:
    kind: ClassifierKind
    k: int = 5
    ridge: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ClassifierKind(self.kind))
        if self.kind is ClassifierKind.KNN and (self.k < 1 or self.k % 2 == 0):
            raise ValueError(f"k must be odd and positive, got {self.k}")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")

    @property
    def name(self) -> str:
        if self.kind is ClassifierKind.KNN:
            return f"{self.k}NN"
        if self.kind is ClassifierKind.NEAREST_CENTROID:
            return "centroid"
        return f"logistic(ridge={self.ridge:g})"

    @classmethod
    def parse(cls, text: str) -> "ClassifierSpec":
        """Parse ``knn:5``, ``centroid``, ``logistic`` or ``logistic:0.1``."""
        kind, _, arg = text.strip().partition(":")
        kind = kind.lower()
        if kind == "knn":
            return cls(ClassifierKind.KNN, k=int(arg or 5))
        if kind in ("centroid", "nearest_centroid"):
            return cls(ClassifierKind.NEAREST_CENTROID)
        if kind in ("logistic", "logistic_linear"):
            return cls(ClassifierKind.LOGISTIC_LINEAR, ridge=float(arg or 1.0))
        raise ValueError(f"unknown classifier spec {text!r}")


DEFAULT_POOL = (
    *(ClassifierSpec(ClassifierKind.KNN, k=k) for k in (5, 7, 9, 11, 13, 15)),
    ClassifierSpec(ClassifierKind.NEAREST_CENTROID),
    ClassifierSpec(ClassifierKind.LOGISTIC_LINEAR, ridge=1.0),
)


@dataclass(frozen=True, eq=False)
class TrainedClassifier:
    spec: ClassifierSpec
    n_classes: int
    mean: np.ndarray
    scale: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.spec.name

    def _standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale


def _standardizer(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def _fit_logistic(z: np.ndarray, y: np.ndarray, n_classes: int, ridge: float) -> tuple[np.ndarray, np.ndarray]:
    """Multinomial logistic regression minimizing ``NLL_total + ridge/2 * |W|^2``, scaled by 1/n."""
    n, d = z.shape
    onehot = np.eye(n_classes)[y]
    penalty = ridge / n

    def loss(theta):
        w = theta[: d * n_classes].reshape(d, n_classes)
        b = theta[d * n_classes :]
        logits = z @ w + b
        logp = log_softmax(logits, axis=1)
        value = -(onehot * logp).sum() / n + 0.5 * penalty * (w * w).sum()
        resid = (np.exp(logp) - onehot) / n
        grad_w = z.T @ resid + penalty * w
        grad_b = resid.sum(axis=0)
        return value, np.concatenate([grad_w.ravel(), grad_b])

    theta0 = np.zeros(d * n_classes + n_classes)
    res = minimize(loss, theta0, jac=True, method="L-BFGS-B", options={"maxiter": 500})
    return res.x[: d * n_classes].reshape(d, n_classes), res.x[d * n_classes :]


def train(spec: ClassifierSpec, data: Dataset) -> TrainedClassifier:
    """Fit a classifier; fully deterministic for a given dataset and spec."""
    if data.n_samples == 0:
        raise ValueError("cannot train on an empty dataset")
    counts = data.class_counts()
    if np.any(counts == 0):
        missing = [data.class_names[i] for i in np.flatnonzero(counts == 0)]
        raise ValueError(f"classes absent from training data: {missing}")
    mean, scale = _standardizer(data.features)
    z = (data.features - mean) / scale
    if spec.kind is ClassifierKind.KNN:
        params = {"z": z, "y": data.labels.copy()}
    elif spec.kind is ClassifierKind.NEAREST_CENTROID:
        params = {"centroids": np.array([z[data.labels == c].mean(axis=0) for c in range(data.n_classes)])}
    else:
        w, b = _fit_logistic(z, data.labels, data.n_classes, spec.ridge)
        params = {"w": w, "b": b}
    return TrainedClassifier(spec, data.n_classes, mean, scale, params)


def _knn_votes(clf: TrainedClassifier, z: np.ndarray) -> np.ndarray:
    ref, y = clf.params["z"], clf.params["y"]
    k = min(clf.spec.k, len(y))
    d2 = ((z[:, None, :] - ref[None, :, :]) ** 2).sum(axis=2)
    # stable sort: equal distances keep the lower training index first
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    votes = np.zeros((z.shape[0], clf.n_classes))
    np.add.at(votes, (np.repeat(np.arange(z.shape[0]), k), y[nearest].ravel()), 1.0)
    return votes / k


def score(clf: TrainedClassifier, data: Dataset) -> ScoreMatrix:
    """Per-class scores with non-negative rows summing to one."""
    if data.n_features != len(clf.mean):
        raise ValueError(f"expected {len(clf.mean)} features, got {data.n_features}")
    z = clf._standardize(data.features)
    if clf.spec.kind is ClassifierKind.KNN:
        scores = _knn_votes(clf, z)
    elif clf.spec.kind is ClassifierKind.NEAREST_CENTROID:
        d = np.sqrt(((z[:, None, :] - clf.params["centroids"][None]) ** 2).sum(axis=2))
        scores = softmax(-d, axis=1)
    else:
        scores = softmax(z @ clf.params["w"] + clf.params["b"], axis=1)
    return ScoreMatrix(scores, clf.name)


def confusion(clf: TrainedClassifier, data: Dataset) -> ConfusionMatrix:
    return ConfusionMatrix.from_predictions(score(clf, data).predictions(), data.labels, clf.n_classes)


def train_pool(specs: Sequence[ClassifierSpec], data: Dataset) -> list[TrainedClassifier]:
    return [train(s, data) for s in specs]
