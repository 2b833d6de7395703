"""Synthetic two-class data for smoke tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .classifiers import Dataset


def make_two_blobs(
    n_samples: int = 300,
    n_features: int = 4,
    separation: float = 2.5,
    imbalance: float = 2.0,
    seed: int = 0,
    name: str = "two_blobs",
) -> Dataset:
    """Two isotropic unit-variance Gaussian blobs.

    The class means differ by ``separation`` along the first axis. Class 0
    ("healthy") outnumbers class 1 ("defect") by ``imbalance``.
    """
    if n_samples < 6:
        raise ValueError("need at least 6 samples")
    if imbalance < 1:
        raise ValueError("imbalance must be >= 1")
    rng = np.random.default_rng(seed)
    n_minor = max(3, int(round(n_samples / (1.0 + imbalance))))
    n_major = n_samples - n_minor
    x0 = rng.standard_normal((n_major, n_features))
    x1 = rng.standard_normal((n_minor, n_features))
    x1[:, 0] += separation
    x = np.vstack([x0, x1])
    y = np.concatenate([np.zeros(n_major, dtype=int), np.ones(n_minor, dtype=int)])
    order = rng.permutation(n_samples)
    return Dataset(x[order], y[order], name, ("healthy", "defect"))
