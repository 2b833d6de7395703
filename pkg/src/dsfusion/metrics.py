"""
Conflict measures between bodies of evidence: Deng entropy, belief
Jensen-Shannon divergence, Jousselme-type evidence distance and the
leave-one-out disagreement degree.

Public functions take `MassFunction` objects. The ``*_array`` kernels work on
mass vectors laid out over a shared ordered focal-set basis (last axis) and
broadcast over any leading axes; the batched fusion pipeline uses them directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import FocalSet, MassFunction, common_basis, popcount


class EvidenceDistanceWeighting(str, Enum):
    IDENTITY = "identity"
    JACCARD = "jaccard"


@dataclass(frozen=True)
class DisagreementConfig:
    # gain on the scatter gap SW - SW_~q inside the arctan
    sigma: float = 2.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")


def _check_base(base: float) -> float:
    if not base > 1:
        raise ValueError(f"log base must exceed 1, got {base!r}")
    return math.log(base)


def _neg_xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    pos = p > 0
    out[pos] = -p[pos] * np.log(p[pos])
    return out


def cardinalities(basis: Sequence[FocalSet]) -> np.ndarray:
    return np.array([popcount(b) for b in basis], dtype=float)


def jaccard_matrix(basis: Sequence[FocalSet]) -> np.ndarray:
    n = len(basis)
    jac = np.empty((n, n))
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            jac[i, j] = popcount(a & b) / popcount(a | b)
    return jac


def weighting_matrix(basis: Sequence[FocalSet], weighting: EvidenceDistanceWeighting) -> np.ndarray | None:
    """None stands for the identity matrix."""
    weighting = EvidenceDistanceWeighting(weighting)
    if weighting is EvidenceDistanceWeighting.IDENTITY:
        return None
    return jaccard_matrix(basis)


# -- array kernels -----------------------------------------------------------


def shannon_entropy_array(p: np.ndarray, log_base: float = 2.0) -> np.ndarray:
    return _neg_xlogx(np.asarray(p, dtype=float)).sum(axis=-1) / _check_base(log_base)


def deng_entropy_array(p: np.ndarray, cards: np.ndarray, log_base: float = 10.0) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    volume = np.log(2.0 ** np.asarray(cards, dtype=float) - 1.0)
    terms = _neg_xlogx(p) + np.where(p > 0, p * volume, 0.0)
    return terms.sum(axis=-1) / _check_base(log_base)


def bjs_array(a: np.ndarray, b: np.ndarray, log_base: float = 2.0) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    h = shannon_entropy_array
    # summing the two side entropies first keeps the result exactly symmetric
    out = h((a + b) / 2.0, log_base) - 0.5 * (h(a, log_base) + h(b, log_base))
    # the divergence is non-negative; clip rounding noise for identical inputs
    return np.maximum(out, 0.0)


def distance_array(a: np.ndarray, b: np.ndarray, weight: np.ndarray | None = None) -> np.ndarray:
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if weight is None:
        quad = (diff * diff).sum(axis=-1)
    else:
        quad = np.einsum("...i,ij,...j->...", diff, weight, diff)
    return np.sqrt(np.maximum(quad, 0.0))


@dataclass(frozen=True)
class Scatter:
    """Distances of each body of evidence to the global and leave-one-out centers."""

    center: np.ndarray  # (..., F)
    loo_centers: np.ndarray  # (..., L, F); row q excludes evidence q
    center_distances: np.ndarray  # (..., L)
    sw: np.ndarray  # (...)
    sw_loo: np.ndarray  # (..., L)


def scatter_array(masses: np.ndarray, weight: np.ndarray | None = None) -> Scatter:
    """Centers and mean distances for masses shaped ``(..., L, F)``."""
    masses = np.asarray(masses, dtype=float)
    n = masses.shape[-2]
    if n < 2:
        raise ValueError("at least two bodies of evidence are required")
    # means are taken as offsets from the first evidence, so identical inputs give exact zeros
    ref = masses[..., :1, :]
    dev = masses - ref
    total = dev.sum(axis=-2)
    center = ref[..., 0, :] + total / n
    center_d = distance_array(masses, center[..., None, :], weight)
    sw = center_d.mean(axis=-1)
    loo = ref + (total[..., None, :] - dev) / (n - 1)
    # pair[..., q, j] = distance of evidence j to the center that leaves q out
    pair = distance_array(masses[..., None, :, :], loo[..., :, None, :], weight)
    mask = 1.0 - np.eye(n)
    sw_loo = (pair * mask).sum(axis=-1) / (n - 1)
    return Scatter(center, loo, center_d, sw, sw_loo)


def disagreement_from_scatter(sw: np.ndarray, sw_loo: np.ndarray, sigma: float) -> np.ndarray:
    return 0.5 + np.arctan(sigma * (np.asarray(sw)[..., None] - sw_loo)) / np.pi


# -- mass-function API -------------------------------------------------------


def _vectors(ms: Sequence[MassFunction]) -> tuple[list[FocalSet], np.ndarray]:
    basis = common_basis(ms)
    return basis, np.array([m.vector(basis) for m in ms], dtype=float)


def deng_entropy(m: MassFunction, log_base: float = 10.0) -> float:
    """Cardinality-aware entropy: ``-sum m(A) log(m(A) / (2^|A| - 1))``."""
    basis, (p,) = _vectors([m])
    return float(deng_entropy_array(p, cardinalities(basis), log_base))


def shannon_entropy(m: MassFunction, log_base: float = 2.0) -> float:
    """Shannon entropy of the mass vector, each focal set counted as one outcome."""
    _, (p,) = _vectors([m])
    return float(shannon_entropy_array(p, log_base))


def bjs_divergence(m1: MassFunction, m2: MassFunction, log_base: float = 2.0) -> float:
    _, (a, b) = _vectors([m1, m2])
    return float(bjs_array(a, b, log_base))


def evidence_distance(
    m1: MassFunction,
    m2: MassFunction,
    weighting: EvidenceDistanceWeighting = EvidenceDistanceWeighting.IDENTITY,
) -> float:
    """``sqrt((m1 - m2)^T W (m1 - m2))`` with W the identity or the Jaccard matrix.

    No one-half factor is applied in either mode.
    """
    basis, (a, b) = _vectors([m1, m2])
    return float(distance_array(a, b, weighting_matrix(basis, weighting)))


def boe_centers(ms: Sequence[MassFunction]) -> tuple[MassFunction, list[MassFunction]]:
    """Mean mass function and the leave-one-out means (each over L - 1 inputs)."""
    if len(ms) < 2:
        raise ValueError("at least two bodies of evidence are required")
    basis, vecs = _vectors(ms)
    scat = scatter_array(vecs)
    frame = ms[0].frame
    center = MassFunction.from_vector(frame, basis, scat.center)
    loo = [MassFunction.from_vector(frame, basis, row) for row in scat.loo_centers]
    return center, loo


def scatter(
    ms: Sequence[MassFunction],
    weighting: EvidenceDistanceWeighting = EvidenceDistanceWeighting.IDENTITY,
) -> Scatter:
    basis, vecs = _vectors(ms)
    return scatter_array(vecs, weighting_matrix(basis, weighting))


def disagreement_degree(
    ms: Sequence[MassFunction],
    q: int,
    cfg: DisagreementConfig = DisagreementConfig(),
    weighting: EvidenceDistanceWeighting = EvidenceDistanceWeighting.IDENTITY,
) -> float:
    """How far evidence ``q`` sits outside the group, squashed into (0, 1).

    Returns ``0.5 + arctan(sigma * (SW - SW_~q)) / pi`` where SW is the mean
    distance to the global center and SW_~q the mean distance of the others to
    the center computed without ``q``. Removing an outlier shrinks the scatter,
    which pushes the degree above one half.
    """
    if not -len(ms) <= q < len(ms):
        raise IndexError(q)
    scat = scatter(ms, weighting)
    return float(disagreement_from_scatter(scat.sw, scat.sw_loo, cfg.sigma)[q])
