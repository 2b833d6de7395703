"""
Credibility-weighted Dempster-Shafer fusion of several classifiers.

For every sample the bodies of evidence of the ensemble members are compared
with each other. Members that diverge from the rest (high average BJS
divergence, high disagreement degree) receive little support; support is then
scaled by exp(Deng entropy) into a credibility weight. The weighted evidences
are finally combined with Dempster's rule.

Two ways of combining the weighted evidences are offered:

``weighted_evidences`` (default)
    Dempster-combine the rows ``CD_i * m_i`` one after another, renormalizing
    after each step. Because the conjunctive sum is bilinear, the scalar
    weights cancel in the normalized output, so the fused masses equal the
    plain Dempster combination of the members.
``weighted_average``
    Form the credibility-weighted average ``sum_i CD_i * m_i`` (a valid mass
    function) and combine it with itself ``N - 1`` times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .core import (
    CONFLICT_THRESHOLD,
    PRUNE_THRESHOLD,
    MassFunction,
    TotalConflictError,
    combine_many,
    common_basis,
    conjunctive_sum,
)
from .evidence import BodyOfEvidence
from .metrics import (
    EvidenceDistanceWeighting,
    bjs_array,
    cardinalities,
    deng_entropy_array,
    disagreement_from_scatter,
    scatter_array,
    weighting_matrix,
)


class Combination(str, Enum):
    WEIGHTED_EVIDENCES = "weighted_evidences"
    WEIGHTED_AVERAGE = "weighted_average"


@dataclass(frozen=True)
class PipelineConfig:
    deng_log_base: float = 10.0
    bjs_log_base: float = 2.0
    sigma: float = 2.0
    distance_weighting: EvidenceDistanceWeighting = EvidenceDistanceWeighting.IDENTITY
    combination: Combination = Combination.WEIGHTED_EVIDENCES
    # lower bound on the average divergence before it is inverted
    abjs_floor: float = 1e-9

    def __post_init__(self):
        for name in ("deng_log_base", "bjs_log_base"):
            if not getattr(self, name) > 1:
                raise ValueError(f"{name} must exceed 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.abjs_floor > 0:
            raise ValueError("abjs_floor must be positive")
        object.__setattr__(self, "distance_weighting", EvidenceDistanceWeighting(self.distance_weighting))
        object.__setattr__(self, "combination", Combination(self.combination))


@dataclass(frozen=True)
class Diagnostics:
    """Intermediate quantities; leading axis is the sample, next the ensemble member."""

    abjs: np.ndarray
    center_distances: np.ndarray
    sw: np.ndarray
    sw_loo: np.ndarray
    disagreement: np.ndarray
    support: np.ndarray
    support_norm: np.ndarray
    deng: np.ndarray
    credibility: np.ndarray
    credibility_norm: np.ndarray
    weighted: np.ndarray  # (n, N, F)
    averaged: np.ndarray  # (n, F)

    def sample(self, i: int) -> "Diagnostics":
        return Diagnostics(**{k: getattr(self, k)[i] for k in self.__dataclass_fields__})


def credibility_batch(masses: np.ndarray, cards: np.ndarray, cfg: PipelineConfig, weight=None) -> Diagnostics:
    """All preprocessing steps for masses shaped ``(n_samples, N, F)``."""
    masses = np.asarray(masses, dtype=float)
    n = masses.shape[-2]
    if n < 2:
        raise ValueError("credibility weighting needs at least two bodies of evidence")
    pair = bjs_array(masses[:, :, None, :], masses[:, None, :, :], cfg.bjs_log_base)
    abjs = pair.sum(axis=-1) / (n - 1)
    scat = scatter_array(masses, weight)
    dis = disagreement_from_scatter(scat.sw, scat.sw_loo, cfg.sigma)
    support = 1.0 / (np.maximum(abjs, cfg.abjs_floor) * dis)
    support_norm = support / support.sum(axis=-1, keepdims=True)
    deng = deng_entropy_array(masses, cards, cfg.deng_log_base)
    cred = np.exp(deng) * support_norm
    cred_norm = cred / cred.sum(axis=-1, keepdims=True)
    weighted = cred_norm[..., None] * masses
    return Diagnostics(
        abjs=abjs,
        center_distances=scat.center_distances,
        sw=scat.sw,
        sw_loo=scat.sw_loo,
        disagreement=dis,
        support=support,
        support_norm=support_norm,
        deng=deng,
        credibility=cred,
        credibility_norm=cred_norm,
        weighted=weighted,
        averaged=weighted.sum(axis=-2),
    )


# -- step functions on mass functions ----------------------------------------


def _stack(ms: Sequence[MassFunction]) -> tuple[list[int], np.ndarray]:
    basis = common_basis(ms)
    return basis, np.array([m.vector(basis) for m in ms], dtype=float)


def _diagnose(ms: Sequence[MassFunction], cfg: PipelineConfig) -> tuple[list[int], Diagnostics]:
    if len(ms) < 2:
        raise ValueError("credibility weighting needs at least two bodies of evidence")
    basis, vecs = _stack(ms)
    weight = weighting_matrix(basis, cfg.distance_weighting)
    return basis, credibility_batch(vecs[None], cardinalities(basis), cfg, weight).sample(0)


def average_bjs(ms: Sequence[MassFunction], log_base: float = 2.0) -> np.ndarray:
    """Mean BJS divergence of each body of evidence to all the others."""
    if len(ms) < 2:
        raise ValueError("average divergence needs at least two bodies of evidence")
    _, vecs = _stack(ms)
    pair = bjs_array(vecs[:, None, :], vecs[None, :, :], log_base)
    return pair.sum(axis=1) / (len(ms) - 1)


def support_degree(ms: Sequence[MassFunction], cfg: PipelineConfig = PipelineConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Raw and normalized support ``1 / (aBJS_i * disagreement_i)``."""
    _, d = _diagnose(ms, cfg)
    return d.support, d.support_norm


def credibility_degree(
    ms: Sequence[MassFunction], support_norm: np.ndarray, cfg: PipelineConfig = PipelineConfig()
) -> tuple[np.ndarray, np.ndarray]:
    basis, vecs = _stack(ms)
    support_norm = np.asarray(support_norm, dtype=float)
    if support_norm.shape != (len(ms),):
        raise ValueError("one support value per body of evidence is required")
    cred = np.exp(deng_entropy_array(vecs, cardinalities(basis), cfg.deng_log_base)) * support_norm
    return cred, cred / cred.sum()


def weight_evidences(ms: Sequence[MassFunction], credibility_norm: np.ndarray) -> tuple[list[int], np.ndarray]:
    """Rows ``CD_i * m_i`` over the common focal-set basis (returned alongside)."""
    basis, vecs = _stack(ms)
    credibility_norm = np.asarray(credibility_norm, dtype=float)
    if credibility_norm.shape != (len(ms),):
        raise ValueError("one credibility value per body of evidence is required")
    return basis, credibility_norm[:, None] * vecs


def combine_weighted(rows: Sequence[dict[int, float]]) -> dict[int, float]:
    """Sequential Dempster combination of possibly subnormal mass maps."""
    acc = dict(rows[0])
    for j, row in enumerate(rows[1:], start=1):
        joint, _ = conjunctive_sum(acc, row)
        total = math.fsum(joint.values())
        scale = math.fsum(acc.values()) * math.fsum(row.values())
        if total <= CONFLICT_THRESHOLD * scale:
            raise TotalConflictError(f"total conflict combining weighted evidence {j}", pair=(j - 1, j))
        acc = {k: v / total for k, v in joint.items() if v / total >= PRUNE_THRESHOLD}
    total = math.fsum(acc.values())
    return {k: v / total for k, v in acc.items()}


@dataclass(frozen=True)
class SampleFusion:
    fused: MassFunction
    predicted_class: int
    diagnostics: Diagnostics | None
    basis: list[int] = field(default_factory=list)


def predicted_singleton(m: MassFunction) -> int:
    """Index of the frame element whose singleton carries the most mass (lowest index on ties)."""
    masses = [m[1 << k] for k in range(len(m.frame))]
    return int(np.argmax(masses))


def fuse(ms: Sequence[MassFunction], cfg: PipelineConfig = PipelineConfig()) -> SampleFusion:
    """Fuse the evidences of one sample."""
    if not ms:
        raise ValueError("nothing to fuse")
    if len(ms) == 1:
        return SampleFusion(ms[0], predicted_singleton(ms[0]), None, list(ms[0].focal_sets()))
    basis, diag = _diagnose(ms, cfg)
    frame = ms[0].frame
    if cfg.combination is Combination.WEIGHTED_AVERAGE:
        averaged = MassFunction.from_vector(frame, basis, diag.averaged)
        fused = combine_many([averaged] * len(ms))
    else:
        rows = [{b: v for b, v in zip(basis, row) if v > 0} for row in diag.weighted]
        fused = MassFunction(frame, combine_weighted(rows))
    return SampleFusion(fused, predicted_singleton(fused), diag, basis)


# -- batched path for singleton + ignorance evidence -------------------------


def _conj_singletons(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalized Dempster step for rows (singletons..., whole frame); also flags total conflict."""
    single = a[:, :-1] * b[:, :-1] + a[:, :-1] * b[:, -1:] + a[:, -1:] * b[:, :-1]
    out = np.column_stack([single, a[:, -1] * b[:, -1]])
    total = out.sum(axis=1)
    scale = a.sum(axis=1) * b.sum(axis=1)
    conflicted = total <= CONFLICT_THRESHOLD * scale
    safe = np.where(conflicted, 1.0, total)
    out = out / safe[:, None]
    out[out < PRUNE_THRESHOLD] = 0.0
    out = out / np.where(conflicted, 1.0, out.sum(axis=1))[:, None]
    return out, conflicted


@dataclass(frozen=True, eq=False)
class FusionResult:
    """
    Fused masses for a dataset: shape ``(n_samples, n_classes + 1)`` with the
    ignorance mass last. Rows where the combination hit total conflict are NaN
    and have predicted class -1 (only when fusing with ``on_conflict="mark"``).
    """

    fused: np.ndarray
    predicted_class: np.ndarray
    conflicted: np.ndarray
    diagnostics: Diagnostics | None = None

    @property
    def n_conflicted(self) -> int:
        return int(self.conflicted.sum())


def fuse_dataset(
    boes: Sequence[BodyOfEvidence],
    cfg: PipelineConfig = PipelineConfig(),
    on_conflict: str = "raise",
    keep_diagnostics: bool = True,
) -> FusionResult:
    """Fuse several bodies of evidence sample by sample."""
    if on_conflict not in ("raise", "mark"):
        raise ValueError("on_conflict must be 'raise' or 'mark'")
    if not boes:
        raise ValueError("nothing to fuse")
    n_samples, n_cols = boes[0].masses.shape
    for b in boes[1:]:
        if b.masses.shape != (n_samples, n_cols):
            raise ValueError(
                f"bodies of evidence disagree in shape: {b.masses.shape} vs {(n_samples, n_cols)}"
            )
    if len(boes) == 1:
        fused = boes[0].masses.copy()
        return FusionResult(fused, boes[0].predictions(), np.zeros(n_samples, dtype=bool))

    masses = np.stack([b.masses for b in boes], axis=1)
    basis = boes[0].basis()
    weight = weighting_matrix(basis, cfg.distance_weighting)
    diag = credibility_batch(masses, cardinalities(basis), cfg, weight)

    conflicted = np.zeros(n_samples, dtype=bool)
    if cfg.combination is Combination.WEIGHTED_AVERAGE:
        base = diag.averaged / diag.averaged.sum(axis=1, keepdims=True)
        steps = [base] * len(boes)
    else:
        steps = [diag.weighted[:, i, :] for i in range(len(boes))]
    acc = steps[0] / steps[0].sum(axis=1, keepdims=True)
    for j, nxt in enumerate(steps[1:], start=1):
        acc, hit = _conj_singletons(acc, nxt)
        if hit.any() and on_conflict == "raise":
            i = int(np.flatnonzero(hit)[0])
            raise TotalConflictError(f"total conflict at sample {i}, evidence {j}", pair=(j - 1, j))
        conflicted |= hit
    acc[conflicted] = np.nan
    predicted = np.full(n_samples, -1, dtype=np.int64)
    ok = ~conflicted
    predicted[ok] = np.argmax(acc[ok, :-1], axis=1)
    return FusionResult(acc, predicted, conflicted, diag if keep_diagnostics else None)
