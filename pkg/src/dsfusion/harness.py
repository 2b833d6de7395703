"""
Experiment protocol: stratified train/validation/test splits, exhaustive
ensemble enumeration, validation-based choice of the weighting scheme,
accuracy/specificity bookkeeping, repetitions and feature-noise sweeps.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .classifiers import DEFAULT_POOL, ClassifierSpec, Dataset, confusion, score, train
from .evidence import (
    ALL_SCHEMES,
    BodyOfEvidence,
    ConfusionMatrix,
    ScoreMatrix,
    WeightScheme,
    build_boe,
    build_weight,
)
from .fusion import PipelineConfig, fuse_dataset

log = logging.getLogger(__name__)

MAX_POOL = 20
ROUND_DIGITS = 9

# stream identifiers for seed derivation
_SPLIT_STREAM = 0
_NOISE_STREAM = 1


def derive_rng(root_seed: int, *counters: int) -> np.random.Generator:
    """Independent generator for a (root seed, counter...) tuple."""
    return np.random.default_rng(np.random.SeedSequence(entropy=root_seed, spawn_key=tuple(counters)))


# -- splits ------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.50
    valid_frac: float = 0.15
    test_frac: float = 0.35
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.valid_frac, self.test_frac)
        if any(f <= 0 for f in fracs) or not math.isclose(sum(fracs), 1.0, abs_tol=1e-9):
            raise ValueError(f"split fractions must be positive and sum to 1, got {fracs}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_indices(labels: np.ndarray, spec: SplitSpec, rng: np.random.Generator | None = None):
    """Per-class shuffled index partition into train / validation / test."""
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    labels = np.asarray(labels)
    parts: tuple[list, list, list] = ([], [], [])
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        n = len(idx)
        if n < 3:
            raise ValueError(f"class {c} has {n} samples; at least 3 are needed for a three-way split")
        idx = idx[rng.permutation(n)]
        n_train = max(1, _round_half_up(spec.train_frac * n))
        n_valid = max(1, _round_half_up(spec.valid_frac * n))
        while n_train + n_valid > n - 1:
            if n_train >= n_valid and n_train > 1:
                n_train -= 1
            else:
                n_valid -= 1
        parts[0].append(idx[:n_train])
        parts[1].append(idx[n_train : n_train + n_valid])
        parts[2].append(idx[n_train + n_valid :])
    return tuple(np.sort(np.concatenate(p)) for p in parts)


def stratified_split(ds: Dataset, spec: SplitSpec = SplitSpec(), rng: np.random.Generator | None = None):
    tr, va, te = split_indices(ds.labels, spec, rng)
    return ds.subset(tr, f"{ds.name}/train"), ds.subset(va, f"{ds.name}/valid"), ds.subset(te, f"{ds.name}/test")


# -- ensembles ---------------------------------------------------------------


@dataclass(frozen=True, order=True)
class EnsembleId:
    members: tuple[int, ...]

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        if not members:
            raise ValueError("an ensemble needs at least one member")
        if any(b <= a for a, b in zip(members, members[1:])) or members[0] < 0:
            raise ValueError(f"members must be strictly increasing non-negative indices: {members}")
        object.__setattr__(self, "members", members)

    @property
    def size(self) -> int:
        return len(self.members)

    def label(self) -> str:
        return "+".join(str(m + 1) for m in self.members)

    @classmethod
    def parse(cls, text: str) -> "EnsembleId":
        return cls(tuple(int(t) - 1 for t in text.split("+")))


def enumerate_ensembles(pool_size: int, max_size: int | None = None) -> list[EnsembleId]:
    """All non-empty subsets of the pool, grouped by size, lexicographic within a size."""
    if pool_size < 1:
        raise ValueError("pool must contain at least one classifier")
    if pool_size > MAX_POOL:
        raise ValueError(f"refusing to enumerate 2^{pool_size} ensembles (limit {MAX_POOL} classifiers)")
    top = pool_size if max_size is None else min(max_size, pool_size)
    return [EnsembleId(c) for size in range(1, top + 1) for c in itertools.combinations(range(pool_size), size)]


# -- noise -------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    rms_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.rms_fraction >= 0:
            raise ValueError("rms_fraction must be non-negative")


def add_rms_noise(ds: Dataset, spec: NoiseSpec, rng: np.random.Generator | None = None) -> Dataset:
    """Add zero-mean Gaussian noise with std ``rms_fraction * RMS(column)`` to each feature."""
    if spec.rms_fraction == 0:
        return ds
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    x = ds.features
    rms = np.sqrt((x * x).mean(axis=0))
    noise = rng.standard_normal(x.shape) * (spec.rms_fraction * rms)[None, :]
    return ds.with_features(x + noise)


# -- evaluation --------------------------------------------------------------


def accuracy_of(predicted: np.ndarray, truth: np.ndarray) -> float:
    return float(np.mean(np.asarray(predicted) == np.asarray(truth)))


def specificity_of(predicted: np.ndarray, truth: np.ndarray, defect_class: int) -> float:
    """Column-convention precision of the defect class: detected defects over true defects."""
    truth = np.asarray(truth)
    is_defect = truth == defect_class
    if not is_defect.any():
        return math.nan
    return float(np.sum((np.asarray(predicted) == defect_class) & is_defect) / is_defect.sum())


@dataclass(frozen=True, eq=False)
class MemberOutputs:
    """What the harness needs from one trained classifier."""

    name: str
    train_confusion: ConfusionMatrix
    valid_scores: ScoreMatrix
    test_scores: ScoreMatrix


@dataclass(eq=False)
class EvaluationData:
    members: list[MemberOutputs]
    y_valid: np.ndarray
    y_test: np.ndarray
    defect_class: int
    _boes: dict = field(default_factory=dict, repr=False)

    @property
    def n_valid(self) -> int:
        return len(self.y_valid)

    def boe(self, member: int, scheme: WeightScheme) -> BodyOfEvidence:
        """Validation and test evidence stacked row-wise, cached per (member, scheme)."""
        key = (member, scheme)
        if key not in self._boes:
            m = self.members[member]
            w = build_weight(scheme, m.train_confusion)
            both = ScoreMatrix(np.vstack([m.valid_scores.scores, m.test_scores.scores]), m.name)
            self._boes[key] = build_boe(both, w)
        return self._boes[key]


@dataclass(frozen=True)
class EnsembleScore:
    valid_acc: float
    test_acc: float
    test_spc: float
    n_conflicted: int = 0
    failed: bool = False


def evaluate_ensemble(
    ens: EnsembleId, scheme: WeightScheme | str, data: EvaluationData, cfg: PipelineConfig = PipelineConfig()
) -> EnsembleScore:
    """Validation accuracy, test accuracy and test specificity of one fused ensemble.

    Single-member ensembles are scored on the classifier's raw argmax. Samples
    whose evidence is in total conflict count as misclassified; any other
    fusion failure yields a failed (NaN) score instead of an exception.
    """
    scheme = WeightScheme(scheme)
    nv = data.n_valid
    if ens.size == 1:
        m = data.members[ens.members[0]]
        pv, pt = m.valid_scores.predictions(), m.test_scores.predictions()
        conflicted = 0
    else:
        try:
            res = fuse_dataset(
                [data.boe(i, scheme) for i in ens.members], cfg, on_conflict="mark", keep_diagnostics=False
            )
        except (ValueError, ArithmeticError) as exc:
            log.warning("ensemble %s / %s failed: %s", ens.label(), scheme.value, exc)
            return EnsembleScore(math.nan, math.nan, math.nan, 0, True)
        pv, pt = res.predicted_class[:nv], res.predicted_class[nv:]
        conflicted = res.n_conflicted
    return EnsembleScore(
        accuracy_of(pv, data.y_valid),
        accuracy_of(pt, data.y_test),
        specificity_of(pt, data.y_test, data.defect_class),
        conflicted,
    )


def select_best_scheme(valid_acc: Mapping[WeightScheme | str, float]) -> WeightScheme:
    """Scheme with the highest validation accuracy; ties go to the lowest scheme index."""
    accs = {WeightScheme(s): a for s, a in valid_acc.items()}
    best, best_acc = None, math.nan
    for scheme in sorted(accs, key=lambda s: s.index):
        acc = accs[scheme]
        if math.isnan(acc):
            continue
        if best is None or round(acc, ROUND_DIGITS) > round(best_acc, ROUND_DIGITS):
            best, best_acc = scheme, acc
    if best is None:
        raise ValueError("no scheme has a valid accuracy")
    return best


def prepare_members(
    specs: Sequence[ClassifierSpec],
    train_ds: Dataset,
    valid_ds: Dataset,
    test_ds: Dataset,
    fit_ds: Dataset | None = None,
) -> list[MemberOutputs]:
    """Train each spec and collect the training confusion plus validation/test scores.

    ``fit_ds`` (default ``train_ds``) is what the classifiers are fitted on;
    the confusion matrix is always computed on ``train_ds``.
    """
    fit_ds = fit_ds if fit_ds is not None else train_ds
    out = []
    for spec in specs:
        clf = train(spec, fit_ds)
        out.append(MemberOutputs(clf.name, confusion(clf, train_ds), score(clf, valid_ds), score(clf, test_ds)))
    return out


# -- experiment --------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    pool: tuple[ClassifierSpec, ...] = DEFAULT_POOL
    schemes: tuple[WeightScheme, ...] = ALL_SCHEMES
    repetitions: int = 1
    noise_levels: tuple[float, ...] = (0.0,)
    max_ensemble_size: int | None = None
    split: SplitSpec = SplitSpec()
    root_seed: int = 0
    rescore_only: bool = False
    defect_class: int | None = None
    pipeline: PipelineConfig = PipelineConfig()
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "pool", tuple(self.pool))
        object.__setattr__(self, "schemes", tuple(WeightScheme(s) for s in self.schemes))
        object.__setattr__(self, "noise_levels", tuple(float(x) for x in self.noise_levels))
        if not self.pool:
            raise ValueError("the classifier pool is empty")
        if not self.schemes:
            raise ValueError("no weighting schemes selected")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if any(x < 0 for x in self.noise_levels) or not self.noise_levels:
            raise ValueError("noise levels must be non-negative")


@dataclass(frozen=True)
class CellRecord:
    """One (repetition, noise level, ensemble, scheme) evaluation.

    ``scheme`` is ``"best"`` for the validation-selected row, whose
    ``selected`` field names the chosen scheme.
    """

    repetition: int
    noise: float
    ensemble: str
    size: int
    scheme: str
    valid_acc: float
    test_acc: float
    test_spc: float
    n_conflicted: int
    failed: bool
    selected: str = ""

    FIELDS = (
        "repetition",
        "noise",
        "ensemble",
        "size",
        "scheme",
        "valid_acc",
        "test_acc",
        "test_spc",
        "n_conflicted",
        "failed",
        "selected",
    )


def default_defect_class(ds: Dataset) -> int:
    """Minority class (lowest index among equally small classes)."""
    counts = ds.class_counts()
    return int(np.argmin(np.where(counts > 0, counts, np.iinfo(np.int64).max)))


def evaluate_all(
    data: EvaluationData,
    ensembles: Sequence[EnsembleId],
    schemes: Sequence[WeightScheme],
    cfg: PipelineConfig,
    repetition: int = 0,
    noise: float = 0.0,
) -> list[CellRecord]:
    rows: list[CellRecord] = []
    for ens in ensembles:
        scores = {s: evaluate_ensemble(ens, s, data, cfg) for s in schemes}
        for s, r in scores.items():
            rows.append(
                CellRecord(repetition, noise, ens.label(), ens.size, s.value, r.valid_acc, r.test_acc, r.test_spc, r.n_conflicted, r.failed)
            )
        try:
            best = select_best_scheme({s: r.valid_acc for s, r in scores.items()})
        except ValueError:
            rows.append(CellRecord(repetition, noise, ens.label(), ens.size, "best", math.nan, math.nan, math.nan, 0, True))
            continue
        r = scores[best]
        rows.append(
            CellRecord(repetition, noise, ens.label(), ens.size, "best", r.valid_acc, r.test_acc, r.test_spc, r.n_conflicted, r.failed, best.value)
        )
    return rows


def run_repetition(ds: Dataset, config: ExperimentConfig, repetition: int) -> tuple[list[CellRecord], list[str]]:
    """All noise levels of one repetition. The split is shared across noise levels."""
    defect = config.defect_class if config.defect_class is not None else default_defect_class(ds)
    split_rng = derive_rng(config.root_seed, repetition, _SPLIT_STREAM)
    idx = split_indices(ds.labels, config.split, split_rng)
    ensembles = enumerate_ensembles(len(config.pool), config.max_ensemble_size)
    rows: list[CellRecord] = []
    names: list[str] = []
    for level_no, level in enumerate(config.noise_levels):
        noise_rng = derive_rng(config.root_seed, repetition, _NOISE_STREAM, level_no)
        noisy = add_rms_noise(ds, NoiseSpec(level), noise_rng)
        tr, va, te = (noisy.subset(i) for i in idx)
        fit = ds.subset(idx[0]) if config.rescore_only else None
        members = prepare_members(config.pool, tr, va, te, fit_ds=fit)
        names = [m.name for m in members]
        data = EvaluationData(members, va.labels, te.labels, defect)
        rows.extend(evaluate_all(data, ensembles, config.schemes, config.pipeline, repetition, level))
    return rows, names


def _run_repetition_task(args):
    return run_repetition(*args)


def run_statistical(ds: Dataset, config: ExperimentConfig = ExperimentConfig()) -> "ExperimentReport":
    """Repeat split / train / enumerate / fuse for every repetition and noise level."""
    tasks = [(ds, config, r) for r in range(config.repetitions)]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_repetition_task, tasks))
    else:
        results = [_run_repetition_task(t) for t in tasks]
    cells = [row for rows, _ in results for row in rows]
    names = results[0][1]
    return ExperimentReport(cells, names, ds.name)


def run_external(data: EvaluationData, config: ExperimentConfig = ExperimentConfig(), name: str = "external") -> "ExperimentReport":
    """Evaluate every ensemble once from precomputed classifier outputs (no retraining or noise)."""
    ensembles = enumerate_ensembles(len(data.members), config.max_ensemble_size)
    cells = evaluate_all(data, ensembles, config.schemes, config.pipeline)
    return ExperimentReport(cells, [m.name for m in data.members], name)


# -- report ------------------------------------------------------------------


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    vals = np.array([v for v in values if not math.isnan(v)], dtype=float)
    if len(vals) == 0:
        return math.nan, math.nan
    return float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else 0.0


def count_occurrences(values: Sequence[float]) -> tuple[float, int]:
    """Maximum of ``values`` and how many entries attain it (after rounding to 9 decimals)."""
    vals = [round(v, ROUND_DIGITS) for v in values if not math.isnan(v)]
    if not vals:
        return math.nan, 0
    top = max(vals)
    return top, sum(1 for v in vals if v == top)


@dataclass
class ExperimentReport:
    cells: list[CellRecord]
    classifier_names: list[str] = field(default_factory=list)
    dataset: str = ""

    def _group(self, *keys: str) -> dict[tuple, list[CellRecord]]:
        groups: dict[tuple, list[CellRecord]] = defaultdict(list)
        for c in self.cells:
            groups[tuple(getattr(c, k) for k in keys)].append(c)
        return dict(sorted(groups.items(), key=lambda kv: kv[0]))

    def schemes(self) -> list[str]:
        seen = []
        for c in self.cells:
            if c.scheme not in seen:
                seen.append(c.scheme)
        return seen

    def max_accuracy(self) -> list[dict]:
        """Maximum test accuracy over all ensembles and its number of occurrences."""
        out = []
        for (rep, noise, scheme), cells in self._group("repetition", "noise", "scheme").items():
            top, no = count_occurrences([c.test_acc for c in cells])
            out.append({"repetition": rep, "noise": noise, "scheme": scheme, "max_acc": top, "NO": no})
        return out

    def size_stats(self) -> list[dict]:
        """Mean and std of test accuracy/specificity over ensembles of the same size."""
        out = []
        for (rep, noise, scheme, size), cells in self._group("repetition", "noise", "scheme", "size").items():
            acc_m, acc_s = _mean_std([c.test_acc for c in cells])
            spc_m, spc_s = _mean_std([c.test_spc for c in cells])
            out.append(
                {"repetition": rep, "noise": noise, "scheme": scheme, "size": size,
                 "acc_mean": acc_m, "acc_std": acc_s, "spc_mean": spc_m, "spc_std": spc_s, "count": len(cells)}
            )
        return out

    @staticmethod
    def _best_cell(cells: Sequence[CellRecord]) -> CellRecord | None:
        """Most accurate cell; among ties the one with the highest specificity."""
        ok = [c for c in cells if not math.isnan(c.test_acc)]
        if not ok:
            return None
        top = max(round(c.test_acc, ROUND_DIGITS) for c in ok)
        tied = [c for c in ok if round(c.test_acc, ROUND_DIGITS) == top]
        return max(tied, key=lambda c: -1.0 if math.isnan(c.test_spc) else c.test_spc)

    def best_per_size(self) -> list[dict]:
        """Best model per (repetition, noise, scheme, size)."""
        out = []
        for (rep, noise, scheme, size), cells in self._group("repetition", "noise", "scheme", "size").items():
            best = self._best_cell(cells)
            out.append(
                {"repetition": rep, "noise": noise, "scheme": scheme, "size": size,
                 "ensemble": best.ensemble if best else "",
                 "test_acc": best.test_acc if best else math.nan,
                 "test_spc": best.test_spc if best else math.nan}
            )
        return out

    def best_per_size_stats(self) -> list[dict]:
        """Best-model accuracy per size, summarized over repetitions."""
        groups: dict[tuple, list[dict]] = defaultdict(list)
        for row in self.best_per_size():
            groups[(row["noise"], row["scheme"], row["size"])].append(row)
        out = []
        for (noise, scheme, size), rows in sorted(groups.items()):
            acc_m, acc_s = _mean_std([r["test_acc"] for r in rows])
            spc_m, spc_s = _mean_std([r["test_spc"] for r in rows])
            out.append({"noise": noise, "scheme": scheme, "size": size, "acc_mean": acc_m, "acc_std": acc_s,
                        "spc_mean": spc_m, "spc_std": spc_s, "repetitions": len(rows)})
        return out

    def overall_best(self) -> list[dict]:
        """Most accurate fused model per repetition regardless of size (sizes >= 2)."""
        out = []
        fused = [c for c in self.cells if c.size >= 2]
        groups: dict[tuple, list[CellRecord]] = defaultdict(list)
        for c in fused:
            groups[(c.repetition, c.noise, c.scheme)].append(c)
        for (rep, noise, scheme), cells in sorted(groups.items()):
            best = self._best_cell(cells)
            out.append({"repetition": rep, "noise": noise, "scheme": scheme,
                        "ensemble": best.ensemble if best else "",
                        "test_acc": best.test_acc if best else math.nan})
        return out

    def overall_best_ranges(self) -> list[dict]:
        """Range and mean over repetitions of the overall best fused model, plus the individual models."""
        groups: dict[tuple, list[float]] = defaultdict(list)
        for row in self.overall_best():
            groups[(row["noise"], row["scheme"])].append(row["test_acc"])
        for c in self.cells:
            if c.size == 1 and c.scheme == "best":
                groups[(c.noise, "individual")].append(c.test_acc)
        out = []
        for (noise, scheme), vals in sorted(groups.items()):
            mean, std = _mean_std(vals)
            clean = [v for v in vals if not math.isnan(v)]
            out.append({"noise": noise, "scheme": scheme, "min": min(clean) if clean else math.nan,
                        "max": max(clean) if clean else math.nan, "mean": mean, "std": std, "count": len(vals)})
        return out

    def summary(self) -> dict:
        return {
            "dataset": self.dataset,
            "classifiers": list(self.classifier_names),
            "n_cells": len(self.cells),
            "max_accuracy": self.max_accuracy(),
            "size_stats": self.size_stats(),
            "best_per_size": self.best_per_size_stats(),
            "overall_best": self.overall_best_ranges(),
        }
