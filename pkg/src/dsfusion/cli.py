"""Command-line interface: ``dsfusion {fuse,benchmark,selftest,gen-synthetic}``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .classifiers import DEFAULT_POOL, ClassifierSpec
from .core import TotalConflictError
from .evidence import ALL_SCHEMES, WeightScheme, build_boes
from .fusion import Combination, PipelineConfig, fuse_dataset
from .harness import ExperimentConfig, SplitSpec, run_external, run_statistical
from .io import CsvFormatError, read_confusion, read_external, read_dataset, read_scores, write_dataset, write_diagnostics, write_fused, write_report
from .metrics import EvidenceDistanceWeighting
from .selftest import run_selftest
from .synthetic import make_two_blobs

log = logging.getLogger("dsfusion")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_TOLERANCE = 2


class UsageError(Exception):
    pass


def read_config_file(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, config: dict[str, str]) -> None:
    actions = {a.dest: a for a in parser._actions}
    for key, value in config.items():
        action = actions.get(key)
        if action is None or key in ("help", "config", "command"):
            raise UsageError(f"unknown configuration key {key!r}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            setattr(args, key, _parse_bool(value))
        elif action.type is not None:
            setattr(args, key, action.type(value))
        else:
            setattr(args, key, value)


def _add_pipeline_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("fusion pipeline")
    g.add_argument("--deng-base", type=float, default=10.0, help="log base of the Deng entropy (default 10)")
    g.add_argument("--bjs-base", type=float, default=2.0, help="log base of the BJS divergence (default 2)")
    g.add_argument("--sigma", type=float, default=2.0, help="disagreement gain (default 2)")
    g.add_argument("--distance", choices=[w.value for w in EvidenceDistanceWeighting], default="identity")
    g.add_argument("--combination", choices=[c.value for c in Combination], default=Combination.WEIGHTED_EVIDENCES.value)


def _pipeline(args) -> PipelineConfig:
    try:
        return PipelineConfig(args.deng_base, args.bjs_base, args.sigma, args.distance, args.combination)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsfusion", description="Dempster-Shafer multi-classifier fusion")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="fuse score-matrix CSV files")
    p.add_argument("scores", nargs="+", help="score CSV per classifier")
    p.add_argument("--confusion", nargs="*", default=[], help="confusion CSV per classifier (schemes w1-w5)")
    p.add_argument("--scheme", choices=[s.value for s in ALL_SCHEMES], default="w0")
    p.add_argument("--out", default="fused.csv")
    p.add_argument("--diagnostics", default=None, help="optional per-sample diagnostics CSV")
    p.add_argument("--config", default=None)
    _add_pipeline_options(p)

    p = sub.add_parser("benchmark", help="run the ensemble enumeration / repetition / noise protocol")
    p.add_argument("--dataset", default=None, help="comma-separated dataset CSV paths")
    p.add_argument("--synthetic", action="store_true", help="use the built-in two-blob dataset")
    p.add_argument("--external", default=None, help="directory of precomputed classifier outputs (see README)")
    p.add_argument("--pool", default=",".join(_spec_text(s) for s in DEFAULT_POOL),
                   help="comma-separated classifier specs, e.g. knn:5,knn:7,centroid,logistic:1.0")
    p.add_argument("--schemes", default=",".join(s.value for s in ALL_SCHEMES))
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--noise", default="0", help="comma-separated RMS noise fractions")
    p.add_argument("--max-size", type=int, default=None, help="largest ensemble size to enumerate")
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--defect-class", type=int, default=None, help="class index for specificity (default: minority)")
    p.add_argument("--rescore-only", action="store_true", help="train on clean features, score noisy ones")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="report")
    p.add_argument("--config", default=None)
    _add_pipeline_options(p)

    p = sub.add_parser("selftest", help="reproduce the four-classifier worked example step by step")
    p.add_argument("--config", default=None)
    _add_pipeline_options(p)

    p = sub.add_parser("gen-synthetic", help="write the two-blob dataset CSV")
    p.add_argument("--out", default="two_blobs.csv")
    p.add_argument("--samples", type=int, default=300)
    p.add_argument("--features", type=int, default=4)
    p.add_argument("--separation", type=float, default=2.5)
    p.add_argument("--imbalance", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None)
    return parser


def _spec_text(spec: ClassifierSpec) -> str:
    if spec.kind.value == "knn":
        return f"knn:{spec.k}"
    if spec.kind.value == "nearest_centroid":
        return "centroid"
    return f"logistic:{spec.ridge:g}"


def cmd_fuse(args) -> int:
    cfg = _pipeline(args)
    loaded = [read_scores(p) for p in args.scores]
    first, ids, classes = loaded[0]
    for path, (s, other_ids, other_classes) in zip(args.scores[1:], loaded[1:]):
        if s.n_classes != first.n_classes or other_classes != classes:
            raise UsageError(f"{path}: classes {other_classes} differ from {classes}")
        if s.n_samples != first.n_samples:
            raise UsageError(f"{path}: {s.n_samples} samples, expected {first.n_samples}")
        if other_ids != ids:
            raise UsageError(f"{path}: sample ids differ from {args.scores[0]}")
    if args.confusion and len(args.confusion) != len(args.scores):
        raise UsageError(f"{len(args.confusion)} confusion files for {len(args.scores)} score files")
    confusions = [read_confusion(p) for p in args.confusion] or [None] * len(loaded)
    for path, cm in zip(args.confusion, confusions):
        if cm.n_classes != first.n_classes:
            raise UsageError(f"{path}: {cm.n_classes} classes, expected {first.n_classes}")
    try:
        boes = build_boes([s for s, _, _ in loaded], confusions, args.scheme)
    except (ValueError, TotalConflictError) as exc:
        raise UsageError(str(exc)) from exc
    result = fuse_dataset(boes, cfg, on_conflict="mark")
    if result.n_conflicted:
        print(f"warning: {result.n_conflicted} samples in total conflict; their rows are left empty", file=sys.stderr)
    write_fused(args.out, result, classes, ids)
    if args.diagnostics:
        write_diagnostics(args.diagnostics, result, ids, [s.classifier_id for s, _, _ in loaded])
    print(f"fused {first.n_samples} samples from {len(loaded)} classifiers -> {args.out}")
    return EXIT_OK


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def cmd_benchmark(args) -> int:
    cfg = _pipeline(args)
    try:
        pool = tuple(ClassifierSpec.parse(t) for t in args.pool.split(",") if t.strip())
        schemes = tuple(WeightScheme(t.strip()) for t in args.schemes.split(",") if t.strip())
        config = ExperimentConfig(
            pool=pool,
            schemes=schemes,
            repetitions=args.repetitions,
            noise_levels=_floats(args.noise),
            max_ensemble_size=args.max_size,
            split=SplitSpec(),
            root_seed=args.seed,
            rescore_only=args.rescore_only,
            defect_class=args.defect_class,
            pipeline=cfg,
            workers=args.workers,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sources = [p for p in (args.dataset or "").split(",") if p.strip()]
    if args.synthetic:
        sources.append(None)
    if not sources and not args.external:
        raise UsageError("give --dataset, --synthetic and/or --external")
    status = EXIT_OK
    if args.external:
        data, _ = read_external(args.external, args.defect_class)
        report = run_external(data, config, Path(args.external).name)
        paths = write_report(Path(args.out) / report.dataset, report)
        _print_report(report, paths)
    for src in sources:
        try:
            ds = make_two_blobs(seed=args.seed) if src is None else read_dataset(src.strip())
        except (OSError, ValueError) as exc:
            print(f"error: cannot load {src}: {exc}", file=sys.stderr)
            status = EXIT_INVALID
            continue
        start = time.perf_counter()
        report = run_statistical(ds, config)
        paths = write_report(Path(args.out) / ds.name, report)
        _print_report(report, paths, time.perf_counter() - start)
    return status


def _print_report(report, paths, seconds: float | None = None) -> None:
    took = f" in {seconds:.1f}s" if seconds is not None else ""
    print(f"{report.dataset}: {len(report.cells)} cells{took} -> {paths['cells'].parent}")
    for row in report.max_accuracy():
        if row["repetition"] == 0:
            print(f"  noise={row['noise']:g} {row['scheme']:>4}: max acc {row['max_acc']:.4f}  NO {row['NO']}")


def cmd_selftest(args) -> int:
    result = run_selftest(_pipeline(args))
    print(result.table())
    if result.passed:
        print("PASS: all steps of the worked example reproduced")
        return EXIT_OK
    bad = result.first_failure
    print(f"FAIL at step {bad.step}: {bad.quantity} off by {bad.max_error:.5f} (tolerance {bad.tolerance:g})")
    return EXIT_TOLERANCE


def cmd_gen_synthetic(args) -> int:
    try:
        ds = make_two_blobs(args.samples, args.features, args.separation, args.imbalance, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_dataset(args.out, ds)
    print(f"wrote {ds.n_samples} samples ({ds.n_features} features, IR {ds.imbalance_ratio:.2f}) -> {args.out}")
    return EXIT_OK


COMMANDS = {"fuse": cmd_fuse, "benchmark": cmd_benchmark, "selftest": cmd_selftest, "gen-synthetic": cmd_gen_synthetic}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "config", None):
            subparser = parser._subparsers._group_actions[0].choices[args.command]
            apply_config(subparser, args, read_config_file(args.config))
        return COMMANDS[args.command](args)
    except (UsageError, CsvFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
