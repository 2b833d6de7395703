"""
CSV formats.

Score matrix::

    sample_id,score_<class0>,score_<class1>,...

Confusion matrix: ``n_classes`` rows of ``n_classes`` integers, rows are
predicted classes and columns true classes. Lines starting with ``#`` are
ignored.

Dataset: any number of numeric feature columns followed by a final ``label``
column; labels are mapped to class indices in order of first appearance.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import astuple
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifiers import Dataset
from .evidence import ConfusionMatrix, ScoreMatrix
from .fusion import FusionResult
from .harness import CellRecord, EvaluationData, ExperimentReport, MemberOutputs


class CsvFormatError(ValueError):
    def __init__(self, path, row: int | None, column: int | str | None, message: str):
        where = f"{path}"
        if row is not None:
            where += f", row {row}"
        if column is not None:
            where += f", column {column}"
        super().__init__(f"{where}: {message}")
        self.path, self.row, self.column = path, row, column


def fmt(x) -> str:
    """Shortest round-tripping text for numbers; NaN becomes ``nan``."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return "nan" if math.isnan(x) else repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def _read_rows(path) -> list[list[str]]:
    try:
        with open(path, newline="") as fh:
            return [row for row in csv.reader(fh) if row and not row[0].lstrip().startswith("#")]
    except OSError as exc:
        raise CsvFormatError(path, None, None, str(exc)) from exc


def _float(path, r: int, c, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CsvFormatError(path, r, c, f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise CsvFormatError(path, r, c, f"non-finite value {text!r}")
    return value


# -- score matrices ----------------------------------------------------------


def read_scores(path) -> tuple[ScoreMatrix, list[str], list[str]]:
    """Returns (scores, sample ids, class names)."""
    rows = _read_rows(path)
    if not rows:
        raise CsvFormatError(path, 1, None, "empty file")
    header = [h.strip() for h in rows[0]]
    if header[0] != "sample_id" or len(header) < 3 or not all(h.startswith("score_") for h in header[1:]):
        raise CsvFormatError(path, 1, None, "header must be sample_id,score_<class>,... with at least two classes")
    classes = [h[len("score_"):] for h in header[1:]]
    ids, values = [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise CsvFormatError(path, r, None, f"expected {len(header)} fields, got {len(row)}")
        ids.append(row[0].strip())
        values.append([_float(path, r, header[c], row[c]) for c in range(1, len(header))])
    if not values:
        raise CsvFormatError(path, 2, None, "no samples")
    name = Path(path).stem
    return ScoreMatrix(np.array(values), name), ids, classes


def write_scores(path, scores: np.ndarray, classes: Sequence[str], ids: Sequence[str] | None = None) -> None:
    scores = np.asarray(scores, dtype=float)
    ids = ids if ids is not None else [str(i) for i in range(len(scores))]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", *(f"score_{c}" for c in classes)])
        for i, row in zip(ids, scores):
            w.writerow([i, *(fmt(v) for v in row)])


# -- confusion matrices ------------------------------------------------------


def read_confusion(path) -> ConfusionMatrix:
    rows = _read_rows(path)
    n = len(rows)
    counts = []
    for r, row in enumerate(rows, start=1):
        if len(row) != n:
            raise CsvFormatError(path, r, None, f"expected {n} columns for a {n}x{n} matrix, got {len(row)}")
        vals = []
        for c, text in enumerate(row, start=1):
            v = _float(path, r, c, text)
            if v < 0 or v != int(v):
                raise CsvFormatError(path, r, c, f"counts must be non-negative integers, got {text!r}")
            vals.append(int(v))
        counts.append(vals)
    try:
        return ConfusionMatrix(counts)
    except ValueError as exc:
        raise CsvFormatError(path, None, None, str(exc)) from exc


def write_confusion(path, cm: ConfusionMatrix) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in cm.counts:
            w.writerow([int(v) for v in row])


# -- datasets ----------------------------------------------------------------


def read_dataset(path, name: str | None = None) -> Dataset:
    rows = _read_rows(path)
    if not rows:
        raise CsvFormatError(path, 1, None, "empty file")
    header = [h.strip() for h in rows[0]]
    if header[-1] != "label" or len(header) < 2:
        raise CsvFormatError(path, 1, len(header), "last column must be 'label' after at least one feature")
    classes: dict[str, int] = {}
    feats, labels = [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise CsvFormatError(path, r, None, f"expected {len(header)} fields, got {len(row)}")
        feats.append([_float(path, r, header[c], row[c]) for c in range(len(header) - 1)])
        labels.append(classes.setdefault(row[-1].strip(), len(classes)))
    if not feats:
        raise CsvFormatError(path, 2, None, "no samples")
    return Dataset(np.array(feats), np.array(labels), name or Path(path).stem, tuple(classes))


def write_dataset(path, ds: Dataset, feature_names: Sequence[str] | None = None) -> None:
    names = feature_names or [f"f{j + 1}" for j in range(ds.n_features)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "label"])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([*(fmt(v) for v in x), ds.class_names[y]])


# -- precomputed classifier outputs -----------------------------------------


def read_external(directory, defect_class: int | None = None) -> tuple[EvaluationData, list[str]]:
    """Load precomputed outputs for the benchmark.

    ``directory`` holds ``labels.csv`` (``sample_id,split,label`` with split
    ``valid`` or ``test``) and, per classifier NAME, ``NAME.valid.csv`` and
    ``NAME.test.csv`` score files plus ``NAME.confusion.csv`` (training confusion).
    Returns the evaluation data and the class names.
    """
    directory = Path(directory)
    label_path = directory / "labels.csv"
    rows = _read_rows(label_path)
    if not rows or [h.strip() for h in rows[0]] != ["sample_id", "split", "label"]:
        raise CsvFormatError(label_path, 1, None, "header must be sample_id,split,label")
    ids: dict[str, list[str]] = {"valid": [], "test": []}
    labels: dict[str, list[str]] = {"valid": [], "test": []}
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != 3 or row[1].strip() not in ids:
            raise CsvFormatError(label_path, r, "split", "expected sample_id,valid|test,label")
        ids[row[1].strip()].append(row[0].strip())
        labels[row[1].strip()].append(row[2].strip())
    names = sorted(p.name[: -len(".valid.csv")] for p in directory.glob("*.valid.csv"))
    if not names:
        raise CsvFormatError(directory, None, None, "no NAME.valid.csv score files found")
    members, classes = [], None
    for name in names:
        valid, vid, vcls = read_scores(directory / f"{name}.valid.csv")
        test, tid, tcls = read_scores(directory / f"{name}.test.csv")
        cm = read_confusion(directory / f"{name}.confusion.csv")
        classes = classes or vcls
        if vcls != classes or tcls != classes or cm.n_classes != len(classes):
            raise CsvFormatError(directory, None, None, f"{name}: class layout differs from {classes}")
        if vid != ids["valid"] or tid != ids["test"]:
            raise CsvFormatError(directory, None, None, f"{name}: sample ids do not match labels.csv")
        members.append(MemberOutputs(name, cm, valid, test))
    index = {c: i for i, c in enumerate(classes)}
    try:
        y = {k: np.array([index[v] for v in vals], dtype=np.int64) for k, vals in labels.items()}
    except KeyError as exc:
        raise CsvFormatError(label_path, None, "label", f"unknown class {exc.args[0]!r}") from None
    if defect_class is None:
        counts = np.bincount(np.concatenate([y["valid"], y["test"]]), minlength=len(classes))
        defect_class = int(np.argmin(np.where(counts > 0, counts, np.iinfo(np.int64).max)))
    return EvaluationData(members, y["valid"], y["test"], defect_class), list(classes)


# -- fusion outputs ----------------------------------------------------------


def write_fused(path, result: FusionResult, classes: Sequence[str], ids: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", *(f"m_{c}" for c in classes), "m_ignorance", "predicted"])
        for i, row, p in zip(ids, result.fused, result.predicted_class):
            w.writerow([i, *(fmt(v) for v in row), classes[p] if p >= 0 else ""])


DIAGNOSTIC_FIELDS = ("abjs", "disagreement", "support_norm", "deng", "credibility_norm")


def write_diagnostics(path, result: FusionResult, ids: Sequence[str], members: Sequence[str]) -> None:
    d = result.diagnostics
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["sample_id", "sw"]
        for f in DIAGNOSTIC_FIELDS:
            header += [f"{f}_{m}" for m in members]
        w.writerow(header)
        if d is None:
            return
        for s, i in enumerate(ids):
            row = [i, fmt(d.sw[s])]
            for f in DIAGNOSTIC_FIELDS:
                row += [fmt(v) for v in getattr(d, f)[s]]
            w.writerow(row)


# -- experiment reports ------------------------------------------------------


def cells_to_csv(cells: Sequence[CellRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CellRecord.FIELDS)
    for c in cells:
        w.writerow([fmt(v) for v in astuple(c)])
    return buf.getvalue()


def cells_from_csv(text: str) -> list[CellRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CellRecord.FIELDS:
        raise ValueError(f"unexpected report header {header}")
    out = []
    for row in reader:
        rec = dict(zip(header, row))
        out.append(
            CellRecord(
                repetition=int(rec["repetition"]),
                noise=float(rec["noise"]),
                ensemble=rec["ensemble"],
                size=int(rec["size"]),
                scheme=rec["scheme"],
                valid_acc=float(rec["valid_acc"]),
                test_acc=float(rec["test_acc"]),
                test_spc=float(rec["test_spc"]),
                n_conflicted=int(rec["n_conflicted"]),
                failed=rec["failed"] == "1",
                selected=rec["selected"],
            )
        )
    return out


def table_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.writer(buf, lineterminator="\n")
    keys = list(rows[0])
    w.writerow(keys)
    for r in rows:
        w.writerow([fmt(r[k]) for k in keys])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return None if math.isnan(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_report(out_dir, report: ExperimentReport) -> dict[str, Path]:
    """Write cells, summary tables and a JSON summary; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = report.summary()
    files = {
        "cells": (out_dir / "cells.csv", cells_to_csv(report.cells)),
        "max_accuracy": (out_dir / "max_accuracy.csv", table_to_csv(summary["max_accuracy"])),
        "size_stats": (out_dir / "size_stats.csv", table_to_csv(summary["size_stats"])),
        "best_per_size": (out_dir / "best_per_size.csv", table_to_csv(summary["best_per_size"])),
        "overall_best": (out_dir / "overall_best.csv", table_to_csv(summary["overall_best"])),
        "summary": (out_dir / "summary.json", json.dumps(_json_safe(summary), indent=1, sort_keys=True) + "\n"),
    }
    for path, text in files.values():
        path.write_text(text)
    return {k: p for k, (p, _) in files.items()}
