"""
Worked four-classifier example with the reference values of every
intermediate quantity, used by ``dsfusion selftest``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Frame, MassFunction
from .fusion import PipelineConfig, fuse
from .metrics import bjs_divergence, boe_centers, evidence_distance

FRAME = Frame(["E1", "E2"])
# masses on {E1}, {E2}, {E1, E2}
EVIDENCE = (
    (0.5, 0.1, 0.4),
    (0.3, 0.3, 0.4),
    (0.5, 0.0, 0.5),
    (0.4, 0.2, 0.4),
)
TOL = 0.005
SUPPORT_TOL = 0.15

# (step, quantity, expected, tolerance)
EXPECTED = (
    (1, "BJS(m1, m_i)", (0.0, 0.056, 0.054, 0.0163), TOL),
    (1, "aBJS", (0.042, 0.080, 0.111, 0.046), TOL),
    (2, "center", (0.425, 0.150, 0.425), TOL),
    (2, "d(m_i, center)", (0.094, 0.197, 0.184, 0.061), TOL),
    (2, "SW", (0.134,), TOL),
    (2, "center without m1", (0.400, 0.167, 0.433), TOL),
    (2, "d(m_i, center without m1)", (0.170, 0.205, 0.047), TOL),
    (2, "SW_~i", (0.141, 0.099, 0.094, 0.154), TOL),
    (2, "disagreement", (0.496, 0.522, 0.525, 0.487), TOL),
    (3, "SD", (47.95, 23.87, 17.09, 45.02), SUPPORT_TOL),
    (4, "SD normalized", (0.358, 0.178, 0.128, 0.336), TOL),
    (5, "Deng entropy", (0.601, 0.664, 0.540, 0.650), TOL),
    (5, "CD", (0.653, 0.346, 0.219, 0.643), TOL),
    (6, "CD normalized", (0.351, 0.186, 0.118, 0.346), TOL),
    (7, "WE", (0.175, 0.035, 0.140, 0.056, 0.056, 0.074, 0.059, 0.000, 0.059, 0.136, 0.069, 0.136), TOL),
    (8, "fused", (0.818, 0.1265, 0.056), TOL),
    (8, "class (1-based)", (1,), 0.0),
)


def evidence() -> list[MassFunction]:
    basis = [FRAME.subset("E1"), FRAME.subset("E2"), FRAME.full]
    return [MassFunction.from_vector(FRAME, basis, row) for row in EVIDENCE]


@dataclass(frozen=True)
class TraceRow:
    step: int
    quantity: str
    computed: tuple[float, ...]
    expected: tuple[float, ...]
    tolerance: float

    @property
    def max_error(self) -> float:
        if len(self.computed) != len(self.expected):
            return float("inf")
        return float(np.max(np.abs(np.subtract(self.computed, self.expected))))

    @property
    def ok(self) -> bool:
        return self.max_error <= self.tolerance + 1e-12


@dataclass
class SelftestResult:
    rows: list[TraceRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def first_failure(self) -> TraceRow | None:
        return next((r for r in self.rows if not r.ok), None)

    def table(self) -> str:
        lines = [f"{'step':>4}  {'quantity':<28} {'status':<6} {'max err':>9}  computed / expected"]
        for r in self.rows:
            comp = ", ".join(f"{v:.4f}" for v in r.computed)
            exp = ", ".join(f"{v:g}" for v in r.expected)
            status = "ok" if r.ok else "FAIL"
            lines.append(f"{r.step:>4}  {r.quantity:<28} {status:<6} {r.max_error:>9.5f}  [{comp}] / [{exp}]")
        return "\n".join(lines)


def compute_trace(cfg: PipelineConfig = PipelineConfig()) -> dict[str, tuple[float, ...]]:
    ms = evidence()
    basis = [1, 2, 3]
    res = fuse(ms, cfg)
    d = res.diagnostics
    center, loo = boe_centers(ms)
    w = cfg.distance_weighting

    def t(x) -> tuple[float, ...]:
        return tuple(float(v) for v in np.ravel(x))

    return {
        "BJS(m1, m_i)": t([bjs_divergence(ms[0], m, cfg.bjs_log_base) for m in ms]),
        "aBJS": t(d.abjs),
        "center": t(center.vector(basis)),
        "d(m_i, center)": t(d.center_distances),
        "SW": t(d.sw),
        "center without m1": t(loo[0].vector(basis)),
        "d(m_i, center without m1)": t([evidence_distance(m, loo[0], w) for m in ms[1:]]),
        "SW_~i": t(d.sw_loo),
        "disagreement": t(d.disagreement),
        "SD": t(d.support),
        "SD normalized": t(d.support_norm),
        "Deng entropy": t(d.deng),
        "CD": t(d.credibility),
        "CD normalized": t(d.credibility_norm),
        "WE": t(d.weighted),
        "fused": t(res.fused.vector(basis)),
        "class (1-based)": (float(res.predicted_class + 1),),
    }


def run_selftest(cfg: PipelineConfig = PipelineConfig()) -> SelftestResult:
    trace = compute_trace(cfg)
    result = SelftestResult()
    for step, name, expected, tol in EXPECTED:
        result.rows.append(TraceRow(step, name, trace[name], tuple(float(v) for v in expected), tol))
    return result
