import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from dsfusion import Frame, MassFunction  # noqa: E402

# masses on {E1}, {E2}, {E1, E2} for the four-classifier worked example
WORKED = (
    (0.5, 0.1, 0.4),
    (0.3, 0.3, 0.4),
    (0.5, 0.0, 0.5),
    (0.4, 0.2, 0.4),
)
FRAME2 = Frame(["E1", "E2"])
BASIS2 = [1, 2, 3]


def from_row(row, frame=FRAME2, basis=BASIS2):
    return MassFunction.from_vector(frame, basis, row)


@pytest.fixture
def worked():
    return [from_row(r) for r in WORKED]


def to_oracle(m: MassFunction) -> dict:
    """Bitmask mass function to a frozenset-keyed dict of element indices."""
    return {frozenset(i for i in range(len(m.frame)) if mask >> i & 1): v for mask, v in m.items()}


@st.composite
def mass_functions(draw, frame_size=None, min_focal=1, max_focal=None):
    k = draw(st.integers(2, 3)) if frame_size is None else frame_size
    frame = Frame.of_size(k)
    n_sets = 2**k - 1
    masks = draw(
        st.lists(st.integers(1, n_sets), min_size=min_focal, max_size=max_focal or n_sets, unique=True)
    )
    weights = draw(st.lists(st.floats(0.01, 1.0), min_size=len(masks), max_size=len(masks)))
    total = sum(weights)
    return MassFunction(frame, {m: w / total for m, w in zip(masks, weights)})


def random_mass(rng: np.random.Generator, k: int) -> MassFunction:
    frame = Frame.of_size(k)
    n_sets = 2**k - 1
    n_focal = rng.integers(1, n_sets + 1)
    masks = rng.choice(np.arange(1, n_sets + 1), size=n_focal, replace=False)
    w = rng.random(n_focal) + 1e-3
    return MassFunction(frame, {int(m): float(x) for m, x in zip(masks, w / w.sum())})


# -- acceptance reporting -----------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed
    if report.when == "call" or failed:
        detail = getattr(item, "acceptance_detail", "")
        prev = _ACCEPTANCE.get(number)
        if prev is None or prev[0] == "PASS":
            _ACCEPTANCE[number] = ("FAIL" if failed else "PASS", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[number]
        line = f"criterion {number}: {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
