"""
Frame-of-discernment algebra: mass functions, belief, plausibility and
Dempster's rule of combination.

Focal sets are integer bitmasks over the ordered elements of a `Frame`.
Bit ``i`` set means element ``frame.elements[i]`` belongs to the set.
"""

from __future__ import annotations

import math
from typing import Iterable, Iterator, Mapping, Sequence, Union

MASS_TOLERANCE = 1e-9
PRUNE_THRESHOLD = 1e-12
CONFLICT_THRESHOLD = 1e-12

FocalSet = int
Hypothesis = Union[int, str, Iterable[str]]


class FrameMismatchError(ValueError):
    """Raised when operands live on different frames or a set leaves the frame."""


class TotalConflictError(ArithmeticError):
    """Raised when Dempster's rule is applied to totally conflicting evidence."""

    def __init__(self, message: str, pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.pair = pair


def popcount(mask: int) -> int:
    return bin(mask).count("1")


class Frame:
    """An ordered, finite set of mutually exclusive hypotheses."""

    __slots__ = ("_elements", "_index")

    def __init__(self, elements: Sequence[str]):
        elements = tuple(str(e) for e in elements)
        if not elements:
            raise ValueError("a frame needs at least one element")
        if any(not e for e in elements):
            raise ValueError("frame labels must be non-empty")
        if len(set(elements)) != len(elements):
            raise ValueError(f"frame labels must be unique: {elements}")
        self._elements = elements
        self._index = {e: i for i, e in enumerate(elements)}

    @classmethod
    def of_size(cls, k: int, prefix: str = "E") -> "Frame":
        return cls([f"{prefix}{i + 1}" for i in range(k)])

    @property
    def elements(self) -> tuple[str, ...]:
        return self._elements

    @property
    def full(self) -> FocalSet:
        return (1 << len(self._elements)) - 1

    def __len__(self) -> int:
        return len(self._elements)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Frame) and self._elements == other._elements

    def __hash__(self) -> int:
        return hash(self._elements)

    def __repr__(self) -> str:
        return f"Frame({list(self._elements)!r})"

    def subset(self, hypothesis: Hypothesis) -> FocalSet:
        """Encode a hypothesis (bitmask, single label or iterable of labels) as a bitmask."""
        if isinstance(hypothesis, bool):
            raise TypeError("booleans are not hypotheses")
        if isinstance(hypothesis, int):
            if hypothesis < 0 or hypothesis & ~self.full:
                raise FrameMismatchError(f"bitmask {hypothesis:#b} is outside {self!r}")
            return hypothesis
        if isinstance(hypothesis, str):
            hypothesis = (hypothesis,)
        mask = 0
        for label in hypothesis:
            try:
                mask |= 1 << self._index[label]
            except KeyError:
                raise FrameMismatchError(f"{label!r} is not an element of {self!r}") from None
        return mask

    def labels(self, mask: FocalSet) -> tuple[str, ...]:
        return tuple(e for i, e in enumerate(self._elements) if mask >> i & 1)

    def singleton(self, index: int) -> FocalSet:
        if not 0 <= index < len(self._elements):
            raise IndexError(index)
        return 1 << index

    def complement(self, mask: FocalSet) -> FocalSet:
        return self.full & ~self.subset(mask)


def focal_order(mask: FocalSet) -> tuple[int, int]:
    """Canonical ordering: by cardinality, then by bitmask value."""
    return popcount(mask), mask


class MassFunction:
    """
    A basic belief assignment over a frame.

    Instances are immutable. Construction validates that no mass sits on the
    empty set, masses are non-negative and the total is one.
    """

    __slots__ = ("_frame", "_masses")

    def __init__(self, frame: Frame, assignments: Mapping[Hypothesis, float] | Iterable[tuple[Hypothesis, float]]):
        items = assignments.items() if isinstance(assignments, Mapping) else assignments
        masses: dict[int, float] = {}
        for hyp, value in items:
            mask = frame.subset(hyp)
            value = float(value)
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"invalid mass {value!r} for {frame.labels(mask)}")
            if value == 0.0:
                continue
            if mask == 0:
                raise ValueError("the empty set cannot carry mass")
            masses[mask] = masses.get(mask, 0.0) + value
        total = math.fsum(masses.values())
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"masses sum to {total!r}, expected 1")
        self._frame = frame
        self._masses = {m: masses[m] for m in sorted(masses, key=focal_order)}

    @classmethod
    def vacuous(cls, frame: Frame) -> "MassFunction":
        return cls(frame, {frame.full: 1.0})

    @classmethod
    def categorical(cls, frame: Frame, hypothesis: Hypothesis) -> "MassFunction":
        return cls(frame, {frame.subset(hypothesis): 1.0})

    @classmethod
    def from_vector(cls, frame: Frame, basis: Sequence[FocalSet], values: Iterable[float]) -> "MassFunction":
        return cls(frame, list(zip(basis, values)))

    @property
    def frame(self) -> Frame:
        return self._frame

    def focal_sets(self) -> tuple[FocalSet, ...]:
        return tuple(self._masses)

    def items(self) -> Iterator[tuple[FocalSet, float]]:
        return iter(self._masses.items())

    def __getitem__(self, hypothesis: Hypothesis) -> float:
        return self._masses.get(self._frame.subset(hypothesis), 0.0)

    def __len__(self) -> int:
        return len(self._masses)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MassFunction):
            return NotImplemented
        return self._frame == other._frame and self._masses == other._masses

    def __hash__(self) -> int:
        return hash((self._frame, tuple(self._masses.items())))

    def __repr__(self) -> str:
        body = ", ".join(
            "{" + ",".join(self._frame.labels(m)) + f"}}: {v:.6g}" for m, v in self._masses.items()
        )
        return f"MassFunction({body})"

    def vector(self, basis: Sequence[FocalSet]) -> list[float]:
        """Masses laid out over an ordered focal-set basis (zeros for absent sets)."""
        missing = set(self._masses) - set(basis)
        if missing:
            raise ValueError(f"basis does not cover focal sets {sorted(missing)}")
        return [self._masses.get(b, 0.0) for b in basis]

    def is_close(self, other: "MassFunction", tol: float = 1e-12) -> bool:
        check_same_frame(self, other)
        keys = set(self._masses) | set(other._masses)
        return all(abs(self._masses.get(k, 0.0) - other._masses.get(k, 0.0)) <= tol for k in keys)

    def belief(self, hypothesis: Hypothesis) -> float:
        return belief(self, hypothesis)

    def plausibility(self, hypothesis: Hypothesis) -> float:
        return plausibility(self, hypothesis)

    def __and__(self, other: "MassFunction") -> "MassFunction":
        return combine(self, other)


def check_same_frame(*ms: MassFunction) -> Frame:
    frame = ms[0].frame
    for m in ms[1:]:
        if m.frame != frame:
            raise FrameMismatchError(f"{m.frame!r} differs from {frame!r}")
    return frame


def common_basis(ms: Sequence[MassFunction]) -> list[FocalSet]:
    """Union of focal sets of several mass functions, in canonical order."""
    check_same_frame(*ms)
    return sorted({f for m in ms for f in m.focal_sets()}, key=focal_order)


def belief(m: MassFunction, hypothesis: Hypothesis) -> float:
    a = m.frame.subset(hypothesis)
    return math.fsum(v for b, v in m.items() if b & ~a == 0)


def plausibility(m: MassFunction, hypothesis: Hypothesis) -> float:
    a = m.frame.subset(hypothesis)
    return math.fsum(v for b, v in m.items() if b & a)


def conjunctive_sum(
    a: Mapping[FocalSet, float], b: Mapping[FocalSet, float]
) -> tuple[dict[FocalSet, float], float]:
    """Unnormalized conjunctive sum of two mass maps; returns (masses, conflict mass)."""
    # fsum makes each total independent of summation order, so the rule commutes exactly
    terms: dict[FocalSet, list[float]] = {}
    for c1, v1 in a.items():
        for c2, v2 in b.items():
            terms.setdefault(c1 & c2, []).append(v1 * v2)
    conflict = math.fsum(terms.pop(0, ()))
    return {k: math.fsum(v) for k, v in terms.items()}, conflict


def conflict_k(m1: MassFunction, m2: MassFunction) -> float:
    check_same_frame(m1, m2)
    return conjunctive_sum(m1._masses, m2._masses)[1]


def _normalize(frame: Frame, masses: Mapping[FocalSet, float]) -> MassFunction:
    total = math.fsum(masses.values())
    kept = {k: v for k, v in masses.items() if v / total >= PRUNE_THRESHOLD}
    total = math.fsum(kept.values())
    return MassFunction(frame, {k: v / total for k, v in kept.items()})


def combine(m1: MassFunction, m2: MassFunction) -> MassFunction:
    """Dempster's rule: conjunctive sum renormalized by ``1 - K``."""
    frame = check_same_frame(m1, m2)
    joint, k = conjunctive_sum(m1._masses, m2._masses)
    if k >= 1.0 - CONFLICT_THRESHOLD or not joint:
        raise TotalConflictError(f"total conflict (K={k!r}) between {m1!r} and {m2!r}")
    # dividing the surviving mass by its own sum equals dividing by 1 - K, but stays exact
    # when K is within rounding of 1
    return _normalize(frame, joint)


def combine_many(ms: Sequence[MassFunction]) -> MassFunction:
    """Left fold of `combine` over a non-empty sequence."""
    if not ms:
        raise ValueError("combine_many needs at least one mass function")
    check_same_frame(*ms)
    out = ms[0]
    for j, m in enumerate(ms[1:], start=1):
        try:
            out = combine(out, m)
        except TotalConflictError as exc:
            raise TotalConflictError(
                f"total conflict when combining evidence {j} with the fusion of 0..{j - 1}",
                pair=(j - 1, j),
            ) from exc
    return out
