"""
Reference implementations used as test oracles.

Everything here works on plain dicts keyed by frozensets and is written
independently of the package (no bitmasks, no numpy kernels).
"""

from __future__ import annotations

import itertools
import math


def powerset(elements):
    elements = list(elements)
    for r in range(1, len(elements) + 1):
        for combo in itertools.combinations(elements, r):
            yield frozenset(combo)


def dempster(m1: dict, m2: dict) -> dict:
    """Brute-force intersection enumeration with conflict renormalization."""
    joint: dict = {}
    conflict = 0.0
    for a, x in m1.items():
        for b, y in m2.items():
            c = a & b
            if c:
                joint[c] = joint.get(c, 0.0) + x * y
            else:
                conflict += x * y
    norm = 1.0 - conflict
    if norm <= 1e-12:
        raise ZeroDivisionError("total conflict")
    return {k: v / norm for k, v in joint.items()}


def unnormalized_dempster(m1: dict, m2: dict) -> dict:
    """Conjunctive sum followed by renormalization over the surviving mass (subnormal inputs allowed)."""
    joint: dict = {}
    for a, x in m1.items():
        for b, y in m2.items():
            c = a & b
            if c:
                joint[c] = joint.get(c, 0.0) + x * y
    total = sum(joint.values())
    return {k: v / total for k, v in joint.items()}


def dempster_chain(ms) -> dict:
    out = ms[0]
    for m in ms[1:]:
        out = dempster(out, m)
    return out


def belief(m: dict, a: frozenset) -> float:
    return sum(v for k, v in m.items() if k <= a)


def plausibility(m: dict, a: frozenset) -> float:
    return sum(v for k, v in m.items() if k & a)


def deng(m: dict, base: float = 10.0) -> float:
    return -sum(v * math.log(v / (2 ** len(k) - 1), base) for k, v in m.items() if v > 0)


def kl(p, q, base: float = 2.0) -> float:
    return sum(a * math.log(a / b, base) for a, b in zip(p, q) if a > 0)


def bjs(p, q, base: float = 2.0) -> float:
    """Two-KL form: half of KL to the midpoint from each side."""
    mid = [(a + b) / 2 for a, b in zip(p, q)]
    return 0.5 * kl(p, mid, base) + 0.5 * kl(q, mid, base)


def jousselme(p, q, sets=None) -> float:
    """sqrt(diff^T D diff); D is identity when ``sets`` is None, Jaccard otherwise."""
    diff = [a - b for a, b in zip(p, q)]
    n = len(diff)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if sets is None:
                d = 1.0 if i == j else 0.0
            else:
                d = len(sets[i] & sets[j]) / len(sets[i] | sets[j])
            total += diff[i] * d * diff[j]
    return math.sqrt(max(total, 0.0))


def confusion_counts(pred, truth, n):
    """Rows are predicted classes, columns true classes."""
    cm = [[0] * n for _ in range(n)]
    for p, t in zip(pred, truth):
        cm[p][t] += 1
    return cm
