import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FRAME2, from_row, mass_functions, random_mass, to_oracle
from dsfusion import (
    Frame,
    FrameMismatchError,
    MassFunction,
    TotalConflictError,
    belief,
    combine,
    combine_many,
    conflict_k,
    plausibility,
)
from dsfusion.core import common_basis
import oracles

M1 = from_row((0.5, 0.1, 0.4))
M3 = from_row((0.5, 0.0, 0.5))


class TestFrame:
    def test_subset_forms(self):
        f = Frame(["a", "b", "c"])
        assert f.subset("b") == 0b010
        assert f.subset(["a", "c"]) == 0b101
        assert f.subset(0b011) == 0b011
        assert f.full == 0b111
        assert f.labels(0b101) == ("a", "c")
        assert f.complement(0b001) == 0b110

    def test_rejects_unknown_label_and_out_of_range_mask(self):
        f = Frame.of_size(2)
        with pytest.raises(FrameMismatchError):
            f.subset("E9")
        with pytest.raises(FrameMismatchError):
            f.subset(0b100)

    def test_duplicate_elements_rejected(self):
        with pytest.raises(ValueError):
            Frame(["a", "a"])


class TestMassFunction:
    def test_validation(self):
        with pytest.raises(ValueError):
            MassFunction(FRAME2, {1: 0.5, 2: 0.4})
        with pytest.raises(ValueError):
            MassFunction(FRAME2, {1: 1.2, 2: -0.2})
        with pytest.raises(ValueError):
            MassFunction(FRAME2, {0: 0.5, 1: 0.5})

    def test_zero_masses_are_dropped_and_order_is_canonical(self):
        m = MassFunction(FRAME2, {3: 0.5, 2: 0.0, 1: 0.5})
        assert m.focal_sets() == (1, 3)
        assert m.vector([1, 2, 3]) == [0.5, 0.0, 0.5]

    def test_vector_requires_covering_basis(self):
        with pytest.raises(ValueError):
            M1.vector([1, 2])

    def test_common_basis(self):
        assert common_basis([M3, MassFunction.categorical(FRAME2, "E2")]) == [1, 2, 3]


class TestBeliefPlausibility:
    def test_examples(self):
        vac = MassFunction.vacuous(FRAME2)
        assert belief(vac, "E1") == 0.0
        assert belief(M1, "E1") == pytest.approx(0.5, abs=1e-12)
        assert belief(M1, ["E1", "E2"]) == pytest.approx(1.0, abs=1e-12)
        assert plausibility(M1, "E1") == pytest.approx(0.9, abs=1e-12)
        assert plausibility(vac, "E2") == 1.0
        assert plausibility(M3, "E2") == pytest.approx(0.5, abs=1e-12)

    def test_outside_frame(self):
        with pytest.raises(FrameMismatchError):
            belief(M1, "E3")

    @given(mass_functions(), st.data())
    def test_against_oracle_and_duality(self, m, data):
        k = len(m.frame)
        a = data.draw(st.integers(1, 2**k - 1))
        fa = frozenset(i for i in range(k) if a >> i & 1)
        om = to_oracle(m)
        assert belief(m, a) == pytest.approx(oracles.belief(om, fa), abs=1e-12)
        assert plausibility(m, a) == pytest.approx(oracles.plausibility(om, fa), abs=1e-12)
        assert belief(m, a) <= plausibility(m, a) + 1e-12
        comp = m.frame.complement(a)
        if comp:
            assert plausibility(m, a) == pytest.approx(1.0 - belief(m, comp), abs=1e-12)


class TestCombination:
    def test_conflict_examples(self):
        vac = MassFunction.vacuous(FRAME2)
        assert conflict_k(M1, vac) == 0.0
        e1, e2 = MassFunction.categorical(FRAME2, "E1"), MassFunction.categorical(FRAME2, "E2")
        assert conflict_k(e1, e2) == 1.0

    def test_vacuous_identity(self):
        assert combine(M1, MassFunction.vacuous(FRAME2)).is_close(M1, 1e-12)

    def test_categorical_absorbs(self):
        e1 = MassFunction.categorical(FRAME2, "E1")
        m = MassFunction(FRAME2, {1: 0.5, 3: 0.5})
        assert combine(e1, m).is_close(e1, 1e-12)

    def test_total_conflict_raises(self):
        e1, e2 = MassFunction.categorical(FRAME2, "E1"), MassFunction.categorical(FRAME2, "E2")
        with pytest.raises(TotalConflictError):
            combine(e1, e2)
        with pytest.raises(TotalConflictError) as info:
            combine_many([MassFunction.vacuous(FRAME2), e1, e2])
        assert info.value.pair == (1, 2)

    def test_frame_mismatch(self):
        with pytest.raises(FrameMismatchError):
            combine(M1, MassFunction.vacuous(Frame(["x", "y"])))

    def test_combine_many_trivial(self):
        vac = MassFunction.vacuous(FRAME2)
        assert combine_many([M1]) == M1
        assert combine_many([M1, vac, vac]).is_close(M1, 1e-12)
        with pytest.raises(ValueError):
            combine_many([])

    def test_four_copies_of_center(self):
        # credibility-weighted average of the worked example as printed to 4 digits (sums to 1.001)
        center = from_row(np.array([0.4287, 0.1601, 0.4122]) / 1.001)
        fused = combine_many([center] * 4)
        # frozen from the frozenset oracle
        assert fused.vector([1, 2, 3]) == pytest.approx([0.814537, 0.135552, 0.049911], abs=1e-6)

    def test_worked_example_chain(self, worked):
        # raw evidences combined in sequence, values frozen from the oracle
        assert combine_many(worked).vector([1, 2, 3]) == pytest.approx([0.818024, 0.126516, 0.055459], abs=1e-6)

    def test_and_operator(self):
        assert (M1 & M3) == combine(M1, M3)

    @settings(max_examples=300)
    @given(mass_functions(), st.data())
    def test_matches_oracle(self, m1, data):
        m2 = data.draw(mass_functions(frame_size=len(m1.frame)))
        o1, o2 = to_oracle(m1), to_oracle(m2)
        try:
            expected = oracles.dempster(o1, o2)
        except ZeroDivisionError:
            with pytest.raises(TotalConflictError):
                combine(m1, m2)
            return
        got = to_oracle(combine(m1, m2))
        for key in set(expected) | set(got):
            assert got.get(key, 0.0) == pytest.approx(expected.get(key, 0.0), abs=1e-9)

    @given(mass_functions(frame_size=3), mass_functions(frame_size=3))
    def test_commutative_exactly(self, a, b):
        try:
            ab = combine(a, b)
        except TotalConflictError:
            return
        assert ab == combine(b, a)

    @given(mass_functions(frame_size=3), mass_functions(frame_size=3), mass_functions(frame_size=3))
    def test_associative(self, a, b, c):
        try:
            left = combine(combine(a, b), c)
            right = combine(a, combine(b, c))
        except TotalConflictError:
            return
        assert left.is_close(right, 1e-9)

    @given(mass_functions())
    def test_vacuous_is_identity(self, m):
        assert combine(m, MassFunction.vacuous(m.frame)).is_close(m, 1e-12)

    @given(mass_functions(), st.data())
    def test_result_is_valid_and_conflict_in_range(self, m1, data):
        m2 = data.draw(mass_functions(frame_size=len(m1.frame)))
        k = conflict_k(m1, m2)
        assert -1e-15 <= k <= 1 + 1e-15
        if k < 1 - 1e-9:
            fused = combine(m1, m2)
            assert math.fsum(v for _, v in fused.items()) == pytest.approx(1.0, abs=1e-9)
            assert all(v >= 0 for _, v in fused.items())

    def test_numpy_seeded_random_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            k = int(rng.integers(2, 4))
            a, b = random_mass(rng, k), random_mass(rng, k)
            if conflict_k(a, b) > 1 - 1e-9:
                continue
            exp = oracles.dempster(to_oracle(a), to_oracle(b))
            got = to_oracle(combine(a, b))
            assert max(abs(got.get(s, 0) - exp.get(s, 0)) for s in set(exp) | set(got)) <= 1e-9
