import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import BASIS2, FRAME2, WORKED, from_row, mass_functions, to_oracle
from dsfusion import (
    BodyOfEvidence,
    Combination,
    MassFunction,
    PipelineConfig,
    TotalConflictError,
    combine_many,
    fuse,
    fuse_dataset,
)
from dsfusion.fusion import (
    average_bjs,
    combine_weighted,
    credibility_batch,
    credibility_degree,
    support_degree,
    weight_evidences,
)
from dsfusion.metrics import cardinalities
import oracles

AVERAGE = PipelineConfig(combination=Combination.WEIGHTED_AVERAGE)


def boe_rows(n_members, n_samples, n_classes):
    """Strategy for stacked singleton-plus-ignorance masses, shape (members, samples, classes + 1)."""
    raw = hnp.arrays(float, (n_members, n_samples, n_classes + 1), elements=st.floats(0.01, 1.0))
    return raw.map(lambda a: a / a.sum(axis=-1, keepdims=True))


class TestWorkedExampleSteps:
    def test_average_bjs(self, worked):
        assert average_bjs(worked) == pytest.approx([0.042, 0.080, 0.111, 0.046], abs=0.005)

    def test_support(self, worked):
        sd, sd_norm = support_degree(worked)
        assert sd == pytest.approx([47.95, 23.87, 17.09, 45.02], abs=0.15)
        assert sd_norm == pytest.approx([0.358, 0.178, 0.128, 0.336], abs=0.005)

    def test_credibility(self, worked):
        _, sd_norm = support_degree(worked)
        cd, cd_norm = credibility_degree(worked, sd_norm)
        assert cd == pytest.approx([0.653, 0.346, 0.219, 0.643], abs=0.005)
        assert cd_norm == pytest.approx([0.351, 0.186, 0.118, 0.346], abs=0.005)
        assert cd_norm.sum() == pytest.approx(1.0, abs=1e-12)

    def test_weighted_evidence(self, worked):
        _, sd_norm = support_degree(worked)
        _, cd_norm = credibility_degree(worked, sd_norm)
        basis, rows = weight_evidences(worked, cd_norm)
        assert basis == BASIS2
        assert rows[0] == pytest.approx([0.175, 0.035, 0.140], abs=0.005)
        assert rows.sum(axis=0).sum() == pytest.approx(1.0, abs=1e-9)

    def test_end_to_end(self, worked):
        res = fuse(worked)
        assert res.fused.vector(BASIS2) == pytest.approx([0.818, 0.1265, 0.056], abs=0.005)
        assert res.predicted_class == 0
        # frozen from the frozenset oracle: sequential combination of the evidences
        assert res.fused.vector(BASIS2) == pytest.approx([0.818024, 0.126516, 0.055459], abs=1e-6)

    def test_weighted_average_mode(self, worked):
        res = fuse(worked, AVERAGE)
        center = res.diagnostics.averaged
        expected = oracles.dempster_chain([to_oracle(from_row(center))] * 4)
        got = to_oracle(res.fused)
        for k in expected:
            assert got[k] == pytest.approx(expected[k], abs=1e-9)
        # frozen from the oracle
        assert res.fused.vector(BASIS2) == pytest.approx([0.814453, 0.135639, 0.049908], abs=1e-6)


class TestFuse:
    def test_single_evidence_bypass(self, worked):
        res = fuse(worked[:1])
        assert res.fused == worked[0]
        assert res.diagnostics is None

    def test_empty(self):
        with pytest.raises(ValueError):
            fuse([])

    def test_categorical_idempotent(self):
        e1 = MassFunction.categorical(FRAME2, "E1")
        for cfg in (PipelineConfig(), AVERAGE):
            assert fuse([e1] * 3, cfg).fused.is_close(e1, 1e-12)

    def test_total_conflict(self):
        e1, e2 = MassFunction.categorical(FRAME2, "E1"), MassFunction.categorical(FRAME2, "E2")
        with pytest.raises(TotalConflictError):
            fuse([e1, e2])

    def test_self_combined_average_matches_oracle(self):
        m = {frozenset({0}): 0.4287, frozenset({1}): 0.1601, frozenset({0, 1}): 0.4122}
        total = sum(m.values())
        m = {k: v / total for k, v in m.items()}
        mf = MassFunction(FRAME2, {sum(1 << i for i in k): v for k, v in m.items()})
        expected = oracles.dempster_chain([m] * 4)
        got = to_oracle(combine_many([mf] * 4))
        assert all(got[k] == pytest.approx(v, abs=1e-6) for k, v in expected.items())

    @settings(max_examples=60)
    @given(st.lists(mass_functions(frame_size=3), min_size=2, max_size=4))
    def test_literal_mode_equals_plain_dempster(self, ms):
        # the credibility factors are scalars and cancel under renormalization
        try:
            expected = oracles.dempster_chain([to_oracle(m) for m in ms])
        except ZeroDivisionError:
            return
        got = to_oracle(fuse(ms).fused)
        for key in set(expected) | set(got):
            assert got.get(key, 0.0) == pytest.approx(expected.get(key, 0.0), abs=1e-9)

    @settings(max_examples=60)
    @given(st.lists(mass_functions(frame_size=2), min_size=2, max_size=5), st.randoms())
    def test_permutation_invariant(self, ms, rnd):
        shuffled = list(ms)
        rnd.shuffle(shuffled)
        for cfg in (PipelineConfig(), AVERAGE):
            try:
                a = fuse(ms, cfg)
            except TotalConflictError:
                return
            b = fuse(shuffled, cfg)
            assert a.fused.is_close(b.fused, 1e-9)

    @given(mass_functions(frame_size=3), st.integers(2, 5))
    def test_identical_members(self, m, n):
        res = fuse([m] * n, AVERAGE)
        d = res.diagnostics
        assert d.credibility_norm == pytest.approx(np.full(n, 1.0 / n), abs=1e-12)
        assert d.averaged == pytest.approx(m.vector(res.basis), abs=1e-12)
        assert res.fused.is_close(combine_many([m] * n), 1e-9)

    @given(st.lists(mass_functions(frame_size=2), min_size=2, max_size=5))
    def test_weighted_average_is_a_mass_function(self, ms):
        d = fuse(ms, AVERAGE).diagnostics if _no_conflict(ms) else None
        if d is not None:
            assert d.averaged.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(d.averaged >= 0)


def _no_conflict(ms):
    try:
        fuse(ms, AVERAGE)
        return True
    except TotalConflictError:
        return False


class TestSupportScaling:
    @given(boe_rows(4, 3, 2), st.floats(0.01, 100.0))
    def test_scaling_support_leaves_credibility_unchanged(self, masses, factor):
        masses = np.swapaxes(masses, 0, 1)
        cards = cardinalities([1, 2, 3])
        d = credibility_batch(masses, cards, PipelineConfig())
        scaled = np.exp(d.deng) * (d.support * factor) / (d.support * factor).sum(axis=-1, keepdims=True)
        assert scaled / scaled.sum(axis=-1, keepdims=True) == pytest.approx(d.credibility_norm, rel=1e-12)

    def test_floor_on_identical_evidence(self):
        ms = [from_row(WORKED[0])] * 3
        sd, sd_norm = support_degree(ms)
        assert np.all(np.isfinite(sd))
        assert sd == pytest.approx(np.full(3, 1.0 / (1e-9 * 0.5)))
        assert sd_norm == pytest.approx(np.full(3, 1 / 3))

    def test_mirror_images_get_equal_support(self):
        a, b = from_row((0.6, 0.1, 0.3)), from_row((0.1, 0.6, 0.3))
        _, sd_norm = support_degree([a, b])
        assert sd_norm == pytest.approx([0.5, 0.5], abs=1e-12)
        assert average_bjs([a, b])[0] == average_bjs([a, b])[1]


class TestCombineWeighted:
    def test_matches_oracle_on_subnormal_rows(self):
        rows = [{1: 0.2, 3: 0.1}, {2: 0.05, 3: 0.3}, {1: 0.1, 2: 0.1, 3: 0.05}]
        expected = oracles.unnormalized_dempster(
            oracles.unnormalized_dempster(*[_to_sets(r) for r in rows[:2]]), _to_sets(rows[2])
        )
        got = combine_weighted(rows)
        for mask, v in got.items():
            assert v == pytest.approx(expected[_set(mask)], abs=1e-12)

    def test_total_conflict(self):
        with pytest.raises(TotalConflictError):
            combine_weighted([{1: 0.5}, {2: 0.5}])


def _set(mask):
    return frozenset(i for i in range(2) if mask >> i & 1)


def _to_sets(row):
    return {_set(k): v for k, v in row.items()}


class TestFuseDataset:
    def test_worked_example_single_sample(self):
        boes = [BodyOfEvidence([row]) for row in WORKED]
        res = fuse_dataset(boes)
        assert res.fused.shape == (1, 3)
        assert res.fused[0] == pytest.approx([0.818, 0.1265, 0.056], abs=0.005)
        assert res.predicted_class.tolist() == [0]
        assert res.diagnostics.abjs[0] == pytest.approx([0.042, 0.080, 0.111, 0.046], abs=0.005)

    def test_single_member_echo(self):
        boe = BodyOfEvidence([[0.2, 0.5, 0.3], [0.6, 0.4, 0.0]])
        res = fuse_dataset([boe])
        assert np.array_equal(res.fused, boe.masses)
        assert res.predicted_class.tolist() == [1, 0]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            fuse_dataset([BodyOfEvidence([[0.2, 0.5, 0.3]]), BodyOfEvidence([[0.2, 0.5, 0.3]] * 2)])

    def test_conflict_handling(self):
        boes = [BodyOfEvidence([[1.0, 0.0, 0.0], [0.5, 0.2, 0.3]]), BodyOfEvidence([[0.0, 1.0, 0.0], [0.4, 0.4, 0.2]])]
        with pytest.raises(TotalConflictError):
            fuse_dataset(boes)
        res = fuse_dataset(boes, on_conflict="mark")
        assert res.conflicted.tolist() == [True, False]
        assert res.predicted_class[0] == -1
        assert np.all(np.isnan(res.fused[0]))
        assert res.n_conflicted == 1
        with pytest.raises(ValueError):
            fuse_dataset(boes, on_conflict="ignore")

    @settings(max_examples=40)
    @given(boe_rows(3, 4, 3), st.sampled_from([PipelineConfig(), AVERAGE]))
    def test_agrees_with_per_sample_fuse(self, masses, cfg):
        boes = [BodyOfEvidence(m) for m in masses]
        res = fuse_dataset(boes, cfg)
        for i in range(4):
            single = fuse([b.mass_function(i) for b in boes], cfg)
            basis = boes[0].basis()
            assert res.fused[i] == pytest.approx(single.fused.vector(basis), abs=1e-9)
            assert res.diagnostics.credibility_norm[i] == pytest.approx(single.diagnostics.credibility_norm, abs=1e-12)

    @given(boe_rows(3, 2, 2))
    def test_duplicated_samples_give_identical_rows(self, masses):
        doubled = [BodyOfEvidence(np.vstack([m, m[:1]])) for m in masses]
        res = fuse_dataset(doubled)
        assert np.array_equal(res.fused[0], res.fused[-1])

    @given(boe_rows(4, 3, 2), st.randoms())
    def test_member_order_invariant(self, masses, rnd):
        order = list(range(4))
        rnd.shuffle(order)
        a = fuse_dataset([BodyOfEvidence(m) for m in masses])
        b = fuse_dataset([BodyOfEvidence(masses[i]) for i in order])
        assert np.allclose(a.fused, b.fused, atol=1e-9, rtol=0)


class TestConfig:
    def test_validation(self):
        for kwargs in ({"deng_log_base": 1.0}, {"sigma": 0.0}, {"abjs_floor": 0.0}, {"combination": "nope"}):
            with pytest.raises(ValueError):
                PipelineConfig(**kwargs)
        assert PipelineConfig(distance_weighting="jaccard").distance_weighting.value == "jaccard"
