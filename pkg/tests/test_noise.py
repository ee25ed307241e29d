import logging
import math
from itertools import product

import numpy as np
import pytest
from scipy import stats
from hypothesis import given
from hypothesis import strategies as st

from compoundlab import CapacityExceeded, InvalidArgument, InvalidState, SeqM
from compoundlab.alphabet import sequence_index
from compoundlab.noise import (BlockInterference, ComplementaryBlocks, DecayingBernoulli,
                               ErgodicMixture, IidGeneric, InterferencePlusNoise, StateSchedule,
                               composition_classes, enumerate_support, log_prob, model_from_dict,
                               sample, support_arrays)

BUNDLED = [
    (BlockInterference(2), 3),
    (BlockInterference(2, head_pmf=[0.7, 0.3]), 2),
    (InterferencePlusNoise(0.3, 0.1), 4),
    (DecayingBernoulli(), 2.5),
    (IidGeneric.bernoulli(0.05), 1),
    (IidGeneric([0.5, 0.3, 0.2]), 1),
    (ErgodicMixture(IidGeneric.bernoulli(0.2), IidGeneric.bernoulli(0.05), 0.3), 1),
    (ComplementaryBlocks(0.5), 3),
]
IDS = [f"{m.kind}-{i}" for i, (m, _) in enumerate(BUNDLED)]


def brute_log2_prob(model, s, row):
    """Independent per-sequence probability from the model definitions."""
    n = len(row)
    if isinstance(model, IidGeneric):
        return sum(math.log2(model.pmf[v]) if model.pmf[v] > 0 else -math.inf for v in row)
    if isinstance(model, InterferencePlusNoise):
        p = [model.p1 if i < s else model.p2 for i in range(n)]
    elif isinstance(model, DecayingBernoulli):
        p = [s / (2 * (i + 1 + s)) for i in range(n)]
    elif isinstance(model, BlockInterference):
        if any(row[s:]):
            return -math.inf
        return sum(math.log2(model.head_pmf[v]) for v in row[:s])
    elif isinstance(model, ErgodicMixture):
        a = 2 ** brute_log2_prob(model.first, s, row)
        b = 2 ** brute_log2_prob(model.second, s, row)
        tot = model.weight * a + (1 - model.weight) * b
        return math.log2(tot) if tot > 0 else -math.inf
    elif isinstance(model, ComplementaryBlocks):
        head = (0.5 ** s) if not any(row[s:]) else 0.0
        tail = (0.5 ** (n - s)) if not any(row[:s]) else 0.0
        tot = model.weight * head + (1 - model.weight) * tail
        return math.log2(tot) if tot > 0 else -math.inf
    else:
        raise AssertionError(model)
    prob = math.prod(q if v else 1 - q for q, v in zip(p, row))
    return math.log2(prob) if prob > 0 else -math.inf


class TestSpecExamples:
    def test_block_tail_is_zero(self):
        xi = sample(BlockInterference(2), 2, 5, seed=3)
        assert xi.tolist()[2:] == [0, 0, 0]

    def test_decaying_zero_state(self):
        assert sample(DecayingBernoulli(), 0, 12, seed=1) == SeqM.zeros(12, 2)

    def test_block_log_probs(self):
        m = BlockInterference(2)
        assert log_prob(m, 2, SeqM([1, 0, 0, 0], 2)) == -2.0
        assert log_prob(m, 2, SeqM([0, 0, 1, 0], 2)) == -math.inf

    def test_interference_plus_noise(self):
        m = InterferencePlusNoise(0.4, 0.1)
        assert log_prob(m, 1, SeqM([1, 0], 2)) == pytest.approx(math.log2(0.36), rel=1e-12)

    def test_complementary_overlap(self):
        assert log_prob(ComplementaryBlocks(0.5), 2, SeqM([0, 0, 0, 0], 2)) == pytest.approx(-2.0)

    def test_block_support(self):
        sup = enumerate_support(BlockInterference(2), 3, 6)
        assert len(sup) == 8
        assert all(p == pytest.approx(1 / 8) for _, p in sup)

    def test_bernoulli_zero_support(self):
        sup = enumerate_support(IidGeneric.bernoulli(0.0), 1, 5)
        assert len(sup) == 1 and sup[0][0] == SeqM.zeros(5, 2) and sup[0][1] == 1.0

    def test_disjoint_mixture_support(self):
        head = BlockInterference(2)
        tail = ComplementaryBlocks(0.0)          # tail-only block noise
        mix = ErgodicMixture(head, tail, 0.25)
        rows, probs = support_arrays(mix, 2, 5)
        direct = {}
        for m, w in ((head, 0.25), (tail, 0.75)):
            for r, p in zip(*support_arrays(m, 2, 5)):
                direct[tuple(r)] = direct.get(tuple(r), 0.0) + w * p
        got = {tuple(r): p for r, p in zip(rows, probs)}
        assert set(got) == set(direct)
        for k in got:
            assert got[k] == pytest.approx(direct[k], rel=1e-12)

    def test_degenerate_mixture_matches_first(self):
        first = InterferencePlusNoise(0.3, 0.1)
        mix = ErgodicMixture(first, IidGeneric.bernoulli(0.5), 1.0)
        r1, p1 = support_arrays(first, 3, 8)
        r2, p2 = support_arrays(mix, 3, 8)
        assert np.array_equal(r1, r2)
        np.testing.assert_allclose(p1, p2, rtol=1e-12)


@pytest.mark.parametrize("model,s", BUNDLED, ids=IDS)
@pytest.mark.parametrize("n", [1, 4, 10])
def test_normalization(model, s, n):
    if n < s and not isinstance(model, DecayingBernoulli):
        return
    rows, probs = support_arrays(model, s, n)
    assert abs(probs.sum() - 1.0) <= 1e-9
    s_eff = model.check_state(s, n)
    oracle = np.array([2.0 ** brute_log2_prob(model, s_eff, list(r)) for r in rows])
    np.testing.assert_allclose(probs, oracle, rtol=1e-12)


@pytest.mark.parametrize("model,s", BUNDLED, ids=IDS)
def test_sampler_matches_enumeration(model, s):
    n, T = 5, 1_000_000
    rows, probs = support_arrays(model, s, n)
    M = model.M
    draws = model.sample_array(s, n, T, np.random.default_rng(0))
    counts = np.bincount(sequence_index(draws, M), minlength=M**n)
    expected = np.zeros(M**n)
    expected[sequence_index(rows, M)] = probs
    sd = np.sqrt(T * expected * (1 - expected))
    assert np.all(np.abs(counts - T * expected) <= 4 * sd + 1e-9)
    live = expected > 0
    assert counts[~live].sum() == 0
    assert stats.chisquare(counts[live], T * expected[live]).pvalue > 1e-4


@pytest.mark.parametrize("model,s", BUNDLED, ids=IDS)
def test_sampling_is_deterministic(model, s):
    a = model.sample_array(s, 20, 50, np.random.default_rng(5))
    b = model.sample_array(s, 20, 50, np.random.default_rng(5))
    assert np.array_equal(a, b)
    assert sample(model, s, 20, 9) == sample(model, s, 20, 9)


@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5), st.integers(0, 12), st.integers(1, 12),
       st.integers(0, 2**32 - 1))
def test_interference_log_prob_property(p1, p2, s, n, seed):
    m = InterferencePlusNoise(p1, p2) if p2 < p1 else InterferencePlusNoise(max(p1, p2), min(p1, p2))
    xi = sample(m, s, n, seed)
    assert log_prob(m, s, xi) == pytest.approx(brute_log2_prob(m, min(s, n), xi.tolist()),
                                               rel=1e-12, abs=1e-12)


def test_mixture_large_n_does_not_underflow():
    m = ErgodicMixture(IidGeneric.bernoulli(0.2), IidGeneric.bernoulli(0.05), 0.3)
    xi = m.sample_array(1, 10_000, 10, np.random.default_rng(0))
    lp = m.log_prob_array(1, xi)
    assert np.all(np.isfinite(lp)) and np.all(lp < -1000)


def test_state_clamped_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        assert BlockInterference(2).check_state(9, 4) == 4
    assert "clamped" in caplog.text


def test_invalid_states_and_params():
    with pytest.raises(InvalidState):
        BlockInterference(2).check_state(1.5, 4)
    with pytest.raises(InvalidState):
        DecayingBernoulli().check_state(-1, 4)
    with pytest.raises(InvalidArgument):
        IidGeneric([0.5, 0.6])
    with pytest.raises(InvalidArgument):
        model_from_dict({"kind": "Nope"})


def test_interference_order_warning(caplog):
    with caplog.at_level(logging.WARNING):
        InterferencePlusNoise(0.1, 0.3)
    assert "outside" in caplog.text


def test_decaying_accepts_real_state():
    p = DecayingBernoulli.flip_probs(2.5, 4)
    np.testing.assert_allclose(p, [2.5 / (2 * (i + 2.5)) for i in range(1, 5)])


def test_support_cap():
    with pytest.raises(CapacityExceeded):
        support_arrays(IidGeneric.bernoulli(0.1), 1, 30, cap=1000)


@pytest.mark.parametrize("model,s", BUNDLED, ids=IDS)
def test_composition_classes_oracle(model, s):
    """Class masses agree with brute-force grouping of all M^n sequences."""
    n = 6
    lp, lf = composition_classes(model, s, n)
    assert np.sum(2.0**lf) == pytest.approx(1.0, abs=1e-12)
    M = model.M
    s_eff = model.check_state(s, n)
    brute = {}
    for row in product(range(M), repeat=n):
        v = brute_log2_prob(model, s_eff, list(row))
        key = round(v, 9) if math.isfinite(v) else -math.inf
        brute[key] = brute.get(key, 0.0) + M**-n
    got = {}
    for v, f in zip(lp, lf):
        key = round(float(v), 9) if math.isfinite(v) else -math.inf
        got[key] = got.get(key, 0.0) + 2.0**f
    assert set(got) == set(brute)
    for k in got:
        assert got[k] == pytest.approx(brute[k], rel=1e-9)


class TestSchedule:
    def test_bounded_defaults(self):
        sch = StateSchedule.bounded(8)
        assert sch.fixed == (1, 2, 4, 8) and sch.is_bounded

    def test_coupled_states(self):
        sch = StateSchedule([1], [0.5, 1.0])
        assert sch.states_at(7) == [("s=1", 1), ("s(n)=ceil(0.5n)", 4), ("s(n)=n", 7)]
        assert not sch.is_bounded

    def test_round_trip(self):
        sch = StateSchedule([1, 2], [1.0])
        assert StateSchedule.from_dict(sch.to_dict()).states_at(10) == sch.states_at(10)

    def test_invalid(self):
        with pytest.raises(InvalidArgument):
            StateSchedule()
        with pytest.raises(InvalidArgument):
            StateSchedule([1], [1.0], bound=4)
        with pytest.raises(InvalidArgument):
            StateSchedule([9], bound=4)


@pytest.mark.parametrize("spec", [
    {"kind": "BlockInterference", "M": 3},
    {"kind": "InterferencePlusNoise", "p1": 0.3, "p2": 0.1},
    {"kind": "DecayingBernoulli"},
    {"kind": "IidGeneric", "p": 0.2},
    {"kind": "ComplementaryBlocks", "weight": 0.5},
    {"kind": "ErgodicMixture", "weight": 0.3, "first": {"kind": "IidGeneric", "p": 0.2},
     "second": {"kind": "IidGeneric", "p": 0.05}},
])
def test_model_dict_round_trip(spec):
    m = model_from_dict(spec)
    assert model_from_dict(m.to_dict()) == m
