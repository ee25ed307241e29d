import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from compoundlab import CapacityExceeded, InvalidArgument, IsiMap, SeqM
from compoundlab.alphabet import add_mod, isi_map
from compoundlab.coding import (Codebook, FeedbackEncoder, _argmax_low, _ClassTable, codebook_for,
                                codeword_count, ensemble_error, generate_codeword, ml_decode,
                                run_cell, run_error_sweep, run_feedback_comparison, tx_csi_demo,
                                uniform_output_check)
from compoundlab.noise import (BlockInterference, IidGeneric, InterferencePlusNoise, StateSchedule,
                               support_arrays)

from oracles import birthday_collisions, load

FROZEN = load()
G0 = IsiMap(0)


class TestCodebook:
    @pytest.mark.parametrize("n,R,count", [(20, 0.25, 32), (8, 0.0, 1), (10, 0.15, 3),
                                           (60, 0.95, 2**57)])
    def test_codeword_count(self, n, R, count):
        assert codeword_count(n, R) == count

    def test_deterministic_regeneration(self):
        book = Codebook(2, 24, 0.5, seed=99)
        assert generate_codeword(book, 1234) == generate_codeword(book, 1234)
        assert np.array_equal(book.matrix()[1234], generate_codeword(book, 1234).symbols)

    def test_symbol_frequencies_uniform(self):
        book = Codebook(3, 25, 0.5, seed=4)
        syms = np.concatenate([generate_codeword(book, i).symbols for i in range(4000)])
        T = syms.size
        counts = np.bincount(syms, minlength=3)
        sd = math.sqrt(T * (1 / 3) * (2 / 3))
        assert np.all(np.abs(counts - T / 3) <= 4 * sd)

    def test_collisions_within_birthday_bound(self):
        book = Codebook(2, 32, 0.375, seed=1)          # 4096 codewords of length 32
        C = book.matrix()
        distinct = np.unique(C, axis=0).shape[0]
        expected = birthday_collisions(C.shape[0], 32)
        assert C.shape[0] - distinct <= expected + 4 * math.sqrt(expected) + 1

    def test_cells_get_distinct_codebooks(self):
        a, b = codebook_for(0, 2, 20, 0.25), codebook_for(0, 2, 20, 0.3)
        assert a.seed != b.seed
        assert codebook_for(0, 2, 20, 0.25) == a

    def test_index_range_and_cap(self):
        book = Codebook(2, 20, 0.5, seed=0)
        with pytest.raises(InvalidArgument):
            generate_codeword(book, book.count)
        with pytest.raises(CapacityExceeded):
            book.matrix(cap=100)


class TestMlDecode:
    @given(st.lists(st.lists(st.floats(-50, 0), min_size=4, max_size=4), min_size=1, max_size=6))
    def test_argmax_ties_to_lowest(self, rows):
        lp = np.array(rows)
        got = _argmax_low(lp)
        for r, k in zip(lp, got):
            assert r[k] >= r.max() - 1e-9 * max(1.0, abs(r.max()))
            assert np.all(r[:k] < r.max() - 1e-9 * max(1.0, abs(r.max())))

    def test_noiseless_decodes_exactly(self):
        model = IidGeneric.bernoulli(0.0)
        book = Codebook(2, 16, 0.5, seed=3)
        for w in range(0, book.count, 17):
            x = generate_codeword(book, w)
            for depth in (0, 2):
                y = isi_map(x, IsiMap(depth))
                decoded = ml_decode(y, book, model, 1, IsiMap(depth))
                # duplicates would decode to their lowest copy
                assert generate_codeword(book, decoded) == x

    def test_single_codeword_never_errs(self):
        r = run_cell(IidGeneric.bernoulli(0.3), "s=1", 1, 0, G0, 12, 0.0, 300, 0, method="explicit")
        assert r.error_rate == 0.0

    def test_equiprobable_noise_error(self):
        model = IidGeneric([0.5, 0.5])
        r = run_cell(model, "s=1", 1, 0, G0, 8, 0.25, 4000, 0, method="explicit")
        assert abs(r.error_rate - 0.75) <= 4 * math.sqrt(0.75 * 0.25 / 4000)
        e = run_cell(model, "s=1", 1, 0, G0, 8, 0.25, 400, 0, method="ensemble")
        assert e.error_rate == pytest.approx(0.75, abs=1e-12)

    def test_ml_decode_block_noise(self):
        model = BlockInterference(2)
        book = Codebook(2, 12, 0.5, seed=5)
        x = generate_codeword(book, 10)
        y = add_mod(x, SeqM([1, 1] + [0] * 10, 2))
        decoded = ml_decode(y, book, model, 2)
        z = (y.symbols.astype(int) - book.matrix()[decoded]) % 2
        assert not z[2:].any()

    def test_rejects_mismatched_sequence(self):
        with pytest.raises(InvalidArgument):
            ml_decode(SeqM([0, 1], 2), Codebook(2, 4, 0.5, 0), IidGeneric.bernoulli(0.1), 1)


def exact_ensemble_average(model, s, n, count):
    rows, probs = support_arrays(model, s, n)
    L = model.log_prob_array(s, rows)
    table = _ClassTable(model, s, n)
    return float(np.sum(probs * ensemble_error(*table.log_masses(L), float(count))))


class TestEnsembleEstimator:
    @pytest.mark.parametrize("key,n,count,p", [
        ("ensemble_ml_error_n3_c2_p1/2", 3, 2, 0.5),
        ("ensemble_ml_error_n3_c3_p1/2", 3, 3, 0.5),
        ("ensemble_ml_error_n3_c3_p1/5", 3, 3, 0.2),
        ("ensemble_ml_error_n4_c3_p1/10", 4, 3, 0.1),
        ("ensemble_ml_error_n3_c4_p1/4", 3, 4, 0.25),
    ])
    def test_matches_brute_force_oracle(self, key, n, count, p):
        model = IidGeneric.bernoulli(p) if p != 0.5 else IidGeneric([0.5, 0.5])
        assert exact_ensemble_average(model, 1, n, count) == pytest.approx(FROZEN[key], abs=1e-12)

    def test_impossible_competitors_count_as_less_likely(self):
        # block noise with s=0: the true noise is zero, every other word is impossible
        table = _ClassTable(BlockInterference(2), 0, 10)
        less, eq, gt = table.log_masses(np.array([0.0]))
        assert np.exp(less[0]) == pytest.approx(1 - 2.0**-10)
        assert np.exp(eq[0]) == pytest.approx(2.0**-10)
        assert gt[0] == -np.inf

    def test_agrees_with_explicit_decoding(self):
        model = IidGeneric.bernoulli(0.1)
        errs = []
        for method in ("explicit", "ensemble"):
            errs.append(run_cell(model, "s=1", 1, 0, G0, 16, 0.375, 3000, 2, method=method))
        a, b = errs
        assert abs(a.error_rate - b.error_rate) <= 4 * math.hypot(a.sigma, b.sigma) + 0.02

    def test_feedback_requires_explicit(self):
        with pytest.raises(InvalidArgument):
            run_cell(IidGeneric.bernoulli(0.1), "s=1", 1, 0, G0, 12, 0.25, 200, 0,
                     method="ensemble", encoder=FeedbackEncoder("retransmit"))


class TestSweeps:
    def test_deterministic_across_workers(self):
        model = InterferencePlusNoise(0.3, 0.1)
        a = run_cell(model, "s=2", 2, 0, G0, 16, 0.25, 600, 5, workers=1)
        b = run_cell(model, "s=2", 2, 0, G0, 16, 0.25, 600, 5, workers=3)
        assert np.array_equal(a.per_trial, b.per_trial)

    def test_compound_dominates_states(self):
        res = run_error_sweep(InterferencePlusNoise(0.3, 0.1), StateSchedule([1, 4], [0.5]), G0,
                              [12, 16], [0.25, 0.5], 300, 0)
        for r in res:
            if r.state == "compound":
                per = [q.error_rate for q in res
                       if q.n == r.n and q.R == r.R and q.state != "compound"]
                assert r.error_rate == max(per)

    def test_error_non_decreasing_in_rate(self):
        model = IidGeneric.bernoulli(0.1)
        res = [run_cell(model, "s=1", 1, 0, G0, 40, R, 1000, 1, method="ensemble")
               for R in (0.1, 0.3, 0.5, 0.7, 0.9)]
        for a, b in zip(res, res[1:]):
            assert b.error_rate >= a.error_rate - 2 * math.hypot(a.sigma, b.sigma)

    def test_isi_does_not_change_error(self):
        model = IidGeneric.bernoulli(0.1)
        a = run_cell(model, "s=1", 1, 0, IsiMap(0), 16, 0.5, 2000, 3, method="explicit")
        b = run_cell(model, "s=1", 1, 0, IsiMap(2), 16, 0.5, 2000, 3, method="explicit")
        assert abs(a.error_rate - b.error_rate) <= 2 * math.hypot(a.sigma, b.sigma) + 0.01

    def test_guards(self):
        model = IidGeneric.bernoulli(0.1)
        with pytest.raises(InvalidArgument):
            run_cell(model, "s=1", 1, 0, G0, 16, 0.5, 100, 0)
        with pytest.raises(InvalidArgument):
            run_cell(model, "s=1", 1, 0, G0, 80, 0.05, 200, 0, method="explicit")
        with pytest.raises(CapacityExceeded):
            run_cell(model, "s=1", 1, 0, G0, 40, 0.5, 200, 0, method="explicit")

    def test_zero_interference_state(self):
        model = BlockInterference(2)
        for n in (40, 80):
            assert run_cell(model, "s=0", 0, 0, G0, n, 0.5, 300, 0).error_rate < 1e-4


class TestFeedback:
    def test_noiseless_all_schemes_zero(self):
        fc = run_feedback_comparison(IidGeneric.bernoulli(0.0), StateSchedule([1]), G0,
                                     ["ignore_feedback", "retransmit", "precancel"], 12, 0.5,
                                     300, 0)
        assert all(r.error_rate == 0.0 for r in fc.baseline.values())
        for d in fc.schemes.values():
            assert all(r.error_rate == 0.0 for r in d.values())

    def test_ignore_feedback_bit_identical(self):
        fc = run_feedback_comparison(BlockInterference(2), StateSchedule([1, 2], [1.0]), IsiMap(1),
                                     ["ignore_feedback"], 12, 0.5, 300, 7)
        for lab, r in fc.baseline.items():
            assert np.array_equal(r.per_trial, fc.schemes["ignore_feedback"][lab].per_trial)

    @pytest.mark.parametrize("scheme", ["retransmit", "precancel", "ignore_feedback"])
    @pytest.mark.parametrize("depth", [0, 2])
    def test_decoder_replays_transmitter(self, scheme, depth):
        rng = np.random.default_rng(0)
        C = rng.integers(0, 3, size=(5, 9))
        xi = rng.integers(0, 3, size=(5, 9))
        enc = FeedbackEncoder(scheme)
        Z, Y = enc.run(C, 3, depth, xi=xi)
        Z2, _ = enc.run(C, 3, depth, y=Y)
        assert np.array_equal(Z, Z2)
        assert np.array_equal((Y - Z) % 3, xi)

    def test_unknown_scheme(self):
        with pytest.raises(InvalidArgument):
            FeedbackEncoder("oracle")


def test_tx_csi_demo_small():
    demo = tx_csi_demo(trials=300, seed=1)
    assert demo["with_csi"].error_rate <= 0.1
    assert demo["without_csi"].error_rate >= 0.8


class TestUniformOutput:
    def test_block_noise_with_isi(self):
        out = uniform_output_check(IsiMap(1), BlockInterference(2), 3, 10, mode="exact")
        assert out["mode"] == "exact" and out["uniform"]

    def test_skewed_ternary_noise(self):
        out = uniform_output_check(IsiMap(2), IidGeneric([0.7, 0.2, 0.1]), 1, 6, mode="exact")
        assert out["uniform"] and out["total"] == pytest.approx(1.0)

    def test_non_uniform_input_negative_control(self):
        skew = IidGeneric.bernoulli(0.3)
        out = uniform_output_check(G0, skew, 1, 6, input_pmf=[0.8, 0.2], mode="exact")
        assert not out["uniform"]
        # exact oracle: y_k independent Ber(0.2*0.7 + 0.8*0.3) so P(y = 0^6) = 0.62^6
        assert out["max_deviation"] == pytest.approx(0.62**6 - 2.0**-6, rel=1e-9)

    def test_statistical_fallback(self):
        out = uniform_output_check(IsiMap(1), IidGeneric.bernoulli(0.2), 1, 30, samples=50_000)
        assert out["mode"] == "statistical" and out["uniform"]
        bad = uniform_output_check(G0, IidGeneric.bernoulli(0.2), 1, 30, input_pmf=[0.9, 0.1],
                                   samples=50_000)
        assert not bad["uniform"]


@pytest.mark.parametrize("M,n", [(2, 10), (3, 6)])
def test_exact_uniform_output_on_bundled_models(M, n):
    from compoundlab.noise import ComplementaryBlocks, DecayingBernoulli, ErgodicMixture

    models = [(BlockInterference(M), 3), (IidGeneric(np.arange(1, M + 1) / sum(range(1, M + 1))), 1),
              (ComplementaryBlocks(0.4, M), 2)]
    if M == 2:
        models += [(InterferencePlusNoise(0.3, 0.1), 4), (DecayingBernoulli(), 2.0),
                   (ErgodicMixture(IidGeneric.bernoulli(0.2), IidGeneric.bernoulli(0.05), 0.3), 1)]
    for model, s in models:
        for depth in (0, 1, 3):
            assert uniform_output_check(IsiMap(depth), model, s, n, mode="exact")["uniform"]
