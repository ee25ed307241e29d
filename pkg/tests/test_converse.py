import pytest

from compoundlab import NotApplicable
from compoundlab.capacity import capacity_report
from compoundlab.converse import (_verdict, check_condition, converse_row, ergodic_coincidence,
                                  ordering_report, outage_profile, best_state_gap_demo)
from compoundlab.noise import (BlockInterference, ComplementaryBlocks, DecayingBernoulli, ErgodicMixture, IidGeneric,
                               InterferencePlusNoise, StateSchedule)
from compoundlab.spectrum import EstimationSettings

from oracles import load

FROZEN = load()
QUICK = EstimationSettings(n_grid=(250, 500, 1000, 2000), trials=2000, n_boot=50)
MIXTURE = ErgodicMixture(IidGeneric.bernoulli(0.2), IidGeneric.bernoulli(0.05), 0.3)


class TestVerdictRule:
    def test_holds_within_floor(self):
        assert _verdict(0.04, 0.0) == ("holds", 0.05)
        assert _verdict(-0.05, 0.0) == ("holds", 0.05)

    def test_tolerance_grows_with_halfwidth(self):
        verdict, tol = _verdict(0.08, 0.03)
        assert verdict == "holds" and tol == pytest.approx(0.09)

    def test_fails_beyond_margin(self):
        assert _verdict(0.2, 0.01)[0] == "fails"

    def test_inconclusive_band(self):
        # tol = 0.06, fail threshold 0.06 + 0.06
        assert _verdict(0.10, 0.02)[0] == "inconclusive"
        assert _verdict(-0.2, 0.01)[0] == "inconclusive"


class TestCheckCondition:
    def test_example1_unbounded(self):
        r = check_condition(BlockInterference(2), StateSchedule([1, 2], [1.0]), QUICK)
        assert r.verdict == "holds"
        assert r.ooline_H == pytest.approx(1.0, abs=0.05)
        assert r.uln_H == pytest.approx(1.0, abs=0.05)

    def test_example2_unbounded(self):
        r = check_condition(InterferencePlusNoise(0.3, 0.1), StateSchedule([1, 4], [0.5, 1.0]),
                            QUICK)
        assert r.verdict == "holds"
        assert r.ooline_H == pytest.approx(FROZEN["h_0.3"], abs=0.05)
        assert r.uln_H == pytest.approx(FROZEN["h_0.3"], abs=0.05)

    def test_example4_fails(self):
        r = check_condition(MIXTURE, StateSchedule([1]), QUICK)
        assert r.verdict == "fails"
        assert r.gap >= FROZEN["ex4_min_gap"]

    def test_report_row(self):
        r = check_condition(IidGeneric.bernoulli(0.2), StateSchedule([1]), QUICK)
        row = converse_row(r, "IidGeneric", "s=1")
        assert row["verdict"] == "holds" and row["gap"] == r.gap


class TestOrdering:
    def test_example2_bounded_all_hold(self):
        r = check_condition(InterferencePlusNoise(0.3, 0.1), StateSchedule.bounded(16), QUICK)
        rep = ordering_report(r)
        assert rep["status"] == "ordered" and not rep["violated"]
        for v in (r.oln_H, r.inf_s_oln_s, r.sup_s_oln_s, r.uln_H):
            assert v == pytest.approx(FROZEN["h_0.1"], abs=0.05)

    def test_singleton_iid_equalities(self):
        r = check_condition(IidGeneric.bernoulli(0.2), StateSchedule([1]), QUICK)
        assert r.inf_s_oln_s == r.sup_s_oln_s
        assert ordering_report(r)["status"] == "ordered"
        assert abs(r.oln_H - r.uln_H) <= 0.05

    def test_mixture_status(self):
        r = check_condition(MIXTURE, StateSchedule([1]), QUICK)
        rep = ordering_report(r)
        assert rep["violated"] == ["sup_s_oln_s <= uln_H"]
        assert rep["status"] == "necessary-condition-violated"

    def test_holds_implies_ordered_across_matrix(self):
        cases = [(BlockInterference(2), StateSchedule.bounded(8)),
                 (BlockInterference(2), StateSchedule([1, 2], [1.0])),
                 (InterferencePlusNoise(0.3, 0.1), StateSchedule([1, 4], [1.0])),
                 (DecayingBernoulli(), StateSchedule.bounded(2)),
                 (IidGeneric.bernoulli(0.3), StateSchedule([1]))]
        for model, sch in cases:
            r = check_condition(model, sch, QUICK)
            if r.verdict == "holds":
                assert ordering_report(r)["status"] == "ordered", (model, sch)


class TestErgodicCoincidence:
    def test_example2(self):
        out = ergodic_coincidence(InterferencePlusNoise(0.3, 0.1), StateSchedule([1], [1.0]),
                                  QUICK)
        assert out["ooline_H_hat"] == pytest.approx(FROZEN["h_0.3"], abs=0.05)
        assert out["mean_entropy_rate_at_worst_state"] == pytest.approx(FROZEN["h_0.3"], abs=0.01)

    def test_equiprobable(self):
        out = ergodic_coincidence(IidGeneric([0.5, 0.5]), StateSchedule([1]), QUICK)
        assert out["ooline_H_hat"] == 1.0 and out["mean_entropy_rate_at_worst_state"] == 1.0

    def test_example3_bounded(self):
        out = ergodic_coincidence(DecayingBernoulli(), StateSchedule.bounded(2), QUICK)
        assert out["ooline_H_hat"] == pytest.approx(0.0, abs=0.05)
        assert out["mean_entropy_rate_at_worst_state"] == pytest.approx(0.0, abs=0.05)

    def test_not_applicable_without_strong_converse(self):
        with pytest.raises(NotApplicable):
            ergodic_coincidence(MIXTURE, StateSchedule([1]), QUICK)


def test_outage_concentrates_when_converse_holds():
    r = check_condition(InterferencePlusNoise(0.3, 0.1), StateSchedule([1, 4], [1.0]), QUICK)
    cap = capacity_report(r.bounds, 2)
    prof = outage_profile(r.samples, cap.C_compound, delta=0.05)
    vals = [prof["outage"][n] for n in r.samples.n_grid]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= 0.05


class TestBestStateGap:
    def test_mixture_breaks_last_link(self):
        res = best_state_gap_demo(0.5, settings=QUICK)
        assert 0.45 <= res.report.uln_H <= 0.55
        assert 0.95 <= res.report.ooline_H <= 1.0
        assert res.ordering["violated"] == ["sup_s_oln_s <= uln_H"]

    def test_degenerate_weight_is_single_block_noise(self):
        st_ = EstimationSettings(n_grid=(250, 500, 1000), trials=1000, n_boot=0)
        a = check_condition(ComplementaryBlocks(1.0), StateSchedule([1], [0.5, 1.0]), st_)
        b = check_condition(BlockInterference(2), StateSchedule([1], [0.5, 1.0]), st_)
        for key in ("ooline_H", "uln_H", "oln_H"):
            assert getattr(a, key) == pytest.approx(getattr(b, key), abs=1e-12)
