"""Strong-converse diagnostics for compound additive noise.

The strong converse holds exactly when the compound sup-entropy rate of the
noise equals its compound (best-state) inf-entropy rate, ``ooline_H == uln_H``.
When it holds the per-state rates are sandwiched:
``oln_H <= inf_s oln_s <= sup_s oln_s <= uln_H``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotApplicable
from .noise import ComplementaryBlocks, NoiseModel, StateSchedule
from .spectrum import (DensitySamples, EstimationSettings, SpectrumBounds, estimate_bounds,
                       sample_densities, uniformity_from_samples)

MIN_TOLERANCE = 0.05


@dataclass
class ConverseReport:
    ooline_H: float
    uln_H: float
    oln_H: float
    inf_s_oln_s: float
    sup_s_oln_s: float
    ergodic_rate: float
    verdict: str
    gap: float
    tolerance: float
    halfwidth: float
    uniformity_verdict: str | None = None
    reduced_gap: float | None = None
    bounds: SpectrumBounds | None = field(default=None, repr=False)
    samples: DensitySamples | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        keys = ("ooline_H", "uln_H", "oln_H", "inf_s_oln_s", "sup_s_oln_s", "ergodic_rate",
                "verdict", "gap", "tolerance", "halfwidth", "uniformity_verdict", "reduced_gap")
        return {k: getattr(self, k) for k in keys}


def _verdict(gap: float, halfwidth: float) -> tuple[str, float]:
    """``holds`` within tolerance, ``fails`` when clearly beyond it, else ``inconclusive``."""
    tol = max(MIN_TOLERANCE, 3 * halfwidth)
    if abs(gap) <= tol:
        return "holds", tol
    if gap > tol + 3 * halfwidth:
        return "fails", tol
    return "inconclusive", tol


def _ergodic_rate(samples: DensitySamples) -> float:
    """Largest mean entropy density over the scheduled states at the largest n."""
    n = samples.n_grid[-1]
    return max(float(np.mean(v)) for v in samples.at(n).values())


def converse_from_samples(samples: DensitySamples, bounds: SpectrumBounds | None = None,
                          settings: EstimationSettings | None = None) -> ConverseReport:
    st = settings or EstimationSettings()
    if bounds is None:
        bounds = estimate_bounds(samples, st.epsilon, n_boot=st.n_boot, seed=st.seed)
    hw = math.hypot(bounds.halfwidth["ooline"], bounds.halfwidth["uln"])
    gap = bounds.ooline - bounds.uln
    verdict, tol = _verdict(gap, hw)
    uni = uniformity_from_samples(samples, bounds.sup_state("oln_s")).verdict
    return ConverseReport(
        ooline_H=bounds.ooline, uln_H=bounds.uln, oln_H=bounds.oln,
        inf_s_oln_s=bounds.inf_state("oln_s"), sup_s_oln_s=bounds.sup_state("oln_s"),
        ergodic_rate=_ergodic_rate(samples), verdict=verdict, gap=gap, tolerance=tol,
        halfwidth=hw, uniformity_verdict=uni,
        # with uniform noise the condition reduces to sup_s oln_s == uln_H
        reduced_gap=bounds.sup_state("oln_s") - bounds.uln if uni == "uniform" else None,
        bounds=bounds, samples=samples)


def check_condition(model: NoiseModel, schedule: StateSchedule,
                    settings: EstimationSettings | None = None) -> ConverseReport:
    """Estimate ``ooline_H`` and ``uln_H`` of the noise and classify the strong converse."""
    st = settings or EstimationSettings()
    samples = sample_densities(model, schedule, st.n_grid, st.trials, st.seed, workers=st.workers)
    return converse_from_samples(samples, settings=st)


def ordering_report(report: ConverseReport, tol: float | None = None) -> dict:
    """Check ``oln_H <= inf_s oln_s <= sup_s oln_s <= uln_H`` within ``tol``.

    A violated inequality under a ``holds`` verdict points at the estimator
    (the ordering is necessary for the strong converse); under ``fails`` it is
    the expected signature of a missing strong converse.
    """
    tol = report.tolerance if tol is None else tol
    chain = [("oln_H <= inf_s_oln_s", report.oln_H, report.inf_s_oln_s),
             ("inf_s_oln_s <= sup_s_oln_s", report.inf_s_oln_s, report.sup_s_oln_s),
             ("sup_s_oln_s <= uln_H", report.sup_s_oln_s, report.uln_H)]
    checks = {name: bool(a <= b + tol) for name, a, b in chain}
    violated = [k for k, ok in checks.items() if not ok]
    if not violated:
        status = "ordered"
    elif report.verdict == "holds":
        status = "estimator-bug"
    elif report.verdict == "fails":
        status = "necessary-condition-violated"
    else:
        status = "inconclusive"
    return {"checks": checks, "violated": violated, "status": status, "tolerance": tol}


def ergodic_coincidence(model: NoiseModel | None = None, schedule: StateSchedule | None = None,
                        settings: EstimationSettings | None = None,
                        report: ConverseReport | None = None) -> dict:
    """Compare ``ooline_H`` with the largest mean entropy rate at the largest n.

    Only meaningful when the strong converse holds; raises
    :class:`NotApplicable` otherwise.  Pass a finished ``report`` to reuse its
    samples.
    """
    if report is None:
        report = check_condition(model, schedule, settings)
    if report.verdict != "holds":
        raise NotApplicable(f"strong-converse verdict is {report.verdict!r}, not 'holds'")
    return {"ooline_H_hat": report.ooline_H,
            "mean_entropy_rate_at_worst_state": report.ergodic_rate,
            "diff": report.ergodic_rate - report.ooline_H}


def outage_profile(samples: DensitySamples, C_compound: float, delta: float = 0.05) -> dict:
    """min over states of P(|Z - C_compound| > delta) at each n, with Z the info density.

    ``samples`` holds entropy densities; with uniform input ``Z = log2 M - h``.
    """
    if samples.quantity == "entropy":
        log_m = samples.value_range[1] if samples.value_range else 1.0
        to_z = lambda v: log_m - v                               # noqa: E731
    else:
        to_z = lambda v: v                                       # noqa: E731
    table, best = {}, {}
    for n in samples.n_grid:
        out = {lab: float(np.mean(np.abs(to_z(v) - C_compound) > delta))
               for lab, v in samples.at(n).items()}
        best[n] = min(out, key=out.get)
        table[n] = out[best[n]]
    return {"delta": delta, "outage": table, "best_state": best}


@dataclass
class BestStateGapResult:
    report: ConverseReport
    ordering: dict
    component_uln: dict[str, float]


def best_state_gap_demo(p: float = 0.5, fixed_states=(1,), coupled=(0.5, 1.0),
                 settings: EstimationSettings | None = None) -> BestStateGapResult:
    """The complementary-blocks mixture whose best-state inf-entropy rate is 1/2.

    Each component alone (head-only noise for ``p = 1``, tail-only for
    ``p = 0``) has ``uln_H = 1``, yet the mixture has ``uln_H = 1/2`` while
    ``sup_s oln_s = 1``, so the last link of the ordering breaks.
    """
    st = settings or EstimationSettings()
    schedule = StateSchedule(fixed_states, coupled)
    report = check_condition(ComplementaryBlocks(p), schedule, st)
    comps = {}
    for name, w in (("head", 1.0), ("tail", 0.0)):
        comps[name] = check_condition(ComplementaryBlocks(w), schedule, st).uln_H
    return BestStateGapResult(report, ordering_report(report), comps)


CONVERSE_COLUMNS = ["model", "schedule", "ooline_H", "uln_H", "oln_H", "inf_s_oln_s",
                    "sup_s_oln_s", "ergodic_rate", "gap", "verdict"]


def converse_row(report: ConverseReport, model: str = "", schedule: str = "") -> dict:
    return {"model": model, "schedule": schedule,
            **{k: getattr(report, k) for k in CONVERSE_COLUMNS[2:]}}


__all__ = [
    "ConverseReport", "check_condition", "converse_from_samples", "ordering_report",
    "ergodic_coincidence", "outage_profile", "best_state_gap_demo", "BestStateGapResult",
    "CONVERSE_COLUMNS", "converse_row",
]
