"""Bundled replication presets and the runners that turn them into checks.

A preset names a model, a state schedule, estimator settings and the
reference values it should reproduce.  ``run_preset`` executes one and
returns an :class:`Outcome` holding pass/fail checks plus CSV-ready rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import find_peaks

from .alphabet import IsiMap
from .capacity import binary_entropy, capacity_report, capacity_row, closed_form, saddle_point_check
from .coding import (coding_row, run_cell, run_feedback_comparison, tx_csi_demo)
from .converse import converse_from_samples, converse_row, ordering_report, best_state_gap_demo
from .noise import DecayingBernoulli, StateSchedule, model_from_dict
from .props import property_suite, relation_sign
from .spectrum import (DensitySamples, EstimationSettings, estimate_bounds, sample_densities,
                       spectrum_rows)
from .synthetic import battery, coupled_bernoulli, uniform_pair

TOL = 0.05


@dataclass
class Outcome:
    name: str
    checks: list[dict] = field(default_factory=list)
    rows: dict[str, list[dict]] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def check(self, name: str, value, passed: bool, reference=None, tolerance=None):
        self.checks.append({"preset": self.name, "check": name, "value": _plain(value),
                            "reference": _plain(reference), "tolerance": tolerance,
                            "passed": bool(passed)})

    def near(self, name: str, value: float, reference: float, tol: float = TOL):
        self.check(name, value, abs(value - reference) <= tol, reference, tol)

    def within(self, name: str, value: float, lo: float, hi: float):
        self.check(name, value, lo <= value <= hi, [lo, hi])


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


@dataclass(frozen=True)
class Preset:
    name: str
    kind: str                              # spectrum | synthetic | props | best-state-gap | coding
    description: str
    example: int | None = None
    model: dict | None = None
    schedule: dict | None = None
    settings: dict = field(default_factory=dict)
    closed: dict | None = None
    expect: dict = field(default_factory=dict)

    @property
    def bounded(self) -> bool:
        return bool(self.schedule) and self.schedule.get("bound") is not None

    def with_bound(self, S: int) -> "Preset":
        sch = StateSchedule.bounded(S, [s for s in self.schedule["fixed"] if s <= S] or None)
        closed = dict(self.closed or {})
        closed["params"] = {**closed.get("params", {}), "bounded": True}
        return replace(self, name=f"{self.name.rsplit('-', 1)[0]}-bounded{S}",
                       schedule=sch.to_dict(), closed=closed,
                       expect={**self.expect, "uniformity": "uniform"})


EX1_MODEL = {"kind": "BlockInterference", "M": 2}
EX2_MODEL = {"kind": "InterferencePlusNoise", "p1": 0.3, "p2": 0.1}
EX3_MODEL = {"kind": "DecayingBernoulli"}
EX4_MODEL = {"kind": "ErgodicMixture", "weight": 0.3,
             "first": {"kind": "IidGeneric", "p": 0.2}, "second": {"kind": "IidGeneric", "p": 0.05}}


def _example_presets() -> list[Preset]:
    ex2 = {"p1": 0.3, "p2": 0.1}
    ex4 = {"first": {"p": 0.2}, "second": {"p": 0.05}}
    return [
        Preset("ex1-bounded", "spectrum", "block interference, states s <= 8", 1, EX1_MODEL,
               StateSchedule.bounded(8).to_dict(), closed={"params": {"M": 2, "bounded": True}},
               expect={"uniformity": "uniform", "converse": "holds"}),
        Preset("ex1-unbounded", "spectrum", "block interference, states growing with n", 1,
               EX1_MODEL, StateSchedule([1, 2, 4, 8], [0.5, 1]).to_dict(),
               closed={"params": {"M": 2, "bounded": False}},
               expect={"uniformity": "non-uniform", "converse": "holds"}),
        Preset("ex2-bounded", "spectrum", "interference plus noise, states s <= 16", 2, EX2_MODEL,
               StateSchedule.bounded(16).to_dict(), closed={"params": {**ex2, "bounded": True}},
               expect={"uniformity": "uniform", "converse": "holds"}),
        Preset("ex2-unbounded", "spectrum", "interference plus noise, states growing with n", 2,
               EX2_MODEL, StateSchedule([1, 2, 4, 8, 16], [0.5, 1]).to_dict(),
               closed={"params": {**ex2, "bounded": False}},
               expect={"uniformity": "non-uniform", "converse": "holds"}),
        Preset("ex3-bounded", "spectrum", "decaying noise, states s <= 2", 3, EX3_MODEL,
               StateSchedule.bounded(2).to_dict(), closed={"params": {"bounded": True}},
               expect={"uniformity": "uniform", "converse": "holds"}),
        Preset("ex3-unbounded", "spectrum", "decaying noise, state s(n) = 1000 n", 3, EX3_MODEL,
               StateSchedule([1, 2], [1000]).to_dict(), closed={"params": {"bounded": False}},
               expect={"uniformity": "non-uniform", "converse": "holds"}),
        Preset("ex4-mixture", "spectrum", "ergodic mixture of Ber(0.2) (weight 0.3) and Ber(0.05)",
               4, EX4_MODEL, StateSchedule([1]).to_dict(), closed={"params": ex4},
               expect={"uniformity": "uniform", "converse": "fails",
                       "min_gap": float(binary_entropy(0.2) - binary_entropy(0.05) - 0.1)}),
    ]


PRESETS: dict[str, Preset] = {p.name: p for p in _example_presets() + [
    Preset("synthetic-uniform-pair", "synthetic", "two uniform states, bounds (0, 1, 2, 3)",
           settings={"trials": 100_000, "epsilon": 0.01},
           expect={"bounds": {"uuline": 0.0, "uln": 1.0, "oln": 2.0, "ooline": 3.0}}),
    Preset("synthetic-coupled-bernoulli", "synthetic",
           "Bernoulli states with p = n/(n+s), uln 1 > oln 0",
           settings={"trials": 100_000, "epsilon": 0.02},
           expect={"uln_min": 0.95, "oln_max": 0.05}),
    Preset("props", "props", "operator property suite on the synthetic battery"),
    Preset("best-state-gap", "best-state-gap",
           "complementary blocks: best-state inf-entropy rate 1/2",
           settings={"trials": 4000}),
    Preset("coding-phase", "coding", "error trends below and above capacity, Ber(0.05) noise",
           model={"kind": "IidGeneric", "p": 0.05},
           settings={"trials": 1000, "n_grid": [20, 40, 60], "rates": [0.25, 0.95]}),
    Preset("coding-plateau", "coding", "mixture error plateau at the bad-component weight", 4,
           model=EX4_MODEL, settings={"trials": 1000, "n_grid": [24, 32, 40], "rates": [0.5]}),
    Preset("feedback-null", "coding", "feedback encoders against the no-feedback baseline",
           settings={"trials": 1000}),
    Preset("tx-csi", "coding", "transmitter state knowledge on block interference", 1,
           settings={"trials": 1000}),
]}


def select(example: int | None = None, bounded: int | None = None) -> list[Preset]:
    """Presets for ``replicate-paper``: everything, one example, or one bounded variant."""
    if example is None:
        if bounded is not None:
            return [p.with_bound(bounded) for p in PRESETS.values()
                    if p.kind == "spectrum" and p.bounded]
        return list(PRESETS.values())
    chosen = [p for p in PRESETS.values() if p.example == example]
    if bounded is not None:
        chosen = [p.with_bound(bounded) for p in chosen if p.kind == "spectrum" and p.bounded]
    return chosen


def _settings(p: Preset, seed: int, trials_scale: float, workers: int) -> EstimationSettings:
    keys = {k: v for k, v in p.settings.items() if k in ("trials", "epsilon", "n_grid", "n_boot")}
    if "n_grid" in keys:
        keys["n_grid"] = tuple(keys["n_grid"])
    st = replace(EstimationSettings(), seed=seed, workers=workers, **keys)
    return st.scaled(trials_scale)


# ---------------------------------------------------------------------------
# runners

def entropy_decay_rows(states=(1, 10, 100), n: int = 200) -> list[dict]:
    """(i, s, h(p_i)) with p_i = s / (2(i + s)): the per-symbol entropy decay of the decaying noise."""
    m = DecayingBernoulli()
    return [{"i": i + 1, "s": s, "h_p_i": float(h)}
            for s in states for i, h in enumerate(binary_entropy(m.flip_probs(s, n)))]


def mode_rows(samples: DensitySamples, bins: int = 100, smooth: float = 2.0,
              prominence: float = 0.25) -> list[dict]:
    """Modes of each state's density histogram at the largest n.

    The histogram is Gaussian-smoothed over ``smooth`` bins and a peak must
    rise ``prominence`` times the tallest bin above its surroundings, so a
    two-component spectrum yields two modes and sampling ripple yields none.
    ``mass`` is the raw histogram mass of the peak bin.
    """
    n = samples.n_grid[-1]
    rows = []
    for lab, v in samples.at(n).items():
        lo, hi = float(v.min()), float(v.max())
        if hi - lo < 1e-12:
            rows.append({"state": lab, "n": n, "mode": lo, "mass": 1.0})
            continue
        hist, edges = np.histogram(v, bins=bins, range=(lo, hi))
        mass = hist / hist.sum()
        sm = gaussian_filter1d(mass, smooth, mode="constant")
        padded = np.concatenate([[0.0], sm, [0.0]])
        peaks, _ = find_peaks(padded, prominence=prominence * sm.max())
        for k in peaks - 1:
            rows.append({"state": lab, "n": n, "mode": float((edges[k] + edges[k + 1]) / 2),
                         "mass": float(mass[k])})
    return rows


def _run_spectrum(p: Preset, st: EstimationSettings) -> Outcome:
    out = Outcome(p.name)
    model = model_from_dict(p.model)
    schedule = StateSchedule.from_dict(p.schedule)
    samples = sample_densities(model, schedule, st.n_grid, st.trials, st.seed, workers=st.workers)
    bounds = estimate_bounds(samples, st.epsilon, n_boot=st.n_boot, seed=st.seed)
    conv = converse_from_samples(samples, bounds, st)
    cap = capacity_report(bounds, model.M, conv.uniformity_verdict)
    ref = closed_form(p.example, p.closed["params"])
    saddle = saddle_point_check(bounds, model.M, conv.uniformity_verdict)

    out.near("C_compound", cap.C_compound, ref.C_compound)
    out.near("C_worst", cap.C_worst, ref.C_worst)
    out.near("delta_C", cap.delta_C, ref.delta_C)
    if "uniformity" in p.expect:
        out.check("uniformity verdict", cap.uniformity_verdict,
                  cap.uniformity_verdict == p.expect["uniformity"], p.expect["uniformity"])
    want = p.expect.get("converse")
    if want:
        out.check("strong converse verdict", conv.verdict, conv.verdict == want, want)
        if want == "holds":
            out.check("|ooline_H - uln_H|", conv.gap, abs(conv.gap) <= TOL, 0.0, TOL)
            order = ordering_report(conv)
            out.check("ordering under strong converse", order["status"],
                      order["status"] == "ordered", "ordered")
        else:
            out.check("ooline_H - uln_H", conv.gap, conv.gap >= p.expect["min_gap"],
                      f">= {p.expect['min_gap']:.4f}")
    if p.bounded:
        out.check("saddle point", saddle["verdict"], saddle["verdict"] == "saddle point",
                  "saddle point")

    out.rows["spectrum"] = spectrum_rows(bounds, model.kind, st.seed)
    out.rows["capacity"] = [capacity_row(cap, p.example, p.closed["params"], saddle["gap"]),
                            capacity_row(ref, p.example, p.closed["params"])]
    out.rows["converse"] = [converse_row(conv, model.kind, p.name)]
    out.rows["modes"] = [{"preset": p.name, **r} for r in mode_rows(samples)]
    if p.example == 3:
        out.rows["entropy_decay"] = entropy_decay_rows()
    out.summary = {"estimates": {**cap.to_dict(), "converse": conv.to_dict(),
                                 "saddle": {k: v for k, v in saddle.items() if k != "per_state"}},
                   "closed_form": ref.to_dict(), "settings": st.to_dict(),
                   "model": p.model, "schedule": p.schedule}
    return out


def _run_synthetic(p: Preset, st: EstimationSettings) -> Outcome:
    out = Outcome(p.name)
    if p.name == "synthetic-uniform-pair":
        samples = uniform_pair(st.n_grid, st.trials, st.seed)
        b = estimate_bounds(samples, st.epsilon, n_boot=st.n_boot, seed=st.seed)
        for k, v in p.expect["bounds"].items():
            out.near(k, b.limit[k], v)
    else:
        samples = coupled_bernoulli(st.n_grid, st.trials, st.seed)
        b = estimate_bounds(samples, st.epsilon, n_boot=st.n_boot, seed=st.seed)
        for lab in samples.fixed_labels:
            d = b.limit_per_state[lab]
            out.check(f"uln_s = oln_s = 0 [{lab}]", [d["uln_s"], d["oln_s"]],
                      d["uln_s"] == 0.0 and d["oln_s"] == 0.0, [0.0, 0.0])
        out.check("uln", b.uln, b.uln >= p.expect["uln_min"], f">= {p.expect['uln_min']}")
        out.check("oln", b.oln, b.oln <= p.expect["oln_max"], f"<= {p.expect['oln_max']}")
    out.rows["spectrum"] = spectrum_rows(b, samples.kind, st.seed)
    out.summary = {"estimates": b.limit, "halfwidth": b.halfwidth, "settings": st.to_dict()}
    return out


def _run_props(p: Preset, st: EstimationSettings, trials_scale: float) -> Outcome:
    out = Outcome(p.name)
    xs, ys = battery(trials_scale, st.seed), battery(trials_scale, st.seed + 1)
    rows = []
    for name, samples in xs.items():
        for c in property_suite(samples, other=ys[name]):
            out.check(f"{name}: {c['check']}", c.get("lhs"), c["passed"], c.get("rhs"), c.get("tol"))
            rows.append({"sequence": name, "check": c["check"], "passed": c["passed"],
                         "lhs": c.get("lhs", ""), "rhs": c.get("rhs", ""), "tol": c.get("tol", "")})
    signs = {name: relation_sign(s) for name, s in xs.items()}
    out.check("some sequence has uln < oln", signs, "<" in signs.values(), "<")
    out.check("some sequence has uln > oln", signs, ">" in signs.values(), ">")
    out.rows["props"] = rows
    out.summary = {"relations": signs}
    return out


def _run_best_state_gap(p: Preset, st: EstimationSettings) -> Outcome:
    out = Outcome(p.name)
    res = best_state_gap_demo(0.5, settings=st)
    r = res.report
    out.within("uln_H", r.uln_H, 0.45, 0.55)
    out.within("ooline_H", r.ooline_H, 0.95, 1.0)
    out.within("sup_s oln_s", r.sup_s_oln_s, 0.95, 1.0)
    out.within("oln_H", r.oln_H, 0.45, 0.55)
    out.check("last ordering link violated", res.ordering["violated"],
              res.ordering["violated"] == ["sup_s_oln_s <= uln_H"], ["sup_s_oln_s <= uln_H"])
    for name, v in res.component_uln.items():
        out.within(f"component uln_H [{name}]", v, 0.95, 1.0)
    out.rows["converse"] = [converse_row(r, "ComplementaryBlocks", p.name)]
    out.rows["modes"] = [{"preset": p.name, **row} for row in mode_rows(r.samples)]
    out.summary = {"estimates": r.to_dict(), "components": res.component_uln,
                   "ordering": res.ordering}
    return out


def mixture_outage_oracle(rate: float, n: int, trials: int, seed: int) -> float:
    """Pr{(1/n) i(X;Y) < rate} for the bundled mixture under equiprobable input."""
    model = model_from_dict(EX4_MODEL)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x0AC1E, n)))
    xi = model.sample_array(1, n, trials, rng)
    z = 1.0 + model.log_prob_array(1, xi) / n
    return float(np.mean(z < rate))


def _run_coding(p: Preset, seed: int, trials_scale: float, workers: int) -> Outcome:
    out = Outcome(p.name)
    trials = max(200, int(round(p.settings.get("trials", 1000) * trials_scale)))
    rows = []
    g = IsiMap(0)
    if p.name == "coding-phase":
        model = model_from_dict(p.model)
        n_grid, rates = p.settings["n_grid"], p.settings["rates"]
        for R in rates:
            trends = []
            for k in range(3):                       # three disjoint master seeds
                s_k = seed + 1000 * k
                res = [run_cell(model, "s=1", 1, 0, g, n, R, trials, s_k, method="ensemble",
                                workers=workers) for n in n_grid]
                rows += [coding_row(r) for r in res]
                e = [r.error_rate for r in res]
                trends.append(e)
                if R < 0.5:
                    out.check(f"R={R} seed {s_k}: strictly decreasing", e,
                              all(a > b for a, b in zip(e, e[1:])), "decreasing")
                else:
                    out.check(f"R={R} seed {s_k}: strictly increasing", e,
                              all(a < b for a, b in zip(e, e[1:])), "increasing")
                    out.check(f"R={R} seed {s_k}: error at n={n_grid[-1]}", e[-1], e[-1] >= 0.9,
                              ">= 0.9")
    elif p.name == "coding-plateau":
        model = model_from_dict(p.model)
        R = p.settings["rates"][0]
        res = [run_cell(model, "s=1", 1, 0, g, n, R, trials, seed, method="ensemble",
                        workers=workers) for n in p.settings["n_grid"]]
        rows += [coding_row(r) for r in res]
        last = res[-1]
        out.within(f"error at n={last.n}", last.error_rate, 0.2, 0.4)
        oracle = mixture_outage_oracle(R, 4000, 20_000, seed)
        out.near("outage oracle at n=4000", oracle, 0.3, 0.05)
    elif p.name == "feedback-null":
        cases = [("ex1-unbounded", EX1_MODEL, StateSchedule([1, 2, 4, 8], [0.5, 1]), 20, 0.4),
                 ("ex1-bounded", EX1_MODEL, StateSchedule.bounded(8), 20, 0.4),
                 ("ex2-unbounded", EX2_MODEL, StateSchedule([1, 2, 4, 8, 16], [0.5, 1]), 24, 0.25),
                 ("ex2-bounded", EX2_MODEL, StateSchedule.bounded(16), 24, 0.25)]
        for name, spec, sch, n, R in cases:
            fc = run_feedback_comparison(model_from_dict(spec), sch, g,
                                         ["ignore_feedback", "retransmit", "precancel"], n, R,
                                         trials, seed)
            for sc in ("retransmit", "precancel"):
                zs = [fc.gain[sc][lab] / sd if sd > 0 else (math.inf if fc.gain[sc][lab] > 0 else 0.0)
                      for lab, sd in fc.gain_sigma[sc].items()]
                out.check(f"{name} {sc}: max gain / sigma", max(zs), max(zs) <= 3.0, "<= 3")
            same = all(np.array_equal(fc.baseline[lab].per_trial,
                                      fc.schemes["ignore_feedback"][lab].per_trial)
                       for lab in fc.baseline)
            out.check(f"{name} ignore_feedback identical to baseline", same, same, True)
            for sc, d in [("baseline", fc.baseline)] + list(fc.schemes.items()):
                rows += [coding_row(r) for r in d.values()]
    elif p.name == "tx-csi":
        demo = tx_csi_demo(trials=trials, seed=seed)
        out.check("with Tx CSI (s=4, n=80, R=0.5)", demo["with_csi"].error_rate,
                  demo["with_csi"].error_rate <= 0.1, "<= 0.1")
        out.check("without Tx CSI (s=n, n=40, R=0.5)", demo["without_csi"].error_rate,
                  demo["without_csi"].error_rate >= 0.8, ">= 0.8")
        rows += [coding_row(r) for r in demo.values()]
    out.rows["coding"] = rows
    out.summary = {"trials": trials}
    return out


def run_preset(p: Preset, seed: int = 0, trials_scale: float = 1.0, workers: int = 1) -> Outcome:
    st = _settings(p, seed, trials_scale, workers)
    runners: dict[str, Callable[[], Outcome]] = {
        "spectrum": lambda: _run_spectrum(p, st),
        "synthetic": lambda: _run_synthetic(p, st),
        "props": lambda: _run_props(p, st, trials_scale),
        "best-state-gap": lambda: _run_best_state_gap(p, st),
        "coding": lambda: _run_coding(p, seed, trials_scale, workers),
    }
    return runners[p.kind]()


__all__ = ["Preset", "PRESETS", "Outcome", "select", "run_preset", "entropy_decay_rows",
           "mode_rows",
           "mixture_outage_oracle"]
