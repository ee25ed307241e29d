"""Algebraic properties of the estimated compound operators.

Each check runs the estimator on transformed copies of the same sample set
and compares.  Exact checks allow only floating-point rounding of the
transformation itself (``ROUND_TOL``); the others allow two sample-quantile
spacings around the compared value.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .spectrum import DensitySamples, SpectrumBounds, estimate_bounds

ROUND_TOL = 1e-12


def quantile_spacing(samples: DensitySamples, value: float) -> float:
    """Gap between the order statistics adjacent to ``value`` (largest n, all states)."""
    n = samples.n_grid[-1]
    grid = np.unique(np.concatenate(list(samples.at(n).values())))
    if grid.size < 2:
        return 0.0
    i = int(np.clip(np.searchsorted(grid, value), 1, grid.size - 1))
    lo = grid[i] - grid[i - 1]
    hi = grid[min(i + 1, grid.size - 1)] - grid[i]
    return float(max(lo, hi))


def _est(samples: DensitySamples, epsilon: float) -> SpectrumBounds:
    return estimate_bounds(samples, epsilon, n_boot=0)


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol + ROUND_TOL * max(1.0, abs(a), abs(b))


def _check(name: str, passed: bool, **detail) -> dict:
    return {"check": name, "passed": bool(passed), **detail}


def ordering_checks(b: SpectrumBounds) -> list[dict]:
    out = []
    for where, d in [("limit", b.limit)] + [(f"n={n}", b.per_n[n]) for n in b.n_grid]:
        ok = d["uuline"] <= min(d["uln"], d["oln"]) and max(d["uln"], d["oln"]) <= d["ooline"]
        out.append(_check(f"ordering[{where}]", ok, **d))
    return out


def _combine(x: DensitySamples, y: DensitySamples) -> DensitySamples:
    vals = {k: v + y.values[k] for k, v in x.values.items()}
    return DensitySamples(vals, x.labels, x.n_grid, x.fixed_labels, x.quantity, x.seed, x.kind)


def property_suite(samples: DensitySamples, epsilon: float = 0.01,
                   scales: Sequence[tuple[float, float]] = ((2.0, 0.25), (-0.5, 1.0)),
                   shift: float = 0.75, other: DensitySamples | None = None) -> list[dict]:
    """Run every operator property on one synthetic sequence.

    ``other`` is an independent sequence with the same (state, n) layout, used
    for the sum sandwich ``oln X + uuline Y <= oln(X+Y) <= oln X + ooline Y``.
    """
    base = _est(samples, epsilon)
    out = ordering_checks(base)

    neg = _est(samples.map(np.negative), epsilon)
    out.append(_check("negation: uln(-X) = -oln(X)", neg.uln == -base.oln,
                      lhs=neg.uln, rhs=-base.oln))
    out.append(_check("negation: uuline(-X) = -ooline(X)", neg.uuline == -base.ooline,
                      lhs=neg.uuline, rhs=-base.ooline))

    for a, c in scales:
        sc = _est(samples.map(lambda v, a=a, c=c: a * v + c), epsilon)
        ref = a * (base.oln if a >= 0 else base.uln) + c
        out.append(_check(f"scaling: oln({a:g}X+{c:g})", _close(sc.oln, ref, 0.0),
                          lhs=sc.oln, rhs=ref))

    sh = _est(samples.map(lambda v: v + shift), epsilon)
    out.append(_check("shift by a constant", _close(sh.oln, base.oln + shift, 0.0),
                      lhs=sh.oln, rhs=base.oln + shift))

    # a deterministic sequence a_n -> shift; the estimator sees every grid point,
    # so the finite-grid allowance is the largest |a_n - shift| on the grid
    vals = {(lab, n): v + shift + 1.0 / n for (lab, n), v in samples.values.items()}
    drift = _est(DensitySamples(vals, samples.labels, samples.n_grid, samples.fixed_labels,
                                samples.quantity, samples.seed, samples.kind), epsilon)
    tol = 2 * quantile_spacing(samples, base.oln) + 1.0 / samples.n_grid[0]
    out.append(_check("shift by a convergent sequence", _close(drift.oln, base.oln + shift, tol),
                      lhs=drift.oln, rhs=base.oln + shift, tol=tol))

    if other is not None:
        yb = _est(other, epsilon)
        xy = _combine(samples, other)
        both = _est(xy, epsilon)
        tol = 2 * quantile_spacing(xy, both.oln)
        out.append(_check("sum sandwich: oln X + uuline Y <= oln(X+Y) <= oln X + ooline Y",
                          base.oln + yb.uuline <= both.oln + tol
                          and both.oln <= base.oln + yb.ooline + tol,
                          lhs=both.oln, lower=base.oln + yb.uuline, upper=base.oln + yb.ooline,
                          tol=tol))

    states = base.fixed_labels or base.labels
    max_uln_s = max(base.limit_per_state[lab]["uln_s"] for lab in states)
    min_oln_s = min(base.limit_per_state[lab]["oln_s"] for lab in states)
    tol_u = 2 * quantile_spacing(samples, base.uln)
    tol_o = 2 * quantile_spacing(samples, base.oln)
    out.append(_check("max_s uln_s <= uln", max_uln_s <= base.uln + tol_u,
                      lhs=max_uln_s, rhs=base.uln, tol=tol_u))
    out.append(_check("oln <= min_s oln_s", base.oln <= min_oln_s + tol_o,
                      lhs=base.oln, rhs=min_oln_s, tol=tol_o))
    return out


def relation_sign(samples: DensitySamples, epsilon: float = 0.01) -> str:
    """``'<'``, ``'>'`` or ``'='`` comparing uln with oln."""
    b = _est(samples, epsilon)
    return "<" if b.uln < b.oln else ">" if b.uln > b.oln else "="


__all__ = ["property_suite", "ordering_checks", "quantile_spacing", "relation_sign"]
