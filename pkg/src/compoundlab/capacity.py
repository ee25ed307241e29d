"""Compound, worst-case and Tx-CSI capacities of the additive compound channel.

With equiprobable inputs the information density of an additive mod-M
channel is ``log2 M - h`` where ``h`` is the noise entropy density, so every
capacity here is ``log2 M`` minus a spectral bound of the noise:

* compound capacity (with or without causal feedback): ``log2 M - ooline_H``
* worst-case capacity (state known at the transmitter): ``log2 M - sup_s oln_s``
* the Tx-CSI gain is their difference and is never negative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import InsufficientData, InvalidArgument
from .spectrum import SpectrumBounds


def binary_entropy(p) -> np.ndarray | float:
    """h(p) in bits, with h(0) = h(1) = 0."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    h = np.where((p <= 0) | (p >= 1), 0.0, h)
    return float(h) if h.ndim == 0 else h


@dataclass
class CapacityReport:
    """Capacity figures in bits/symbol.  Fields not yet computed are ``None``."""

    log_M: float
    ooline_H: float | None = None
    sup_s_H_bar: float | None = None
    C_compound: float | None = None
    C_worst: float | None = None
    delta_C: float | None = None
    uniformity_verdict: str | None = None
    provenance: str = "estimated"
    tolerance: float = 0.0
    extras: dict = field(default_factory=dict)

    def merge(self, other: "CapacityReport") -> "CapacityReport":
        """Fill this report's missing fields from ``other``."""
        upd = {k: getattr(other, k) for k in ("ooline_H", "sup_s_H_bar", "C_compound", "C_worst",
                                               "delta_C", "uniformity_verdict")
               if getattr(self, k) is None and getattr(other, k) is not None}
        return replace(self, tolerance=self.tolerance + other.tolerance,
                       extras={**other.extras, **self.extras}, **upd)

    def to_dict(self) -> dict:
        return {"log_M": self.log_M, "ooline_H": self.ooline_H, "sup_s_H_bar": self.sup_s_H_bar,
                "C_compound": self.C_compound, "C_worst": self.C_worst, "delta_C": self.delta_C,
                "uniformity_verdict": self.uniformity_verdict, "provenance": self.provenance,
                "tolerance": self.tolerance}


def _log_size(M: int) -> float:
    if int(M) != M or M < 2:
        raise InvalidArgument(f"alphabet size must be an integer >= 2, got {M!r}")
    return math.log2(M)


def _need(bounds):
    if bounds is None or not isinstance(bounds, SpectrumBounds):
        raise InsufficientData("capacity estimates need spectral bounds")


def compound_capacity(bounds: SpectrumBounds, M: int) -> CapacityReport:
    """``log2 M - ooline_H``: the capacity with or without causal feedback."""
    _need(bounds)
    lm = _log_size(M)
    return CapacityReport(lm, ooline_H=bounds.ooline, C_compound=lm - bounds.ooline,
                          tolerance=bounds.halfwidth["ooline"])


def worst_case_capacity(bounds: SpectrumBounds, M: int) -> CapacityReport:
    """``log2 M`` minus the largest per-state sup-entropy rate over the fixed states."""
    _need(bounds)
    lm = _log_size(M)
    sup_H = bounds.sup_state("oln_s")
    return CapacityReport(lm, sup_s_H_bar=sup_H, C_worst=lm - sup_H,
                          tolerance=bounds.state_halfwidth("oln_s"),
                          extras={"worst_state": bounds.argmax_state("oln_s")})


def tx_csi_gain(report: CapacityReport) -> float:
    """``C_worst - C_compound``, floored at 0 when within the report's tolerance of 0.

    The report's ``tolerance`` is the sum of the bootstrap half-widths of the
    two capacity estimates.
    """
    if report.C_worst is None or report.C_compound is None:
        raise InvalidArgument("both capacities are needed for the Tx-CSI gain")
    gain = report.C_worst - report.C_compound
    return 0.0 if gain <= report.tolerance else gain


def capacity_report(bounds: SpectrumBounds, M: int, uniformity_verdict: str | None = None
                    ) -> CapacityReport:
    """Both capacities, the Tx-CSI gain and (optionally) the uniformity verdict."""
    rep = compound_capacity(bounds, M).merge(worst_case_capacity(bounds, M))
    rep.delta_C = tx_csi_gain(rep)
    rep.uniformity_verdict = uniformity_verdict
    return rep


# ---------------------------------------------------------------------------
# closed forms for the bundled examples

def _component_rates(comp: Mapping) -> tuple[float, float]:
    """(ooline_H, sup_s H_bar) of a mixture component given in closed form."""
    if "p" in comp:
        h = binary_entropy(float(comp["p"]))
        return h, h
    if "example" not in comp:
        raise InvalidArgument("a mixture component needs 'p' or 'example'")
    sub = closed_form(int(comp["example"]), comp.get("params", {}))
    return sub.ooline_H, sub.sup_s_H_bar


def closed_form(example_id: int, params: Mapping | None = None) -> CapacityReport:
    """Analytical capacities of the four bundled examples.

    ``params`` by example:

    1. block interference: ``M`` (default 2), ``bounded`` (default False)
    2. interference plus noise: ``p1``, ``p2``, ``bounded``
    3. decaying noise: ``bounded``
    4. ergodic mixture: ``first`` and ``second`` components, each either
       ``{"p": q}`` for i.i.d. Ber(q) noise or ``{"example": k, "params": {...}}``
    """
    params = dict(params or {})
    bounded = bool(params.get("bounded", False))
    if example_id == 1:
        lm = _log_size(int(params.get("M", 2)))
        ooline, sup_h = (0.0 if bounded else lm), 0.0
    elif example_id == 2:
        try:
            p1, p2 = float(params["p1"]), float(params["p2"])
        except KeyError as exc:
            raise InvalidArgument(f"example 2 needs p1 and p2 (missing {exc})") from None
        if not (0 <= p1 <= 1 and 0 <= p2 <= 1):
            raise InvalidArgument("p1 and p2 must be probabilities")
        lm = 1.0
        h1, h2 = binary_entropy(p1), binary_entropy(p2)
        sup_h = h2
        ooline = h2 if bounded else max(h1, h2)
    elif example_id == 3:
        lm = 1.0
        ooline, sup_h = (0.0 if bounded else 1.0), 0.0
    elif example_id == 4:
        try:
            w, z = params["first"], params["second"]
        except KeyError as exc:
            raise InvalidArgument(f"example 4 needs first and second components (missing {exc})") from None
        lm = 1.0
        (ow, sw), (oz, sz) = _component_rates(w), _component_rates(z)
        ooline, sup_h = max(ow, oz), max(sw, sz)
    else:
        raise InvalidArgument(f"unknown example {example_id!r}; expected 1, 2, 3 or 4")
    cc, cw = lm - ooline, lm - sup_h
    return CapacityReport(lm, ooline_H=ooline, sup_s_H_bar=sup_h, C_compound=cc, C_worst=cw,
                          delta_C=max(cw - cc, 0.0),
                          uniformity_verdict="uniform" if math.isclose(cw, cc) else "non-uniform",
                          provenance="closed_form", extras={"example": example_id, **params})


# ---------------------------------------------------------------------------
# saddle point

def saddle_point_check(bounds: SpectrumBounds, M: int, uniformity_verdict: str | None = None,
                       tol: float = 0.05) -> dict:
    """Compare min over states of the per-state capacity with the compound capacity.

    ``minimax`` is the capacity the transmitter can guarantee knowing the state
    (the worst per-state capacity) and ``maximin`` the compound capacity.  A
    saddle point is declared when their gap is within ``tol`` and the noise
    was found uniform (or no uniformity verdict was supplied).
    """
    _need(bounds)
    lm = _log_size(M)
    labels = bounds.fixed_labels or bounds.labels
    per_state = {lab: lm - bounds.limit_per_state[lab]["oln_s"] for lab in labels}
    minimax = min(per_state.values())
    maximin = lm - bounds.ooline
    gap = minimax - maximin
    if len(bounds.labels) == 1:
        gap = 0.0                       # min over one state is the compound value
    saddle = gap <= tol and uniformity_verdict in (None, "uniform")
    return {"minimax": minimax, "maximin": maximin, "gap": gap, "per_state": per_state,
            "verdict": "saddle point" if saddle else "no saddle point"}


# ---------------------------------------------------------------------------
# CSV rows

CAPACITY_COLUMNS = ["example_id", "params", "provenance", "C_compound", "C_worst", "delta_C",
                    "uniformity", "gap"]


def capacity_row(report: CapacityReport, example_id="", params: Mapping | None = None,
                 gap: float | None = None) -> dict:
    params = params or {}
    return {"example_id": example_id,
            "params": ";".join(f"{k}={v}" for k, v in params.items()),
            "provenance": report.provenance, "C_compound": report.C_compound,
            "C_worst": report.C_worst, "delta_C": report.delta_C,
            "uniformity": report.uniformity_verdict or "", "gap": "" if gap is None else gap}


__all__ = [
    "CapacityReport", "binary_entropy", "compound_capacity", "worst_case_capacity",
    "tx_csi_gain", "capacity_report", "closed_form", "saddle_point_check",
    "CAPACITY_COLUMNS", "capacity_row",
]
