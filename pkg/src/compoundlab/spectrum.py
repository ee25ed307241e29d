"""Entropy/information densities and finite-sample compound spectral bounds.

The four compound operators are estimated from per-(state, n) empirical
distributions.  With ``F`` the empirical CDF and ``G(x) = P(X >= x)``:

* ``uuline`` = sup{x : sup_s F_s(x) -> 0}      ``ooline`` = inf{x : sup_s G_s(x) -> 0}
* ``uln``    = sup{x : inf_s F_s(x) -> 0}      ``oln``    = inf{x : inf_s G_s(x) -> 0}

"-> 0" is unobservable, so a tail sequence over the n-grid counts as
vanishing when its value at the largest n is at most ``epsilon``, or when it
decreases significantly at every grid step (one-sided z-test) and ends below
``1 - epsilon``.  The end-point guard keeps the estimator's ordering
``uuline <= min(uln, oln) <= max(uln, oln) <= ooline`` exact.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .alphabet import SeqM
from .errors import InfeasibleSample, InsufficientData, InvalidArgument
from .noise import NoiseModel, StateSchedule, log_prob

BOUND_NAMES = ("uuline", "uln", "oln", "ooline")
MIN_SAMPLES = 1000
BOOT_CANDIDATES = 4096
CHUNK = 1024
DEFAULT_N_GRID = (250, 500, 1000, 2000, 4000)


@dataclass(frozen=True)
class EstimationSettings:
    """Monte Carlo knobs shared by the spectrum, capacity and converse layers."""

    n_grid: tuple[int, ...] = DEFAULT_N_GRID
    trials: int = 4000
    epsilon: float = 0.01
    seed: int = 0
    n_boot: int = 200
    workers: int = 1

    def scaled(self, factor: float) -> "EstimationSettings":
        """Same settings with ``trials`` multiplied by ``factor`` (at least the estimator minimum)."""
        return replace(self, trials=max(MIN_SAMPLES, int(round(self.trials * factor))))

    def to_dict(self) -> dict:
        return {"n_grid": list(self.n_grid), "trials": self.trials, "epsilon": self.epsilon,
                "seed": self.seed, "n_boot": self.n_boot, "workers": self.workers}


@dataclass(frozen=True)
class DensitySample:
    state: object
    n: int
    value: float
    flagged: bool = False


def entropy_density(model: NoiseModel, s, xi: SeqM) -> DensitySample:
    """-(1/n) log2 p_s(xi), in bits per symbol."""
    lp = log_prob(model, s, xi)
    if lp == -np.inf:
        raise InfeasibleSample("sequence has zero probability under this state")
    return DensitySample(s, xi.n, -lp / xi.n)


def info_density_uniform_input(model: NoiseModel, s, xi: SeqM) -> DensitySample:
    """(1/n) i(X^n; Y^n | s) under equiprobable input: log2 M minus the entropy density."""
    h = entropy_density(model, s, xi)
    return DensitySample(s, xi.n, model.alphabet.log_size - h.value)


def divergence_density(p_model: NoiseModel, q_model: NoiseModel, s, xi: SeqM) -> DensitySample:
    """(1/n) log2 p_s(xi)/q_s(xi); ``+inf`` and ``flagged`` when xi is outside q's support."""
    lp = log_prob(p_model, s, xi)
    if lp == -np.inf:
        raise InfeasibleSample("sequence lies outside the support of p")
    lq = log_prob(q_model, s, xi)
    if lq == -np.inf:
        return DensitySample(s, xi.n, np.inf, flagged=True)
    return DensitySample(s, xi.n, (lp - lq) / xi.n)


# ---------------------------------------------------------------------------
# Monte Carlo sampling of densities

@dataclass
class DensitySamples:
    """Density values keyed by ``(state_label, n)``."""

    values: dict[tuple[str, int], np.ndarray]
    labels: list[str]
    n_grid: list[int]
    fixed_labels: list[str] = field(default_factory=list)
    quantity: str = "entropy"
    seed: int | None = None
    kind: str = ""
    value_range: tuple[float, float] | None = None

    def __getitem__(self, key):
        return self.values[key]

    def map(self, fn) -> "DensitySamples":
        """Same layout with ``fn`` applied to every sample array."""
        return DensitySamples({k: fn(v) for k, v in self.values.items()}, list(self.labels),
                              list(self.n_grid), list(self.fixed_labels), self.quantity,
                              self.seed, self.kind, None)

    def at(self, n: int) -> dict[str, np.ndarray]:
        return {lab: self.values[(lab, n)] for lab in self.labels}


def _density_chunk(model, s, n, size, seed, key, quantity):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
    xi = model.sample_array(s, n, size, rng)
    h = -model.log_prob_array(s, xi) / n
    if quantity == "info_uniform":
        return model.alphabet.log_size - h
    return h


def sample_densities(model: NoiseModel, schedule: StateSchedule, n_grid: Sequence[int],
                     trials: int, seed: int, quantity: str = "entropy",
                     workers: int = 1) -> DensitySamples:
    """Draw ``trials`` noise blocks per scheduled state and blocklength.

    Each chunk of draws gets its own seed derived from
    ``(seed, state index, n, chunk index)``, so the output does not depend on
    ``workers`` or on execution order.
    """
    if quantity not in ("entropy", "info_uniform"):
        raise InvalidArgument(f"unknown density quantity {quantity!r}")
    n_grid = sorted(int(n) for n in n_grid)
    schedule.validate(model, n_grid)
    tasks = []
    for n in n_grid:
        for idx, (label, s) in enumerate(schedule.states_at(n)):
            for c, start in enumerate(range(0, trials, CHUNK)):
                size = min(CHUNK, trials - start)
                tasks.append(((label, n), (model, s, n, size, seed, (idx, n, c), quantity)))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda t: _density_chunk(*t[1]), tasks))
    else:
        parts = [_density_chunk(*t[1]) for t in tasks]
    values: dict[tuple[str, int], list[np.ndarray]] = {}
    for (key, _), part in zip(tasks, parts):
        values.setdefault(key, []).append(part)
    return DensitySamples({k: np.concatenate(v) for k, v in values.items()}, schedule.labels,
                          n_grid, schedule.fixed_labels, quantity, seed, model.kind,
                          (0.0, model.alphabet.log_size))


# ---------------------------------------------------------------------------
# estimation

@dataclass
class SpectrumBounds:
    """Compound and per-state spectral bounds.

    ``per_n`` and ``per_state`` hold the epsilon-level bounds at each single
    blocklength; ``limit`` and ``limit_per_state`` the asymptotic proxies
    that use the whole grid.  ``halfwidth`` holds bootstrap half-widths of the
    limit quantities.
    """

    epsilon: float
    n_grid: list[int]
    labels: list[str]
    fixed_labels: list[str]
    per_n: dict[int, dict[str, float]]
    per_state: dict[tuple[str, int], dict[str, float]]
    limit: dict[str, float]
    limit_per_state: dict[str, dict[str, float]]
    halfwidth: dict[str, float]
    halfwidth_per_state: dict[str, dict[str, float]]
    trials: int

    @property
    def uuline(self) -> float:
        return self.limit["uuline"]

    @property
    def uln(self) -> float:
        return self.limit["uln"]

    @property
    def oln(self) -> float:
        return self.limit["oln"]

    @property
    def ooline(self) -> float:
        return self.limit["ooline"]

    def _state_labels(self) -> list[str]:
        return self.fixed_labels or self.labels

    def sup_state(self, which: str = "oln_s") -> float:
        """Max over fixed states (all states when none are fixed) of a per-state limit."""
        return max(self.limit_per_state[lab][which] for lab in self._state_labels())

    def inf_state(self, which: str = "oln_s") -> float:
        return min(self.limit_per_state[lab][which] for lab in self._state_labels())

    def argmax_state(self, which: str = "oln_s") -> str:
        labs = self._state_labels()
        return max(labs, key=lambda lab: self.limit_per_state[lab][which])

    def state_halfwidth(self, which: str = "oln_s") -> float:
        """Half-width attached to :meth:`sup_state`."""
        return self.halfwidth_per_state[self.argmax_state(which)][which]


def _vanishing(T: np.ndarray, N: np.ndarray, epsilon: float, z: float) -> np.ndarray:
    """Does each tail-probability sequence (grid on axis -2) tend to zero?"""
    ok = T[..., -1, :] <= epsilon
    K = T.shape[-2]
    if K >= 3:
        a, b = T[..., :-1, :], T[..., 1:, :]
        na, nb = N[..., :-1, :], N[..., 1:, :]
        se = np.sqrt(a * (1 - a) / na + b * (1 - b) / nb)
        steps = np.all(a - b > z * se, axis=-2)
        ok |= steps & (T[..., -1, :] < 1 - epsilon)
    return ok


def _sup_prefix(cand: np.ndarray, ok: np.ndarray) -> float:
    """sup{x : condition holds for every candidate <= x}; the first failing candidate."""
    bad = np.flatnonzero(~ok)
    return float(cand[bad[0]]) if bad.size else float(cand[-1])


def _inf_suffix(cand: np.ndarray, ok: np.ndarray) -> float:
    bad = np.flatnonzero(~ok)
    return float(cand[bad[-1]]) if bad.size else float(cand[0])


def _bounds_from_cdfs(cand, F, G, N, epsilon, z):
    """All four compound bounds plus per-state bounds; F, G, N shaped (L, K, C)."""
    vF = _vanishing(F, N, epsilon, z)                     # (L, C)
    vG = _vanishing(G, N, epsilon, z)
    Fmin, Gmin = F.min(axis=0), G.min(axis=0)
    if np.all(N == N[0]):
        NF = NG = N[0]
    else:                                                 # sample size of the minimizing state
        NF = np.take_along_axis(N, np.argmin(F, axis=0)[None], 0)[0]
        NG = np.take_along_axis(N, np.argmin(G, axis=0)[None], 0)[0]
    inf_F = _vanishing(Fmin, NF, epsilon, z) | vF.any(axis=0)
    inf_G = _vanishing(Gmin, NG, epsilon, z) | vG.any(axis=0)
    out = {
        "uuline": _sup_prefix(cand, vF.all(axis=0)),
        "uln": _sup_prefix(cand, inf_F),
        "oln": _inf_suffix(cand, inf_G),
        "ooline": _inf_suffix(cand, vG.all(axis=0)),
    }
    per_state = [{"uln_s": _sup_prefix(cand, vF[i]), "oln_s": _inf_suffix(cand, vG[i])}
                 for i in range(F.shape[0])]
    return out, per_state


class _Grid:
    """Sample arrays mapped to a common candidate grid, for fast (re)evaluation.

    With ``max_candidates`` the grid is thinned to pooled-sample quantiles
    (always keeping the extremes); F and G stay exact at the retained points.
    The bootstrap uses a thinned grid, the point estimate never does.
    """

    def __init__(self, arrays: list[list[np.ndarray]], max_candidates: int | None = None):
        flat = np.concatenate([a for row in arrays for a in row])
        cand = np.unique(flat)
        if max_candidates is not None and cand.size > max_candidates:
            cand = np.unique(np.quantile(flat, np.linspace(0.0, 1.0, max_candidates),
                                         method="inverted_cdf"))
        self.cand = cand
        # lo[v] = first candidate >= v, hi[v] = last candidate <= v
        self.lo = [[np.searchsorted(cand, a, side="left") for a in row] for row in arrays]
        self.hi = [[np.searchsorted(cand, a, side="right") - 1 for a in row] for row in arrays]
        self.L, self.K, self.C = len(arrays), len(arrays[0]), cand.size

    def cdfs(self, rng: np.random.Generator | None = None):
        F = np.empty((self.L, self.K, self.C))
        G = np.empty_like(F)
        N = np.empty((self.L, self.K, 1))
        for i in range(self.L):
            for k in range(self.K):
                lo, hi = self.lo[i][k], self.hi[i][k]
                if rng is not None:
                    pick = rng.integers(0, lo.size, lo.size)
                    lo, hi = lo[pick], hi[pick]
                F[i, k] = np.cumsum(np.bincount(lo, minlength=self.C)) / lo.size        # P(X <= c)
                G[i, k] = np.cumsum(np.bincount(hi, minlength=self.C)[::-1])[::-1] / hi.size  # P(X >= c)
                N[i, k] = lo.size
        return F, G, np.broadcast_to(N, F.shape)


def _check_order(b: dict[str, float], where: str):
    lo, hi = min(b["uln"], b["oln"]), max(b["uln"], b["oln"])
    if not (b["uuline"] <= lo and hi <= b["ooline"]):
        raise AssertionError(f"spectral ordering violated ({where}): {b}")


def estimate_bounds(samples: DensitySamples | Mapping[tuple[str, int], Sequence[float]],
                    epsilon: float = 0.01, n_boot: int = 200, seed: int = 0,
                    min_samples: int = MIN_SAMPLES, z: float = 3.0,
                    fixed_labels: Sequence[str] | None = None,
                    value_range: tuple[float, float] | None = None) -> SpectrumBounds:
    """Estimate compound and per-state spectral bounds from grouped density samples.

    ``samples`` maps ``(state_label, n)`` to sample arrays; every label must be
    present at every blocklength.  ``fixed_labels`` names the states that count
    as genuine (blocklength-independent) states for per-state suprema; for a
    :class:`DensitySamples` it defaults to the schedule's fixed states.

    ``value_range`` is the interval known to contain every limit (``[0, log2 M]``
    for entropy densities of an M-ary process).  Finite-n densities may overshoot
    it by O(1/n); limit estimates are clipped back into it.
    """
    if not 0 < epsilon < 0.5:
        raise InvalidArgument(f"epsilon must lie in (0, 0.5), got {epsilon}")
    if isinstance(samples, DensitySamples):
        values, labels, n_grid = samples.values, samples.labels, samples.n_grid
        if fixed_labels is None:
            fixed_labels = samples.fixed_labels
        if value_range is None:
            value_range = samples.value_range
    else:
        values = {k: np.asarray(v, dtype=float) for k, v in samples.items()}
        labels = list(dict.fromkeys(k[0] for k in values))
        n_grid = sorted({k[1] for k in values})
    if not labels:
        raise InvalidArgument("no states in the sample set")
    fixed_labels = list(fixed_labels) if fixed_labels is not None else list(labels)
    arrays = []
    for lab in labels:
        row = []
        for n in n_grid:
            if (lab, n) not in values:
                raise InsufficientData(f"no samples for state {lab} at n={n}")
            a = np.asarray(values[(lab, n)], dtype=float)
            if a.size < min_samples:
                raise InsufficientData(f"{a.size} samples for ({lab}, n={n}); need >= {min_samples}")
            if not np.all(np.isfinite(a)):
                raise InvalidArgument(f"non-finite density values for ({lab}, n={n})")
            row.append(a)
        arrays.append(row)

    grid = _Grid(arrays)

    def limits(F, G, N, cand=grid.cand):
        b, ps = _bounds_from_cdfs(cand, F, G, N, epsilon, z)
        if value_range is not None:
            b = {k: float(np.clip(v, *value_range)) for k, v in b.items()}
            ps = [{k: float(np.clip(v, *value_range)) for k, v in d.items()} for d in ps]
        return b, ps

    F, G, N = grid.cdfs()
    limit, lps = limits(F, G, N)
    _check_order(limit, "limit")
    per_n, per_state = {}, {}
    for k, n in enumerate(n_grid):
        sl = slice(k, k + 1)
        b, ps = _bounds_from_cdfs(grid.cand, F[:, sl], G[:, sl], N[:, sl], epsilon, z)
        _check_order(b, f"n={n}")
        per_n[n] = b
        for lab, d in zip(labels, ps):
            per_state[(lab, n)] = d

    halfwidth = {k: 0.0 for k in BOUND_NAMES}
    hw_state = {lab: {"uln_s": 0.0, "oln_s": 0.0} for lab in labels}
    if n_boot > 0:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xB007,)))
        bgrid = _Grid(arrays, BOOT_CANDIDATES) if grid.C > BOOT_CANDIDATES else grid
        boot = {k: [] for k in BOUND_NAMES}
        boot_state = {lab: {"uln_s": [], "oln_s": []} for lab in labels}
        for _ in range(n_boot):
            bF, bG, bN = bgrid.cdfs(rng)
            b, ps = limits(bF, bG, bN, bgrid.cand)
            for k in BOUND_NAMES:
                boot[k].append(b[k])
            for lab, d in zip(labels, ps):
                for k in d:
                    boot_state[lab][k].append(d[k])
        halfwidth = {k: _halfwidth(v) for k, v in boot.items()}
        hw_state = {lab: {k: _halfwidth(v) for k, v in d.items()} for lab, d in boot_state.items()}

    return SpectrumBounds(
        epsilon=epsilon, n_grid=list(n_grid), labels=list(labels), fixed_labels=fixed_labels,
        per_n=per_n, per_state=per_state, limit=limit,
        limit_per_state=dict(zip(labels, lps)), halfwidth=halfwidth,
        halfwidth_per_state=hw_state,
        trials=int(min(a.size for row in arrays for a in row)))


def _halfwidth(values) -> float:
    lo, hi = np.percentile(values, [2.5, 97.5])
    return float(hi - lo) / 2


def estimate_spectrum(model: NoiseModel, schedule: StateSchedule,
                      settings: EstimationSettings | None = None, quantity: str = "entropy",
                      ) -> tuple[SpectrumBounds, DensitySamples]:
    """Sample densities for a model/schedule and estimate their spectral bounds."""
    st = settings or EstimationSettings()
    samples = sample_densities(model, schedule, st.n_grid, st.trials, st.seed, quantity, st.workers)
    return estimate_bounds(samples, st.epsilon, n_boot=st.n_boot, seed=st.seed), samples


# ---------------------------------------------------------------------------
# uniformity (Tx-CSI gain) diagnostic

@dataclass
class UniformityReport:
    sup_H: float
    deltas: list[float]
    n_grid: list[int]
    table: dict[tuple[int, float], float]
    verdict: str
    floor: float

    def row(self, delta: float) -> list[float]:
        return [self.table[(n, delta)] for n in self.n_grid]


def uniformity_from_samples(samples: DensitySamples, sup_H: float, deltas=(0.05, 0.1, 0.2),
                            floor: float = 0.05, z: float = 3.0) -> UniformityReport:
    """Tabulate max_s P(h > sup_H + delta) over the n-grid and classify the trend.

    ``uniform`` when, for every delta, the table ends at or below ``floor``
    without a significant rise along the grid; ``non-uniform`` when some delta
    ends above ``floor``; ``inconclusive`` otherwise.
    """
    deltas = [float(d) for d in np.atleast_1d(deltas)]
    if any(d <= 0 for d in deltas):
        raise InvalidArgument("delta must be positive")
    table, counts = {}, {}
    for n in samples.n_grid:
        per = samples.at(n)
        for d in deltas:
            tails = {lab: float(np.mean(v > sup_H + d)) for lab, v in per.items()}
            worst = max(tails, key=tails.get)
            table[(n, d)] = tails[worst]
            counts[(n, d)] = per[worst].size
    verdict = "uniform"
    for d in deltas:
        row = np.array([table[(n, d)] for n in samples.n_grid])
        N = np.array([counts[(n, d)] for n in samples.n_grid])
        if row[-1] > floor:
            verdict = "non-uniform"
            break
        se = np.sqrt(row[:-1] * (1 - row[:-1]) / N[:-1] + row[1:] * (1 - row[1:]) / N[1:])
        if np.any(row[1:] - row[:-1] > z * se + 1e-12):
            verdict = "inconclusive"
    return UniformityReport(sup_H, deltas, list(samples.n_grid), table, verdict, floor)


def check_uniformity(model: NoiseModel, schedule: StateSchedule, n_grid: Sequence[int],
                     delta=(0.05, 0.1, 0.2), trials: int = 4000, epsilon: float = 0.01,
                     seed: int = 0, floor: float = 0.05) -> UniformityReport:
    """Is the compound noise uniform, i.e. is there no Tx-CSI gain?

    The reference level ``sup_s H(Xi|s)`` is the largest per-state sup-entropy
    rate estimate over the schedule's fixed states.
    """
    samples = sample_densities(model, schedule, n_grid, trials, seed)
    bounds = estimate_bounds(samples, epsilon, n_boot=0)
    return uniformity_from_samples(samples, bounds.sup_state("oln_s"), delta, floor)


# ---------------------------------------------------------------------------
# CSV rows

SPECTRUM_COLUMNS = ["kind", "state", "n", "epsilon", "uuline", "uln", "oln", "ooline",
                    "uln_s", "oln_s", "bootstrap_halfwidth", "trials", "seed"]


def spectrum_rows(bounds: SpectrumBounds, kind: str = "", seed=None) -> list[dict]:
    """Rows for the spectrum CSV: one per (state, n) plus one ``n=limit`` row per state."""
    rows = []
    for n in bounds.n_grid:
        b = bounds.per_n[n]
        for lab in bounds.labels:
            d = bounds.per_state[(lab, n)]
            rows.append({"kind": kind, "state": lab, "n": n, "epsilon": bounds.epsilon,
                         **{k: b[k] for k in BOUND_NAMES}, **d,
                         "bootstrap_halfwidth": "", "trials": bounds.trials, "seed": seed})
    hw = max(bounds.halfwidth.values())
    for lab in bounds.labels:
        d = bounds.limit_per_state[lab]
        rows.append({"kind": kind, "state": lab, "n": "limit", "epsilon": bounds.epsilon,
                     **bounds.limit, **d,
                     "bootstrap_halfwidth": max(hw, *bounds.halfwidth_per_state[lab].values()),
                     "trials": bounds.trials, "seed": seed})
    return rows


def bootstrap_sigma(halfwidth: float) -> float:
    """Convert a 95% bootstrap half-width to an approximate standard error."""
    return halfwidth / 1.96 if halfwidth else 0.0


__all__ = [
    "EstimationSettings", "DEFAULT_N_GRID", "DensitySample", "DensitySamples", "SpectrumBounds", "UniformityReport",
    "entropy_density", "info_density_uniform_input", "divergence_density",
    "sample_densities", "estimate_bounds", "estimate_spectrum",
    "check_uniformity", "uniformity_from_samples", "spectrum_rows", "SPECTRUM_COLUMNS",
]

