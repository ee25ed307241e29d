"""Synthetic compound sequences for exercising the spectral operators directly.

Each sequence is a family ``X_sn`` of real random variables indexed by a
state and a blocklength; the generators return :class:`DensitySamples` so the
estimator treats them like noise entropy densities.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .spectrum import DEFAULT_N_GRID, DensitySamples

Sampler = Callable[[int, int, np.random.Generator], np.ndarray]


def build_samples(name: str, states: Sequence[tuple[str, Sampler]], fixed_labels: Sequence[str],
                  n_grid: Sequence[int], trials: int, seed: int) -> DensitySamples:
    """Draw ``trials`` values per (state, n); seeds depend on (seed, state index, n) only."""
    n_grid = sorted(int(n) for n in n_grid)
    values = {}
    for idx, (label, draw) in enumerate(states):
        for n in n_grid:
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(idx, n)))
            values[(label, n)] = np.asarray(draw(n, trials, rng), dtype=float)
    return DensitySamples(values, [lab for lab, _ in states], n_grid, list(fixed_labels),
                          "synthetic", seed, name)


def uniform_pair(n_grid=DEFAULT_N_GRID, trials: int = 100_000, seed: int = 0,
                 intervals=((0.0, 2.0), (1.0, 3.0))) -> DensitySamples:
    """Two states, X_1 ~ uniform[0, 2] and X_2 ~ uniform[1, 3], the same for every n.

    The compound bounds are (uuline, uln, oln, ooline) = (0, 1, 2, 3), so here
    uln < oln.
    """
    states = [(f"s={i + 1}", (lambda n, k, rng, a=a, b=b: rng.uniform(a, b, k)))
              for i, (a, b) in enumerate(intervals)]
    return build_samples("uniform_pair", states, [lab for lab, _ in states], n_grid, trials, seed)


def coupled_bernoulli(n_grid=DEFAULT_N_GRID, trials: int = 100_000, seed: int = 0,
                      fixed=(1, 10, 1_000, 100_000), coupled=(100,)) -> DensitySamples:
    """X_sn ~ Ber(1 - p_sn) with p_sn = n / (n + s).

    For every fixed s the variable collapses to 0, so each per-state bound is
    0; a state growing faster than n (``s = alpha n``, alpha >> 1) keeps it
    near 1.  The compound bounds are uln = 1 > oln = 0.
    """
    def draw(s_of_n):
        return lambda n, k, rng: (rng.random(k) < s_of_n(n) / (n + s_of_n(n))).astype(float)

    states = [(f"s={s:g}", draw(lambda n, s=s: s)) for s in fixed]
    states += [(f"s(n)={a:g}n", draw(lambda n, a=a: a * n)) for a in coupled]
    return build_samples("coupled_bernoulli", states, [f"s={s:g}" for s in fixed],
                         n_grid, trials, seed)


def normal_pair(n_grid=DEFAULT_N_GRID, trials: int = 20_000, seed: int = 0,
                means=(0.0, 1.0)) -> DensitySamples:
    """X_sn ~ N(mean_s, 1/n): concentrating states, all four bounds at the extreme means."""
    states = [(f"s={i + 1}", (lambda n, k, rng, m=m: m + rng.standard_normal(k) / np.sqrt(n)))
              for i, m in enumerate(means)]
    return build_samples("normal_pair", states, [lab for lab, _ in states], n_grid, trials, seed)


def constant(value: float = 0.5, n_grid=DEFAULT_N_GRID, trials: int = 1000) -> DensitySamples:
    """Degenerate single-state sequence X = value."""
    return build_samples("constant", [("s=1", lambda n, k, rng: np.full(k, value))], ["s=1"],
                         n_grid, trials, 0)


BATTERY = {
    "uniform_pair": uniform_pair,
    "coupled_bernoulli": coupled_bernoulli,
    "normal_pair": normal_pair,
}


BATTERY_TRIALS = 20_000


def battery(trials_scale: float = 1.0, seed: int = 0) -> dict[str, DensitySamples]:
    """The bundled synthetic sequences, with trial counts scaled by ``trials_scale``."""
    trials = max(1000, int(BATTERY_TRIALS * trials_scale))
    return {name: fn(trials=trials, seed=seed) for name, fn in BATTERY.items()}


__all__ = ["build_samples", "uniform_pair", "coupled_bernoulli", "normal_pair", "constant",
           "BATTERY", "battery"]
