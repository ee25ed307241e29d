"""State-indexed additive noise processes and uncertainty-set schedules.

Every model gives exact sampling and exact log2-probabilities for a state
``s`` and blocklength ``n``.  Models also describe a *segmentation* of the
positions ``0..n-1`` such that the probability of a sequence depends only on
the symbol composition inside each segment.  That partition is what makes the
exact small-instance oracles and the random-coding ensemble computations
tractable.
"""
from __future__ import annotations

import logging
import math
from functools import reduce
from itertools import product
from typing import Any, Iterator, Sequence

import numpy as np

from .alphabet import Alphabet, SeqM, symbol_dtype
from .errors import CapacityExceeded, InvalidArgument, InvalidState

log = logging.getLogger(__name__)

DEFAULT_SUPPORT_CAP = 2**20


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _log2(x):
    with np.errstate(divide="ignore"):
        return np.log2(x)


def _check_prob(p: float, name: str) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise InvalidArgument(f"{name} must lie in [0, 1], got {p}")
    return p


def _check_pmf(pmf, M: int | None = None) -> np.ndarray:
    pmf = np.asarray(pmf, dtype=float)
    if pmf.ndim != 1 or pmf.size < 2:
        raise InvalidArgument("pmf must be a 1-d array with at least two entries")
    if M is not None and pmf.size != M:
        raise InvalidArgument(f"pmf has {pmf.size} entries but M={M}")
    if np.any(pmf < 0) or not np.isclose(pmf.sum(), 1.0, atol=1e-12):
        raise InvalidArgument("pmf must be non-negative and sum to 1")
    return pmf / pmf.sum()


class NoiseModel:
    """Base class; subclasses fill in the ``_``-prefixed hooks."""

    kind: str = ""

    def __init__(self, M: int):
        self.alphabet = Alphabet(M)

    @property
    def M(self) -> int:
        return self.alphabet.M

    # -- state handling -------------------------------------------------
    def check_state(self, s, n: int):
        """Validate ``s`` for blocklength ``n`` and return the effective state."""
        return s

    # -- hooks ----------------------------------------------------------
    def _sample(self, s, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def _log_prob(self, s, xi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _support_rows(self, s, n: int, cap: int) -> np.ndarray:
        raise NotImplementedError

    def segments(self, s, n: int) -> list[tuple[int, int]]:
        """Half-open position ranges on which the pmf depends only on symbol counts."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    # -- public batch API -----------------------------------------------
    def sample_array(self, s, n: int, size: int, rng) -> np.ndarray:
        s = self.check_state(s, n)
        return self._sample(s, n, int(size), as_generator(rng))

    def log_prob_array(self, s, xi: np.ndarray) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi))
        s = self.check_state(s, xi.shape[-1])
        return self._log_prob(s, xi)

    def __repr__(self) -> str:
        params = {k: v for k, v in self.to_dict().items() if k != "kind"}
        return f"{self.kind}({params})"

    def __eq__(self, other) -> bool:
        return isinstance(other, NoiseModel) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(repr(self))


def _int_state(s, n: int, lo: int = 0, kind: str = "") -> int:
    if isinstance(s, (bool, np.bool_)) or float(s) != int(s):
        raise InvalidState(f"{kind} needs an integer state, got {s!r}")
    s = int(s)
    if s < lo:
        raise InvalidState(f"{kind} state must be >= {lo}, got {s}")
    if s > n:
        log.warning("%s: state %d exceeds blocklength %d, clamped to s=n", kind, s, n)
        s = n
    return s


def _iid_rows(pmf: np.ndarray, shape, rng) -> np.ndarray:
    M = pmf.size
    if np.allclose(pmf, 1.0 / M):
        return rng.integers(0, M, size=shape, dtype=np.int64)
    return rng.choice(M, size=shape, p=pmf)


def _bernoulli_rows(p: np.ndarray, shape, rng) -> np.ndarray:
    return (rng.random(shape) < p).astype(np.int64)


def _iid_log_prob(log_pmf: np.ndarray, block: np.ndarray) -> np.ndarray:
    if block.shape[-1] == 0:
        return np.zeros(block.shape[0])
    return log_pmf[block.astype(np.int64)].sum(axis=-1)


class BlockInterference(NoiseModel):
    """First ``s`` symbols i.i.d. from ``head_pmf`` (default equiprobable), the rest zero."""

    kind = "BlockInterference"

    def __init__(self, M: int = 2, head_pmf=None):
        super().__init__(M)
        self.head_pmf = np.full(M, 1.0 / M) if head_pmf is None else _check_pmf(head_pmf, M)
        self._uniform = head_pmf is None
        self._log_pmf = _log2(self.head_pmf)

    def check_state(self, s, n):
        return _int_state(s, n, 0, self.kind)

    def _sample(self, s, n, size, rng):
        out = np.zeros((size, n), dtype=np.int64)
        out[:, :s] = _iid_rows(self.head_pmf, (size, s), rng)
        return out

    def _log_prob(self, s, xi):
        lp = _iid_log_prob(self._log_pmf, xi[:, :s])
        return np.where(np.any(xi[:, s:] != 0, axis=1), -np.inf, lp)

    def _support_rows(self, s, n, cap):
        symbols = np.flatnonzero(self.head_pmf > 0)
        count = symbols.size**s
        if count > cap:
            raise CapacityExceeded(f"support of {count} sequences exceeds cap {cap}")
        rows = np.zeros((count, n), dtype=np.int64)
        if s:
            rows[:, :s] = np.array(list(product(symbols, repeat=s)), dtype=np.int64).reshape(count, s)
        return rows

    def segments(self, s, n):
        return [(0, s), (s, n)]

    def to_dict(self):
        return {"kind": self.kind, "M": self.M,
                "head_pmf": None if self._uniform else self.head_pmf.tolist()}


class InterferencePlusNoise(NoiseModel):
    """Binary: first ``s`` symbols Ber(p1) (interference), remainder Ber(p2) (noise)."""

    kind = "InterferencePlusNoise"

    def __init__(self, p1: float, p2: float):
        super().__init__(2)
        self.p1 = _check_prob(p1, "p1")
        self.p2 = _check_prob(p2, "p2")
        if not (0.0 <= self.p2 < self.p1 <= 0.5):
            log.warning("InterferencePlusNoise outside 0 <= p2 < p1 <= 1/2 (p1=%g, p2=%g)",
                        self.p1, self.p2)

    def check_state(self, s, n):
        return _int_state(s, n, 0, self.kind)

    def _probs(self, s, n):
        p = np.full(n, self.p2)
        p[:s] = self.p1
        return p

    def _sample(self, s, n, size, rng):
        return _bernoulli_rows(self._probs(s, n), (size, n), rng)

    def _log_prob(self, s, xi):
        p = self._probs(s, xi.shape[-1])
        return _bernoulli_log_prob(p, xi)

    def _support_rows(self, s, n, cap):
        return _bernoulli_support(self._probs(s, n), cap)

    def segments(self, s, n):
        return [(0, s), (s, n)]

    def to_dict(self):
        return {"kind": self.kind, "p1": self.p1, "p2": self.p2}


class DecayingBernoulli(NoiseModel):
    """Binary, independent Ber(p_i) with p_i = s / (2 (i + s)), i = 1..n; s >= 0 real."""

    kind = "DecayingBernoulli"

    def __init__(self):
        super().__init__(2)

    def check_state(self, s, n):
        s = float(s)
        if not np.isfinite(s) or s < 0:
            raise InvalidState(f"DecayingBernoulli state must be a finite real >= 0, got {s}")
        return s

    @staticmethod
    def flip_probs(s: float, n: int) -> np.ndarray:
        i = np.arange(1, n + 1, dtype=float)
        return s / (2.0 * (i + s))

    def _sample(self, s, n, size, rng):
        return _bernoulli_rows(self.flip_probs(s, n), (size, n), rng)

    def _log_prob(self, s, xi):
        return _bernoulli_log_prob(self.flip_probs(s, xi.shape[-1]), xi)

    def _support_rows(self, s, n, cap):
        return _bernoulli_support(self.flip_probs(s, n), cap)

    def segments(self, s, n):
        return [(i, i + 1) for i in range(n)]

    def to_dict(self):
        return {"kind": self.kind}


class IidGeneric(NoiseModel):
    """State-independent i.i.d. noise with an arbitrary pmf on [0, M)."""

    kind = "IidGeneric"

    def __init__(self, pmf):
        pmf = _check_pmf(pmf)
        super().__init__(pmf.size)
        self.pmf = pmf
        self._log_pmf = _log2(pmf)

    @classmethod
    def bernoulli(cls, p: float) -> "IidGeneric":
        p = _check_prob(p, "p")
        return cls([1.0 - p, p])

    def _sample(self, s, n, size, rng):
        return _iid_rows(self.pmf, (size, n), rng)

    def _log_prob(self, s, xi):
        return _iid_log_prob(self._log_pmf, xi)

    def _support_rows(self, s, n, cap):
        symbols = np.flatnonzero(self.pmf > 0)
        count = symbols.size**n
        if count > cap:
            raise CapacityExceeded(f"support of {count} sequences exceeds cap {cap}")
        return np.array(list(product(symbols, repeat=n)), dtype=np.int64).reshape(count, n)

    def segments(self, s, n):
        return [(0, n)]

    def to_dict(self):
        return {"kind": self.kind, "pmf": self.pmf.tolist()}


class _TwoBranch(NoiseModel):
    """Shared machinery for models that pick one of two branches once per block."""

    weight: float

    def _branch_log_probs(self, s, xi) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _log_prob(self, s, xi):
        a, b = self._branch_log_probs(s, xi)
        # logaddexp2 factors out the larger branch, so large n does not underflow
        with np.errstate(divide="ignore"):
            la = a + math.log2(self.weight) if self.weight > 0 else np.full_like(a, -np.inf)
            lb = b + math.log2(1.0 - self.weight) if self.weight < 1 else np.full_like(b, -np.inf)
        return np.logaddexp2(la, lb)


class ErgodicMixture(_TwoBranch):
    """With probability ``weight`` the whole block comes from ``first``, else from ``second``.

    The state is forwarded unchanged to both components.
    """

    kind = "ErgodicMixture"

    def __init__(self, first: NoiseModel, second: NoiseModel, weight: float):
        if first.M != second.M:
            raise InvalidArgument("mixture components must share the alphabet")
        super().__init__(first.M)
        self.first, self.second = first, second
        self.weight = _check_prob(weight, "weight")

    def check_state(self, s, n):
        self.first.check_state(s, n)
        self.second.check_state(s, n)
        return s

    def _sample(self, s, n, size, rng):
        pick_first = rng.random(size) < self.weight
        out = np.empty((size, n), dtype=np.int64)
        k = int(pick_first.sum())
        if k:
            out[pick_first] = self.first.sample_array(s, n, k, rng)
        if size - k:
            out[~pick_first] = self.second.sample_array(s, n, size - k, rng)
        return out

    def _branch_log_probs(self, s, xi):
        return self.first.log_prob_array(s, xi), self.second.log_prob_array(s, xi)

    def _support_rows(self, s, n, cap):
        parts = []
        if self.weight > 0:
            parts.append(self.first._support_rows(self.first.check_state(s, n), n, cap))
        if self.weight < 1:
            parts.append(self.second._support_rows(self.second.check_state(s, n), n, cap))
        rows = np.unique(np.concatenate(parts), axis=0)
        if rows.shape[0] > cap:
            raise CapacityExceeded(f"support of {rows.shape[0]} sequences exceeds cap {cap}")
        return rows

    def segments(self, s, n):
        return _refine(self.first.segments(self.first.check_state(s, n), n),
                       self.second.segments(self.second.check_state(s, n), n), n)

    def to_dict(self):
        return {"kind": self.kind, "weight": self.weight,
                "first": self.first.to_dict(), "second": self.second.to_dict()}


class ComplementaryBlocks(_TwoBranch):
    """Either the first ``s`` or the last ``n - s`` symbols are i.i.d. equiprobable, the rest zero.

    The corrupted part is chosen once per block: the head with probability ``weight``.
    """

    kind = "ComplementaryBlocks"

    def __init__(self, weight: float = 0.5, M: int = 2):
        super().__init__(M)
        self.weight = _check_prob(weight, "weight")

    def check_state(self, s, n):
        return _int_state(s, n, 0, self.kind)

    def _sample(self, s, n, size, rng):
        b = rng.integers(0, self.M, size=(size, n), dtype=np.int64)
        head = rng.random(size) < self.weight
        b[head, s:] = 0
        b[~head, :s] = 0
        return b

    def _branch_log_probs(self, s, xi):
        n = xi.shape[-1]
        lm = math.log2(self.M)
        head_zero = ~np.any(xi[:, :s] != 0, axis=1)
        tail_zero = ~np.any(xi[:, s:] != 0, axis=1)
        a = np.where(tail_zero, -s * lm, -np.inf)
        b = np.where(head_zero, -(n - s) * lm, -np.inf)
        return a, b

    def _support_rows(self, s, n, cap):
        count = self.M**s + self.M ** (n - s)
        if count > cap:
            raise CapacityExceeded(f"support of {count} sequences exceeds cap {cap}")
        head = BlockInterference(self.M)._support_rows(s, n, cap)
        tail = BlockInterference(self.M)._support_rows(n - s, n, cap)[:, ::-1]
        return np.unique(np.concatenate([head, tail]), axis=0)

    def segments(self, s, n):
        return [(0, s), (s, n)]

    def to_dict(self):
        return {"kind": self.kind, "weight": self.weight, "M": self.M}


def _bernoulli_log_prob(p: np.ndarray, xi: np.ndarray) -> np.ndarray:
    ones = xi.astype(bool)
    terms = np.where(ones, _log2(p), _log2(1.0 - p))
    return terms.sum(axis=-1)


def _bernoulli_support(p: np.ndarray, cap: int) -> np.ndarray:
    choices = [(0,) if q == 0 else (1,) if q == 1 else (0, 1) for q in p]
    count = reduce(lambda acc, c: acc * len(c), choices, 1)
    if count > cap:
        raise CapacityExceeded(f"support of {count} sequences exceeds cap {cap}")
    return np.array(list(product(*choices)), dtype=np.int64).reshape(count, len(p))


def _refine(a: list[tuple[int, int]], b: list[tuple[int, int]], n: int) -> list[tuple[int, int]]:
    cuts = sorted({0, n} | {x for seg in a + b for x in seg})
    return [(lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]) if hi > lo]


# ---------------------------------------------------------------------------
# construction from plain dicts (CLI configs)

_KINDS = {cls.kind: cls for cls in
          (BlockInterference, InterferencePlusNoise, DecayingBernoulli, IidGeneric,
           ErgodicMixture, ComplementaryBlocks)}


def model_from_dict(spec: dict[str, Any]) -> NoiseModel:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _KINDS:
        raise InvalidArgument(f"unknown noise kind {kind!r}; expected one of {sorted(_KINDS)}")
    if kind == "ErgodicMixture":
        return ErgodicMixture(model_from_dict(spec["first"]), model_from_dict(spec["second"]),
                              spec["weight"])
    if kind == "IidGeneric" and "p" in spec:
        return IidGeneric.bernoulli(spec["p"])
    try:
        return _KINDS[kind](**spec)
    except TypeError as exc:
        raise InvalidArgument(f"bad parameters for {kind}: {exc}") from None


# ---------------------------------------------------------------------------
# single-sequence API

def sample(model: NoiseModel, s, n: int, seed) -> SeqM:
    """One exact draw from p_s on [0, M)^n."""
    row = model.sample_array(s, n, 1, seed)[0]
    return SeqM(row, model.alphabet)


def log_prob(model: NoiseModel, s, xi: SeqM) -> float:
    """Exact log2 p_s(xi); ``-inf`` for sequences outside the support."""
    if xi.M != model.M:
        raise InvalidArgument(f"sequence alphabet M={xi.M} does not match model M={model.M}")
    return float(model.log_prob_array(s, xi.symbols[None, :])[0])


def enumerate_support(model: NoiseModel, s, n: int,
                      cap: int = DEFAULT_SUPPORT_CAP) -> list[tuple[SeqM, float]]:
    """All sequences of non-zero probability with their exact probabilities."""
    rows, probs = support_arrays(model, s, n, cap)
    return [(SeqM(r, model.alphabet), float(p)) for r, p in zip(rows, probs)]


def support_arrays(model: NoiseModel, s, n: int, cap: int = DEFAULT_SUPPORT_CAP):
    """Array form of :func:`enumerate_support`: ``(rows, probabilities)``."""
    s = model.check_state(s, n)
    rows = model._support_rows(s, n, cap)
    probs = np.exp2(model.log_prob_array(s, rows))
    keep = probs > 0
    return rows[keep].astype(symbol_dtype(model.M)), probs[keep]


# ---------------------------------------------------------------------------
# likelihood spectrum of a uniformly drawn competitor sequence

def composition_classes(model: NoiseModel, s, n: int,
                        cap: int = DEFAULT_SUPPORT_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Partition [0, M)^n into classes of equal probability under ``p_s``.

    Returns ``(log2_prob, log2_fraction)`` per class, where ``log2_fraction``
    is log2 of (class size / M^n), i.e. the probability that an equiprobable
    sequence falls in the class.
    """
    s = model.check_state(s, n)
    M = model.M
    segs = [(lo, hi) for lo, hi in model.segments(s, n) if hi > lo]
    per_seg = [list(_compositions(hi - lo, M)) for lo, hi in segs]
    total = math.prod(len(c) for c in per_seg)
    if total > cap:
        raise CapacityExceeded(f"{total} composition classes exceed cap {cap}")
    reps = np.zeros((total, n), dtype=np.int64)
    log_count = np.zeros(total)
    for k, combo in enumerate(product(*per_seg)):
        for (lo, hi), comp in zip(segs, combo):
            reps[k, lo:hi] = np.repeat(np.arange(M), comp)
            log_count[k] += _log2_multinomial(comp)
    lp = model.log_prob_array(s, reps)
    return lp, log_count - n * math.log2(M)


def _compositions(length: int, M: int) -> Iterator[tuple[int, ...]]:
    if M == 1:
        yield (length,)
        return
    for first in range(length + 1):
        for rest in _compositions(length - first, M - 1):
            yield (first,) + rest


def _log2_multinomial(comp: Sequence[int]) -> float:
    total = sum(comp)
    val = math.lgamma(total + 1) - sum(math.lgamma(c + 1) for c in comp)
    return val / math.log(2)


# ---------------------------------------------------------------------------
# uncertainty sets

class StateSchedule:
    """Finite set of fixed states plus blocklength-coupled rules ``s(n) = ceil(alpha * n)``.

    A schedule with coupled rules stands in for an unbounded uncertainty set:
    it lets the state grow with the blocklength.  ``bound`` marks a bounded
    set ``s <= S`` and forbids coupled rules.
    """

    def __init__(self, fixed: Sequence = (), coupled: Sequence[float] = (), bound=None):
        self.fixed = tuple(fixed)
        self.coupled = tuple(float(a) for a in coupled)
        self.bound = bound
        if not self.fixed and not self.coupled:
            raise InvalidArgument("a schedule needs at least one state")
        if any(a <= 0 for a in self.coupled):
            raise InvalidArgument("coupled-state multipliers must be positive")
        if bound is not None:
            if self.coupled:
                raise InvalidArgument("a bounded schedule cannot contain blocklength-coupled states")
            if any(s > bound for s in self.fixed):
                raise InvalidArgument(f"fixed states exceed the bound S={bound}")

    @classmethod
    def bounded(cls, S: int, states: Sequence | None = None) -> "StateSchedule":
        """Integer states up to ``S``; by default powers of two plus ``S`` itself."""
        if states is None:
            states = sorted({2**k for k in range(int(math.log2(S)) + 1)} | {S})
        return cls(fixed=states, bound=S)

    @property
    def is_bounded(self) -> bool:
        return not self.coupled

    @property
    def fixed_labels(self) -> list[str]:
        return [_fixed_label(s) for s in self.fixed]

    @property
    def labels(self) -> list[str]:
        return self.fixed_labels + [_coupled_label(a) for a in self.coupled]

    def states_at(self, n: int) -> list[tuple[str, Any]]:
        """``(label, state)`` pairs in effect at blocklength ``n``."""
        out = [(_fixed_label(s), s) for s in self.fixed]
        out += [(_coupled_label(a), int(math.ceil(a * n - 1e-9))) for a in self.coupled]
        return out

    def validate(self, model: NoiseModel, n_grid: Sequence[int]):
        for n in n_grid:
            for _, s in self.states_at(n):
                model.check_state(s, n)

    def to_dict(self) -> dict:
        return {"fixed": list(self.fixed), "coupled": list(self.coupled), "bound": self.bound}

    @classmethod
    def from_dict(cls, spec: dict) -> "StateSchedule":
        return cls(spec.get("fixed", ()), spec.get("coupled", ()), spec.get("bound"))

    def __repr__(self) -> str:
        return f"StateSchedule(fixed={list(self.fixed)}, coupled={list(self.coupled)}, bound={self.bound})"


def _fixed_label(s) -> str:
    return f"s={s:g}" if isinstance(s, (int, float, np.integer, np.floating)) else f"s={s}"


def _coupled_label(alpha: float) -> str:
    return "s(n)=n" if alpha == 1 else f"s(n)=ceil({alpha:g}n)"
