"""Random coding experiments on the additive compound channel.

Two decoders estimate the same quantity, the error probability of maximum
likelihood decoding with the state known at the receiver, averaged over
messages and over the i.i.d. equiprobable codebook ensemble:

``explicit``
    A concrete seeded codebook, brute-force ML over every message
    (capped at ``DECODE_CAP`` codewords).  Needed for feedback encoders.

``ensemble``
    Exact conditioning on the transmitted noise.  With an equiprobable
    codebook every wrong codeword produces an equiprobable, independent
    candidate noise sequence, so given the true noise ``xi`` the chance
    that ML (lowest index wins ties) decodes correctly is a closed form in

        q_gt = P(p(xi') > p(xi)),   q_eq = P(p(xi') = p(xi)),   xi' uniform,

    both computed exactly from the composition classes of the noise model.
    Averaging that conditional error over sampled ``xi`` gives an unbiased
    estimate with far smaller variance than counting decoding failures, and
    it works for codebooks of any size.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .alphabet import IsiMap, SeqM, all_sequences, isi_map_array, sequence_index
from .errors import CapacityExceeded, InvalidArgument
from .noise import NoiseModel, StateSchedule, composition_classes, support_arrays

log = logging.getLogger(__name__)

DECODE_CAP = 2**16
MAX_CODING_N = 64
TRIAL_CHUNK = 256
CODEWORD_BLOCK = 1024
TIE_RTOL = 1e-9
LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# codebooks

def codeword_count(n: int, R: float) -> int:
    """ceil(2^(nR)), guarding against float noise when nR is an integer."""
    v = n * R
    if abs(v - round(v)) < 1e-9:
        return 2 ** int(round(v))
    return math.ceil(2.0**v)


@dataclass(frozen=True)
class Codebook:
    """Implicit i.i.d. equiprobable codebook; codewords are regenerated on demand."""

    M: int
    n: int
    R: float
    seed: int

    def __post_init__(self):
        if self.M < 2 or self.n < 1 or self.R < 0:
            raise InvalidArgument(f"invalid codebook parameters M={self.M}, n={self.n}, R={self.R}")

    @property
    def count(self) -> int:
        return codeword_count(self.n, self.R)

    def _block(self, b: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(b,)))
        return rng.integers(0, self.M, size=(CODEWORD_BLOCK, self.n), dtype=np.int64)

    def matrix(self, cap: int = DECODE_CAP) -> np.ndarray:
        """All codewords as a ``(count, n)`` array."""
        count = self.count
        if count > cap:
            raise CapacityExceeded(f"{count} codewords exceed the decode cap {cap}")
        nb = -(-count // CODEWORD_BLOCK)
        return np.concatenate([self._block(b) for b in range(nb)])[:count]


def generate_codeword(codebook: Codebook, index: int) -> SeqM:
    """Codeword ``index``, a function of ``(codebook.seed, index)`` only."""
    if not 0 <= index < codebook.count:
        raise InvalidArgument(f"codeword index {index} outside [0, {codebook.count})")
    b, r = divmod(int(index), CODEWORD_BLOCK)
    return SeqM(codebook._block(b)[r], codebook.M)


def _cell_key(R: float) -> int:
    return int(round(R * 1_000_000))


def codebook_for(seed: int, M: int, n: int, R: float) -> Codebook:
    ss = np.random.SeedSequence(seed, spawn_key=(0xC0DE, n, _cell_key(R)))
    return Codebook(M, n, R, int(ss.generate_state(1)[0]))


# ---------------------------------------------------------------------------
# ML decoding

def _argmax_low(lp: np.ndarray) -> np.ndarray:
    """Row-wise argmax over the last axis, ties (within TIE_RTOL) to the lowest index."""
    best = lp.max(axis=-1, keepdims=True)
    tol = TIE_RTOL * np.maximum(1.0, np.abs(best))
    return np.argmax(lp >= best - tol, axis=-1)


def _decode_rows(y: np.ndarray, Z: np.ndarray, model: NoiseModel, s) -> np.ndarray:
    """ML decisions for received rows ``y`` (T, n) against channel-input rows ``Z`` (W, n)."""
    T, n = y.shape
    out = np.empty(T, dtype=np.int64)
    per = max(1, (1 << 22) // max(1, Z.shape[0] * n))
    for a in range(0, T, per):
        yb = y[a:a + per]
        xi = (yb[:, None, :] - Z[None, :, :]) % model.M
        lp = model.log_prob_array(s, xi.reshape(-1, n)).reshape(len(yb), Z.shape[0])
        out[a:a + per] = _argmax_low(lp)
    return out


def ml_decode(y: SeqM, codebook: Codebook, model: NoiseModel, s, g: IsiMap = IsiMap(0),
              cap: int = DECODE_CAP) -> int:
    """Message maximizing ``log p_s(y - g(x_w))``; the lowest index wins ties."""
    if y.n != codebook.n or y.M != codebook.M:
        raise InvalidArgument("received sequence does not match the codebook")
    Z = isi_map_array(codebook.matrix(cap), g.depth, codebook.M).astype(np.int64)
    s = model.check_state(s, codebook.n)
    return int(_decode_rows(y.symbols.astype(np.int64)[None], Z, model, s)[0])


# ---------------------------------------------------------------------------
# feedback encoders

SCHEMES = ("baseline", "ignore_feedback", "retransmit", "precancel")


@dataclass(frozen=True)
class FeedbackEncoder:
    """Causal encoder ``x_k = f_k(w, y_1..y_{k-1})`` built on a codeword.

    ``baseline``         sends the codeword (no feedback).
    ``ignore_feedback``  runs the causal loop but never reads the feedback.
    ``retransmit``       repeats the current codeword symbol while the previous
                         channel use was hit by noise, advancing a pointer
                         into the codeword only after a clean use.
    ``precancel``        predicts the next noise symbol as the previous one and
                         subtracts it before the ISI filter (inverting the
                         filter causally), aimed at burst-like interference.
    """

    scheme: str = "baseline"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidArgument(f"unknown feedback scheme {self.scheme!r}; choose from {SCHEMES}")

    @property
    def uses_loop(self) -> bool:
        return self.scheme != "baseline"

    def run(self, C: np.ndarray, M: int, depth: int, y: np.ndarray | None = None,
            xi: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Channel inputs ``z`` (after ISI) and outputs ``y`` for codeword rows ``C``.

        Exactly one of ``y`` (decoder side: outputs are known, the encoder is
        replayed for a hypothesized message) and ``xi`` (transmitter side:
        outputs are generated from the noise) is given.  Both sides share this
        routine, so the decoder reproduces the transmitter bit for bit.
        """
        rows, n = C.shape
        if not self.uses_loop:
            Z = isi_map_array(C, depth, M).astype(np.int64)
            return Z, (Z + xi) % M if y is None else y
        X = np.zeros((rows, n), dtype=np.int64)
        Z = np.zeros_like(X)
        Y = np.zeros_like(X) if y is None else np.broadcast_to(y, (rows, n))
        ptr = np.zeros(rows, dtype=np.int64)
        last = np.zeros(rows, dtype=np.int64)
        r = np.arange(rows)
        for k in range(n):
            past = X[:, max(0, k - depth):k].sum(axis=1)
            if self.scheme == "precancel":
                zk = (C[:, k] - last) % M
                xk = (zk - past) % M
            else:
                xk = C[r, ptr] if self.scheme == "retransmit" else C[:, k]
                zk = (xk + past) % M
            X[:, k], Z[:, k] = xk, zk
            if y is None:
                Y[:, k] = (zk + xi[:, k]) % M
            last = (Y[:, k] - zk) % M                  # the encoder learns the noise symbol
            if self.scheme == "retransmit":
                ptr = np.minimum(ptr + (last == 0), n - 1)
        return Z, np.array(Y)


# ---------------------------------------------------------------------------
# results

@dataclass
class CodingResult:
    state: str
    n: int
    R: float
    trials: int
    error_rate: float
    wall_time: float
    halfwidth: float = 0.0
    errors: float = 0.0
    codewords: int = 0
    seed: int | None = None
    scheme: str = "baseline"
    method: str = "explicit"
    model: str = ""
    per_trial: np.ndarray | None = field(default=None, repr=False)

    @property
    def sigma(self) -> float:
        return self.halfwidth / 1.96


CODING_COLUMNS = ["model", "state_rule", "n", "R", "codewords", "trials", "errors", "error_rate",
                  "halfwidth", "seed", "scheme"]


def coding_row(r: CodingResult) -> dict:
    return {"model": r.model, "state_rule": r.state, "n": r.n, "R": r.R, "codewords": r.codewords,
            "trials": r.trials, "errors": r.errors, "error_rate": r.error_rate,
            "halfwidth": r.halfwidth, "seed": r.seed, "scheme": r.scheme}


def _summarize(per_trial: np.ndarray, **kw) -> CodingResult:
    T = per_trial.size
    mean = float(per_trial.mean())
    hw = 1.96 * float(per_trial.std(ddof=1)) / math.sqrt(T) if T > 1 else 0.0
    return CodingResult(trials=T, error_rate=mean, halfwidth=hw, errors=float(per_trial.sum()),
                        per_trial=per_trial, **kw)


def _chunks(trials: int):
    for c, start in enumerate(range(0, trials, TRIAL_CHUNK)):
        yield c, min(TRIAL_CHUNK, trials - start)


def _trial_rng(seed, state_idx, n, R, chunk) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(state_idx, n, _cell_key(R), chunk)))


# ---------------------------------------------------------------------------
# the two estimators

def _explicit_chunk(model, s, codebook, C, Zc, depth, encoder, rng, size):
    n, M = codebook.n, codebook.M
    w = rng.integers(0, C.shape[0], size=size)
    xi = model.sample_array(s, n, size, rng).astype(np.int64)
    _, y = encoder.run(C[w], M, depth, xi=xi)
    if not encoder.uses_loop:
        return (_decode_rows(y, Zc, model, s) != w).astype(float)
    # replay the encoder for every message against each received block
    W = C.shape[0]
    per = max(1, (1 << 21) // (W * n))
    errs = np.empty(size)
    for a in range(0, size, per):
        yb = y[a:a + per]
        b = yb.shape[0]
        Zt, _ = encoder.run(np.tile(C, (b, 1)), M, depth, y=np.repeat(yb, W, axis=0))
        lp = model.log_prob_array(s, (np.repeat(yb, W, axis=0) - Zt) % M).reshape(b, W)
        errs[a:a + b] = _argmax_low(lp) != w[a:a + b]
    return errs


class _ClassTable:
    """Uniform-sequence probability mass below / at / above each noise log-probability."""

    def __init__(self, model: NoiseModel, s, n: int):
        lp, lf = composition_classes(model, s, n)
        lf = lf * LN2                                       # natural-log class masses
        order = np.argsort(lp)                              # impossible classes (-inf) first
        lp, lf = lp[order], lf[order]
        # classes whose probabilities tie are merged, so each level appears once
        new = np.ones(lp.size, dtype=bool)
        with np.errstate(invalid="ignore"):
            new[1:] = np.diff(lp) > TIE_RTOL * np.maximum(1.0, np.abs(lp[1:]))
        starts = np.flatnonzero(new)
        self.lp = lp[starts]
        self.lf = np.array([logsumexp(lf[a:b]) for a, b in zip(starts, np.append(starts[1:], lp.size))])
        self.left = np.concatenate([[-np.inf], np.logaddexp.accumulate(self.lf)])
        self.right = np.concatenate([np.logaddexp.accumulate(self.lf[::-1])[::-1], [-np.inf]])

    def log_masses(self, L: np.ndarray):
        """Natural logs of P(lp' < L), P(lp' = L), P(lp' > L) for uniform sequences."""
        L = np.asarray(L, dtype=float)
        tol = TIE_RTOL * np.maximum(1.0, np.abs(L))
        lo = np.searchsorted(self.lp, L - tol, side="left")
        hi = np.searchsorted(self.lp, L + tol, side="right")
        eq = np.where(hi > lo, self.lf[np.minimum(lo, self.lf.size - 1)], -np.inf)
        return self.left[lo], eq, self.right[hi]


def ensemble_error(log_less, log_eq, log_gt, count: float) -> np.ndarray:
    """Conditional ML error given the true noise, for ``count`` i.i.d. uniform codewords.

    The transmitted index is uniform; it is decoded correctly when no other
    codeword is strictly more likely and every tied codeword has a larger
    index.  With ``b = 1 - q_gt`` and ``r = 1 - q_eq / b``:

        P(correct) = b^(count-1) * (1 - r^count) / (count * (1 - r)).
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        # log b from the small tail q_gt: (count - 1) * log b amplifies any rounding
        q_gt = np.exp(log_gt)
        log_b = np.where(q_gt < 0.5, np.log1p(-np.minimum(q_gt, 0.5)),
                         np.logaddexp(log_less, log_eq))
        log_ratio = log_eq - log_b                                   # log(q_eq / b)
        ratio = np.exp(log_ratio)
        log_r = np.log1p(-np.minimum(ratio, 1.0))
        tie_term = np.where(ratio > 0,
                            np.log(-np.expm1(count * log_r)) - math.log(count) - log_ratio,
                            0.0)
        tie_term = np.where(ratio >= 1.0, -math.log(count), tie_term)
        log_correct = (count - 1) * np.minimum(log_b, 0.0) + tie_term
    return np.clip(-np.expm1(log_correct), 0.0, 1.0)


def _ensemble_chunk(model, s, n, count, table, rng, size):
    xi = model.sample_array(s, n, size, rng)
    L = model.log_prob_array(s, xi)
    return ensemble_error(*table.log_masses(L), float(count))


# ---------------------------------------------------------------------------
# sweeps

def _choose_method(method: str, count: int, cap: int, encoder: FeedbackEncoder) -> str:
    if method == "auto":
        return "explicit" if count <= cap or encoder.uses_loop else "ensemble"
    if method not in ("explicit", "ensemble"):
        raise InvalidArgument(f"unknown decoding method {method!r}")
    return method


def run_cell(model: NoiseModel, label: str, s, state_idx: int, g: IsiMap, n: int, R: float,
             trials: int, seed: int, cap: int = DECODE_CAP, method: str = "auto",
             encoder: FeedbackEncoder = FeedbackEncoder(), workers: int = 1) -> CodingResult:
    """Error estimate at one (state, n, R) cell."""
    if trials < 200:
        raise InvalidArgument(f"coding experiments need at least 200 trials, got {trials}")
    t0 = time.perf_counter()
    M = model.M
    s = model.check_state(s, n)
    count = codeword_count(n, R)
    how = _choose_method(method, count, cap, encoder)
    if how == "explicit":
        if n > MAX_CODING_N:
            raise InvalidArgument(f"explicit decoding needs n <= {MAX_CODING_N}, got {n}")
        if count > cap:
            raise CapacityExceeded(f"{count} codewords exceed the decode cap {cap}")
        book = codebook_for(seed, M, n, R)
        C = book.matrix(cap)
        Zc = isi_map_array(C, g.depth, M).astype(np.int64)
        task = lambda c, size: _explicit_chunk(model, s, book, C, Zc, g.depth, encoder,  # noqa: E731
                                               _trial_rng(seed, state_idx, n, R, c), size)
    else:
        if encoder.uses_loop:
            raise InvalidArgument("feedback encoders need the explicit decoder")
        table = _ClassTable(model, s, n)
        task = lambda c, size: _ensemble_chunk(model, s, n, count, table,  # noqa: E731
                                               _trial_rng(seed, state_idx, n, R, c), size)
    jobs = list(_chunks(trials))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda j: task(*j), jobs))
    else:
        parts = [task(*j) for j in jobs]
    res = _summarize(np.concatenate(parts), state=label, n=n, R=R, wall_time=0.0,
                     codewords=count, seed=seed, scheme=encoder.scheme, method=how,
                     model=model.kind)
    res.wall_time = time.perf_counter() - t0
    return res


def run_error_sweep(model: NoiseModel, schedule: StateSchedule, g: IsiMap,
                    n_grid: Sequence[int], rate_grid: Sequence[float], trials: int, seed: int,
                    cap: int = DECODE_CAP, method: str = "auto",
                    encoder: FeedbackEncoder = FeedbackEncoder(), workers: int = 1
                    ) -> list[CodingResult]:
    """Error rate for every (state, n, R), plus a ``compound`` row per (n, R).

    The compound row is the maximum over scheduled states.  Cells that cannot
    be run (codebook over the cap, no finite class table) are skipped with a
    warning.
    """
    out = []
    for n in sorted(int(v) for v in n_grid):
        for R in rate_grid:
            cell = []
            for idx, (label, s) in enumerate(schedule.states_at(n)):
                try:
                    cell.append(run_cell(model, label, s, idx, g, n, float(R), trials, seed, cap,
                                         method, encoder, workers))
                except CapacityExceeded as exc:
                    log.warning("skipping state %s, n=%d, R=%g: %s", label, n, R, exc)
            if cell:
                worst = max(cell, key=lambda r: r.error_rate)
                out.extend(cell)
                out.append(CodingResult(
                    "compound", n, float(R), worst.trials, worst.error_rate,
                    sum(r.wall_time for r in cell), worst.halfwidth, worst.errors,
                    worst.codewords, seed, encoder.scheme, worst.method, model.kind))
    return out


def compound_error(results: Sequence[CodingResult], n: int, R: float) -> float:
    vals = [r.error_rate for r in results if r.n == n and r.R == R and r.state != "compound"]
    return max(vals)


@dataclass
class FeedbackComparison:
    baseline: dict[str, CodingResult]
    schemes: dict[str, dict[str, CodingResult]]
    gain: dict[str, dict[str, float]]
    gain_sigma: dict[str, dict[str, float]]

    def max_z(self) -> float:
        """Largest gain over the baseline in units of its paired standard error."""
        zs = [self.gain[k][lab] / sd if sd > 0 else (np.inf if self.gain[k][lab] > 0 else 0.0)
              for k, d in self.gain_sigma.items() for lab, sd in d.items()]
        return max(zs) if zs else 0.0


def run_feedback_comparison(model: NoiseModel, schedule: StateSchedule, g: IsiMap,
                            schemes: Sequence[str], n: int, R: float, trials: int, seed: int,
                            cap: int = DECODE_CAP) -> FeedbackComparison:
    """Paired comparison of feedback encoders against the no-feedback baseline.

    Every scheme sees the same messages, noise draws and codebook, so the
    per-trial error differences are paired; ``gain = baseline - scheme`` with
    its standard error from those differences.  The compound entry is the
    worst state.
    """
    schemes = [sc for sc in schemes if sc != "baseline"]
    states = list(schedule.states_at(n))

    def cells(enc):
        return {lab: run_cell(model, lab, s, i, g, n, R, trials, seed, cap, "explicit", enc)
                for i, (lab, s) in enumerate(states)}

    base = cells(FeedbackEncoder("baseline"))
    runs, gain, gsd = {}, {}, {}
    for sc in schemes:
        runs[sc] = cells(FeedbackEncoder(sc))
        gain[sc], gsd[sc] = {}, {}
        for lab in base:
            d = base[lab].per_trial - runs[sc][lab].per_trial
            gain[sc][lab] = float(d.mean())
            gsd[sc][lab] = float(d.std(ddof=1) / math.sqrt(d.size))
        worst_b = max(base.values(), key=lambda r: r.error_rate)
        worst_s = max(runs[sc].values(), key=lambda r: r.error_rate)
        gain[sc]["compound"] = worst_b.error_rate - worst_s.error_rate
        gsd[sc]["compound"] = max(gsd[sc].values())
    return FeedbackComparison(base, runs, gain, gsd)


def tx_csi_demo(model: NoiseModel | None = None, s_known: int = 4, n: int = 80, R: float = 0.5,
                trials: int = 1000, seed: int = 0, n_jam: int = 40) -> dict[str, CodingResult]:
    """Transmitter state knowledge on block interference.

    ``with_csi``: the blocklength is picked from the known state (``n >= 20 s``).
    ``without_csi``: nature may couple the state to the blocklength, ``s = n``.
    """
    from .noise import BlockInterference

    model = model or BlockInterference(2)
    n = max(n, 20 * s_known) if s_known > 0 else n
    g = IsiMap(0)
    with_csi = run_cell(model, f"s={s_known}", s_known, 0, g, n, R, trials, seed)
    without = run_cell(model, "s(n)=n", n_jam, 1, g, n_jam, R, trials, seed)
    return {"with_csi": with_csi, "without_csi": without}


# ---------------------------------------------------------------------------
# output uniformity

def _input_pmf(M: int, n: int, input_pmf) -> np.ndarray:
    if input_pmf is None:
        return np.full(M**n, float(M) ** -n)
    per = np.asarray(input_pmf, dtype=float)
    rows = all_sequences(n, M).astype(np.int64)
    return np.prod(per[rows], axis=1)


def uniform_output_check(g: IsiMap, model: NoiseModel, s, n: int, input_pmf=None,
                         mode: str = "auto", samples: int = 1_000_000, seed: int = 0,
                         enum_cap: int = 2**20, alpha: float = 1e-3) -> dict:
    """Is the channel output equiprobable when the input is?

    ``exact`` convolves the enumerated noise law with the input law pushed
    through the ISI map (an n-dimensional FFT over Z_M^n) and compares every
    output probability to M^-n within 1e-9.  ``statistical`` chi-squares
    sampled outputs (on the first few coordinates when M^n is large).
    ``input_pmf`` switches to an i.i.d. non-uniform input, as a negative control.
    """
    M = model.M
    s = model.check_state(s, n)
    if mode in ("auto", "exact"):
        try:
            if M**n > enum_cap:
                raise CapacityExceeded(f"M^n = {M**n} exceeds the enumeration cap {enum_cap}")
            rows, probs = support_arrays(model, s, n, enum_cap)
            p_noise = np.zeros(M**n)
            np.add.at(p_noise, sequence_index(rows, M), probs)
            p_x = _input_pmf(M, n, input_pmf)
            z_idx = sequence_index(isi_map_array(all_sequences(n, M), g.depth, M), M)
            p_z = np.zeros(M**n)
            np.add.at(p_z, z_idx, p_x)
            shape = (M,) * n
            p_y = np.real(np.fft.ifftn(np.fft.fftn(p_z.reshape(shape)) *
                                       np.fft.fftn(p_noise.reshape(shape)))).ravel()
            dev = float(np.max(np.abs(p_y - float(M) ** -n)))
            return {"mode": "exact", "uniform": dev <= 1e-9, "max_deviation": dev,
                    "total": float(p_y.sum())}
        except CapacityExceeded as exc:
            if mode == "exact":
                log.warning("exact output check unavailable (%s); using sampling", exc)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x0A7,)))
    if input_pmf is None:
        x = rng.integers(0, M, size=(samples, n))
    else:
        x = rng.choice(M, size=(samples, n), p=np.asarray(input_pmf, dtype=float))
    xi = model.sample_array(s, n, samples, rng).astype(np.int64)
    y = (isi_map_array(x, g.depth, M).astype(np.int64) + xi) % M
    k = max(1, min(n, int(math.log(4096) // math.log(M))))
    counts = np.bincount(sequence_index(y[:, :k], M), minlength=M**k)
    p = float(stats.chisquare(counts).pvalue)
    return {"mode": "statistical", "uniform": p > alpha, "p_value": p, "coordinates": k}


__all__ = [
    "DECODE_CAP", "Codebook", "codeword_count", "generate_codeword", "codebook_for", "ml_decode",
    "FeedbackEncoder", "SCHEMES", "CodingResult", "CODING_COLUMNS", "coding_row",
    "ensemble_error", "run_cell", "run_error_sweep", "compound_error", "FeedbackComparison",
    "run_feedback_comparison", "tx_csi_demo", "uniform_output_check",
]
