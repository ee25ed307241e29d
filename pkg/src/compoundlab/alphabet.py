"""M-ary symbol arithmetic and the invertible moving-sum ISI map.

Sequences are stored as numpy arrays of the smallest unsigned integer type
that holds ``M - 1``.  The array-level helpers (``*_array``) operate on the
last axis and accept batches, which is what the Monte Carlo code uses; the
``SeqM`` wrappers are the validated single-sequence API.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidArgument


def symbol_dtype(M: int) -> np.dtype:
    """Smallest unsigned dtype able to store symbols in ``[0, M)``."""
    return np.min_scalar_type(M - 1)


@dataclass(frozen=True)
class Alphabet:
    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise InvalidArgument(f"alphabet size must be an integer >= 2, got {self.M!r}")

    @property
    def dtype(self) -> np.dtype:
        return symbol_dtype(self.M)

    @property
    def log_size(self) -> float:
        """log2 M, the per-symbol entropy ceiling in bits."""
        return float(np.log2(self.M))


class SeqM:
    """Immutable length-n sequence over an M-ary alphabet."""

    __slots__ = ("symbols", "alphabet")

    def __init__(self, symbols: Iterable[int] | np.ndarray, alphabet: Alphabet | int):
        if not isinstance(alphabet, Alphabet):
            alphabet = Alphabet(int(alphabet))
        arr = np.asarray(symbols)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidArgument("a sequence must be one-dimensional with n >= 1")
        if arr.dtype.kind not in "iu":
            if arr.dtype.kind == "b" or not np.all(np.mod(arr, 1) == 0):
                raise InvalidArgument("symbols must be integers")
        if arr.min() < 0 or arr.max() >= alphabet.M:
            raise InvalidArgument(f"symbols must lie in [0, {alphabet.M})")
        arr = arr.astype(alphabet.dtype)
        arr.setflags(write=False)
        object.__setattr__(self, "symbols", arr)
        object.__setattr__(self, "alphabet", alphabet)

    def __setattr__(self, name, value):
        raise AttributeError("SeqM is immutable")

    @classmethod
    def zeros(cls, n: int, M: int) -> "SeqM":
        return cls(np.zeros(n, dtype=np.int64), M)

    @property
    def n(self) -> int:
        return int(self.symbols.size)

    @property
    def M(self) -> int:
        return self.alphabet.M

    def tolist(self) -> list[int]:
        return [int(v) for v in self.symbols]

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, SeqM):
            return NotImplemented
        return self.M == other.M and np.array_equal(self.symbols, other.symbols)

    def __hash__(self) -> int:
        return hash((self.M, self.symbols.tobytes()))

    def __repr__(self) -> str:
        return f"SeqM({self.tolist()}, M={self.M})"


@dataclass(frozen=True)
class IsiMap:
    """Moving mod-M sum of the current and ``depth`` previous inputs."""

    depth: int = 0

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 0:
            raise InvalidArgument(f"ISI depth must be a non-negative integer, got {self.depth!r}")


def _check_pair(a: SeqM, b: SeqM):
    if a.M != b.M:
        raise InvalidArgument(f"alphabet mismatch: M={a.M} vs M={b.M}")
    if a.n != b.n:
        raise InvalidArgument(f"length mismatch: n={a.n} vs n={b.n}")


def add_mod(a: SeqM, b: SeqM) -> SeqM:
    _check_pair(a, b)
    return SeqM(add_mod_array(a.symbols, b.symbols, a.M), a.alphabet)


def sub_mod(a: SeqM, b: SeqM) -> SeqM:
    _check_pair(a, b)
    return SeqM(sub_mod_array(a.symbols, b.symbols, a.M), a.alphabet)


def isi_map(x: SeqM, g: IsiMap) -> SeqM:
    return SeqM(isi_map_array(x.symbols, g.depth, x.M), x.alphabet)


def isi_invert(z: SeqM, g: IsiMap) -> SeqM:
    return SeqM(isi_invert_array(z.symbols, g.depth, z.M), z.alphabet)


def add_mod_array(a: np.ndarray, b: np.ndarray, M: int) -> np.ndarray:
    out = (np.asarray(a, dtype=np.int64) + np.asarray(b, dtype=np.int64)) % M
    return out.astype(symbol_dtype(M))


def sub_mod_array(a: np.ndarray, b: np.ndarray, M: int) -> np.ndarray:
    out = (np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64)) % M
    return out.astype(symbol_dtype(M))


def isi_map_array(x: np.ndarray, depth: int, M: int) -> np.ndarray:
    """z_k = (x_k + x_{k-1} + ... + x_{k-depth}) mod M along the last axis."""
    x = np.asarray(x, dtype=np.int64)
    if depth == 0:
        return (x % M).astype(symbol_dtype(M))
    cs = np.cumsum(x, axis=-1) % M
    z = cs.copy()
    w = depth + 1
    if x.shape[-1] > w:
        z[..., w:] = cs[..., w:] - cs[..., :-w]
    return (z % M).astype(symbol_dtype(M))


def isi_invert_array(z: np.ndarray, depth: int, M: int) -> np.ndarray:
    """Causal inverse of :func:`isi_map_array`.

    With partial sums S_k = x_1 + ... + x_k the map reads z_k = S_k - S_{k-depth-1},
    so S is a cumulative sum of z along stride ``depth + 1`` and x_k = S_k - S_{k-1}.
    """
    z = np.asarray(z, dtype=np.int64)
    if depth == 0:
        return (z % M).astype(symbol_dtype(M))
    n = z.shape[-1]
    w = depth + 1
    S = np.empty_like(z)
    for r in range(min(w, n)):
        S[..., r::w] = np.cumsum(z[..., r::w], axis=-1) % M
    x = S.copy()
    x[..., 1:] = S[..., 1:] - S[..., :-1]
    return (x % M).astype(symbol_dtype(M))


def all_sequences(n: int, M: int) -> np.ndarray:
    """Every sequence in [0, M)^n as rows, in lexicographic order."""
    idx = np.arange(M**n, dtype=np.int64)
    powers = M ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] // powers) % M).astype(symbol_dtype(M))


def sequence_index(rows: np.ndarray, M: int) -> np.ndarray:
    """Inverse of :func:`all_sequences`: lexicographic index of each row."""
    rows = np.asarray(rows, dtype=np.int64)
    n = rows.shape[-1]
    powers = M ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return rows @ powers
