"""Short binary linear block codes with erasure-aware exhaustive ML decoding."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .modem import ERASURE

MAX_K = 16


def gf2_rank(matrix) -> int:
    m = np.array(matrix, dtype=np.uint8) % 2
    rank = 0
    rows, cols = m.shape
    for col in range(cols):
        pivot = next((r for r in range(rank, rows) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(rows):
            if r != rank and m[r, col]:
                m[r] ^= m[rank]
        rank += 1
    return rank


def info_words(k: int) -> np.ndarray:
    """All 2**k info words in lexicographic order (MSB first), shape (2**k, k)."""
    ints = np.arange(1 << k, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1)
    return ((ints[:, None] >> shifts) & 1).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class LinearCode:
    name: str
    generator: np.ndarray

    def __post_init__(self):
        g = np.array(self.generator, dtype=np.uint8)
        if g.ndim != 2 or g.size == 0:
            raise ValueError("generator must be a nonempty k x n matrix")
        if not np.all(g <= 1):
            raise ValueError("generator entries must be 0 or 1")
        k, n = g.shape
        if k > n:
            raise ValueError(f"dimension {k} exceeds block length {n}")
        if k > MAX_K:
            raise ValueError(f"k = {k} is too large for exhaustive decoding (max {MAX_K})")
        if gf2_rank(g) != k:
            raise ValueError(f"generator of {self.name} is not full rank")
        g.setflags(write=False)
        object.__setattr__(self, "generator", g)

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    @property
    def n(self) -> int:
        return self.generator.shape[1]

    @property
    def rate(self) -> float:
        return self.k / self.n

    @cached_property
    def codebook(self) -> np.ndarray:
        """Codeword for every info word, rows in lexicographic info-word order."""
        return (info_words(self.k).astype(np.int64) @ self.generator) % 2

    @cached_property
    def min_distance(self) -> int:
        return int(self.codebook[1:].sum(axis=1).min())

    def __repr__(self):
        return f"LinearCode({self.name!r}, k={self.k}, n={self.n})"


def encode(code: LinearCode, info) -> np.ndarray:
    """Encode one info word (length k) or a batch (shape (..., k))."""
    info = np.asarray(info, dtype=np.int64)
    if info.shape[-1] != code.k:
        raise ValueError(f"{code.name} needs info words of length {code.k}, got {info.shape[-1]}")
    return ((info @ code.generator) % 2).astype(np.uint8)


def decode_ml_erasure(code: LinearCode, word) -> np.ndarray:
    """Info word of the closest codeword, counting disagreements only at unerased positions.

    Accepts one ternary word of length n or a batch of shape (B, n). Ties go
    to the lexicographically smallest info word.
    """
    word = np.asarray(word)
    single = word.ndim == 1
    words = np.atleast_2d(word)
    if words.shape[1] != code.n:
        raise ValueError(f"{code.name} needs words of length {code.n}, got {words.shape[1]}")
    said_one = (words == 1).astype(np.int32)
    said_zero = (words == 0).astype(np.int32)
    c = code.codebook.astype(np.int32)
    distance = said_one @ (1 - c).T + said_zero @ c.T
    best = np.argmin(distance, axis=1)
    out = info_words(code.k)[best]
    return out[0] if single else out


def decode_ml_erasure_reference(code: LinearCode, word) -> np.ndarray:
    """Plain-loop version of the decoder, kept as an independent check."""
    best, best_d = None, None
    for info in itertools.product((0, 1), repeat=code.k):
        cw = [sum(i * g for i, g in zip(info, col)) % 2 for col in code.generator.T]
        d = sum(1 for w, c in zip(word, cw) if w != ERASURE and w != c)
        if best_d is None or d < best_d:
            best, best_d = info, d
    return np.array(best, dtype=np.uint8)


def repetition(n: int) -> LinearCode:
    return LinearCode(f"rep-1-{n}", np.ones((1, n), dtype=np.uint8))


# Systematic [I | P] with parity bits p0 = d0^d1^d3, p1 = d0^d2^d3, p2 = d1^d2^d3.
_HAMMING_PARITY = np.array([[1, 1, 0],
                            [1, 0, 1],
                            [0, 1, 1],
                            [1, 1, 1]], dtype=np.uint8)


def hamming74() -> LinearCode:
    return LinearCode("hamm-4-7", np.hstack([np.eye(4, dtype=np.uint8), _HAMMING_PARITY]))


def extended_hamming84() -> LinearCode:
    g = hamming74().generator
    overall = g.sum(axis=1, keepdims=True) % 2
    return LinearCode("ehamm-4-8", np.hstack([g, overall]))


def reed_muller_1(m: int) -> LinearCode:
    """First-order Reed-Muller RM(1, m): all-ones row plus one row per coordinate bit."""
    points = info_words(m).T  # row i = bit i of every evaluation point
    g = np.vstack([np.ones((1, 1 << m), dtype=np.uint8), points])
    return LinearCode(f"rm-{m + 1}-{1 << m}", g)


def builtin_codes() -> list[LinearCode]:
    return [repetition(3), hamming74(), extended_hamming84(), reed_muller_1(3), reed_muller_1(4)]


def get_code(name: str) -> LinearCode:
    for code in builtin_codes():
        if code.name == name.lower():
            return code
    names = ", ".join(c.name for c in builtin_codes())
    raise KeyError(f"unknown code {name!r}; builtin codes are: {names}")
