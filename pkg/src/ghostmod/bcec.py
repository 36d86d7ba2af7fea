"""Binary crossover erasure channel: transition matrices, mutual information, capacity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ChannelParams, DegenerateExperiment, GmTiming, make_rng
from .modem import _arrivals, decide_word, modulate

ROW_SUM_TOL = 1e-12
INV_PHI = (math.sqrt(5) - 1) / 2

# Column order of a transition row.
OUT_ZERO, OUT_ONE, OUT_ERASURE = 0, 1, 2


@dataclass(frozen=True)
class TransitionMatrix:
    """2x3 matrix ``eps[x][y]``: input x in {0, 1}, output y in {0, 1, ?}."""

    eps: np.ndarray

    def __post_init__(self):
        eps = np.array(self.eps, dtype=float)
        if eps.shape != (2, 3):
            raise ValueError(f"transition matrix must be 2x3, got {eps.shape}")
        if np.any(eps < 0) or np.any(eps > 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if np.any(np.abs(eps.sum(axis=1) - 1) > ROW_SUM_TOL):
            raise ValueError(f"rows must sum to 1, got {eps.sum(axis=1)}")
        eps.setflags(write=False)
        object.__setattr__(self, "eps", eps)

    @classmethod
    def from_entries(cls, e00, e01, e11, e10) -> "TransitionMatrix":
        """Build from the four non-erasure entries; erasures take the row remainders."""
        e0q = 1.0 - e00 - e01
        e1q = 1.0 - e11 - e10
        # Rounding can leave a remainder of -1e-17 where the true value is 0.
        e0q = 0.0 if abs(e0q) <= ROW_SUM_TOL else e0q
        e1q = 0.0 if abs(e1q) <= ROW_SUM_TOL else e1q
        return cls(np.array([[e00, e01, e0q], [e10, e11, e1q]]))

    def __getitem__(self, key):
        return self.eps[key]


@dataclass(frozen=True)
class CapacityResult:
    capacity_bits: float
    gamma_star: float


def bec(erasure: float) -> TransitionMatrix:
    return TransitionMatrix.from_entries(1 - erasure, 0.0, 1 - erasure, 0.0)


def transitions_closed_form(timing: GmTiming, params: ChannelParams) -> TransitionMatrix:
    """Isolated-symbol transition model.

    Each pulse is judged only against its own period; spill into neighbours is
    ignored, which is exact when the guard swallows every delay.
    """
    keep = 1.0 - params.drop_rate
    if params.mean_delay == 0:
        in_one_slot, in_next_slot = 1.0, 0.0
    else:
        a = math.exp(-timing.t_slot / params.mean_delay)
        in_one_slot = -math.expm1(-timing.t_slot / params.mean_delay)
        in_next_slot = a - a * a
    e00 = keep * in_one_slot
    e01 = keep * in_next_slot
    e11 = keep * in_one_slot
    return TransitionMatrix.from_entries(e00, e01, e11, 0.0)


def estimate_transitions_mc(timing: GmTiming, params: ChannelParams, n_trials: int,
                            rng: np.random.Generator | int,
                            word_length: int = 1000) -> TransitionMatrix:
    """Empirical transition matrix from ``n_trials`` simulated symbols.

    Symbols are sent as random words of ``word_length`` periods, so delays
    spilling into neighbouring periods are captured. ``word_length=1`` gives
    isolated single-period trials.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if word_length < 1:
        raise ValueError("word_length must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)

    tally = np.zeros((2, 3), dtype=np.int64)
    chunk_words = max(1, (1 << 18) // word_length)
    n_words = -(-n_trials // word_length)
    done = 0
    for first in range(0, n_words, chunk_words):
        words = min(chunk_words, n_words - first)
        n = min(words * word_length, n_trials - done)
        bits = rng.integers(0, 2, n, dtype=np.uint8)
        tx = modulate(bits, timing)
        arrive, kept = _arrivals(tx, params, rng)
        # Each word is decided on its own; arrivals past its end are lost to it.
        word_end = (np.arange(n) // word_length + 1) * word_length * timing.t_sym
        rx = np.sort(arrive[kept & (arrive < word_end)])
        out = decide_word(rx, timing, n)
        np.add.at(tally, (bits, out), 1)
        done += n

    rows = tally.sum(axis=1)
    if np.any(rows == 0):
        raise DegenerateExperiment(f"an input symbol was never transmitted (row counts {rows})")
    return TransitionMatrix(tally / rows[:, None])


def _plogp(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    safe = np.where(p > 0, p, 1.0)
    return np.where(p > 0, p * np.log2(safe), 0.0)


def mutual_information(tm: TransitionMatrix, gamma: float) -> float:
    """I(X;Y) in bits for P(X=0) = gamma."""
    eps = tm.eps
    zeta0 = _plogp(eps[0]).sum()
    zeta1 = _plogp(eps[1]).sum()
    p_y = gamma * eps[0] + (1 - gamma) * eps[1]
    h_y = -_plogp(p_y).sum()
    h_y_given_x = -(gamma * zeta0 + (1 - gamma) * zeta1)
    return float(h_y - h_y_given_x)


def mi_slope(tm: TransitionMatrix, gamma: float) -> float:
    """dI/dgamma; decreasing in gamma because I is concave."""
    eps = tm.eps
    p_y = gamma * eps[0] + (1 - gamma) * eps[1]
    diff = eps[0] - eps[1]
    live = p_y > 0
    slope = -np.sum(diff[live] * np.log2(p_y[live]))
    return float(slope + _plogp(eps[0]).sum() - _plogp(eps[1]).sum())


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10):
    """Maximize a unimodal ``f`` on [lo, hi]; returns (x, f(x)) with x within ``tol``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def capacity(tm: TransitionMatrix, tol: float = 1e-10) -> CapacityResult:
    """Capacity and capacity-achieving P(X=0) by golden-section search over gamma."""
    f = lambda g: mutual_information(tm, g)
    gamma, value = golden_section_max(f, 0.0, 1.0, 1e-6)
    if value <= 1e-15:
        # Output independent of input: every gamma is optimal.
        return CapacityResult(0.0, 0.5)
    # Near the peak I(gamma) is flat to machine precision, so finish by
    # bisecting on the sign of the slope instead of comparing values.
    lo, hi = max(gamma - 2e-6, 0.0), min(gamma + 2e-6, 1.0)
    if lo > 0 and mi_slope(tm, lo) < 0:
        lo = 0.0
    if hi < 1 and mi_slope(tm, hi) > 0:
        hi = 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if mi_slope(tm, mid) > 0:
            lo = mid
        else:
            hi = mid
    gamma = (lo + hi) / 2
    value = f(gamma)
    return CapacityResult(min(max(value, 0.0), 1.0), gamma)
