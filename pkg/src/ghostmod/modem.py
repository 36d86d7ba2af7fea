"""GM modulation, the delay/drop channel, and per-period ternary decisions."""

from __future__ import annotations

import enum

import numpy as np

from .core import ChannelParams, GmTiming, as_bits


class Ternary(enum.IntEnum):
    ZERO = 0
    ONE = 1
    ERASURE = 2


ERASURE = int(Ternary.ERASURE)


def modulate(bits, timing: GmTiming) -> np.ndarray:
    """Transmit schedule: pulse k goes out at ``k * t_sym + bit_k * t_slot``."""
    bits = as_bits(bits)
    k = np.arange(bits.size, dtype=float)
    return k * timing.t_sym + bits * timing.t_slot


def _arrivals(tx: np.ndarray, params: ChannelParams, rng: np.random.Generator):
    """Per-pulse arrival times and survival mask, in transmit order.

    Randomness is consumed as one (drop, delay) uniform pair per pulse, so a
    longer train sees the same realization on its common prefix.
    """
    u = rng.random((tx.size, 2))
    kept = u[:, 0] >= params.drop_rate
    if params.mean_delay > 0:
        delay = -params.mean_delay * np.log1p(-u[:, 1])
    else:
        delay = np.zeros(tx.size)
    return tx + delay, kept


def enforce_min_gap(rx: np.ndarray, min_gap: float) -> np.ndarray:
    """Push sorted arrivals later so consecutive pulses are at least ``min_gap`` apart."""
    out = np.array(rx, dtype=float)
    for j in range(1, out.size):
        if out[j] < out[j - 1] + min_gap:
            out[j] = out[j - 1] + min_gap
    return out


def apply_channel(tx, params: ChannelParams, rng: np.random.Generator,
                  min_gap: float = 0.0) -> np.ndarray:
    """Delay every pulse by Exp(lambda), drop it with probability rho, sort what survives."""
    tx = np.asarray(tx, dtype=float)
    arrive, kept = _arrivals(tx, params, rng)
    rx = np.sort(arrive[kept])
    if min_gap > 0:
        rx = enforce_min_gap(rx, min_gap)
    return rx


def _period_index(rx: np.ndarray, t_sym: float) -> np.ndarray:
    # floor(r / t_sym) can be off by one next to a boundary; correct it against
    # the boundaries exactly as modulate() computes them.
    idx = np.floor(rx / t_sym)
    idx -= rx < idx * t_sym
    idx += rx >= (idx + 1) * t_sym
    return idx.astype(np.int64)


def decide_word(rx, timing: GmTiming, n_symbols: int) -> np.ndarray:
    """Ternary decision per symbol period, looking only inside that period.

    A period with zero or several arrivals is an erasure, as is a lone arrival
    in the guard window. Arrivals at or past ``n_symbols * t_sym`` are ignored.
    Returns an int8 array of ``Ternary`` values, length ``n_symbols``.
    """
    if n_symbols < 1:
        raise ValueError("n_symbols must be >= 1")
    rx = np.asarray(rx, dtype=float)
    rx = rx[rx >= 0]
    idx = _period_index(rx, timing.t_sym)
    inside = idx < n_symbols
    rx, idx = rx[inside], idx[inside]

    counts = np.bincount(idx, minlength=n_symbols)
    out = np.full(n_symbols, ERASURE, dtype=np.int8)
    single = counts[idx] == 1
    r, i = rx[single], idx[single]
    start = i * timing.t_sym
    zero = r < start + timing.t_slot
    one = ~zero & (r < start + 2 * timing.t_slot)
    out[i[zero]] = Ternary.ZERO
    out[i[one]] = Ternary.ONE
    return out


def decide_word_hard(rx, timing: GmTiming, n_symbols: int) -> np.ndarray:
    """Binary slot decision for drop-free channels.

    A period decides 0 only when its single arrival sits in the zero slot;
    every other outcome (one slot, guard, empty, crowded) decides 1.
    """
    ternary = decide_word(rx, timing, n_symbols)
    return (ternary != Ternary.ZERO).astype(np.uint8)


def ternary_to_str(word) -> str:
    return "".join("01?"[int(s)] for s in word)
