"""End-to-end GM experiments: BER sweeps, detection-MSE sweeps, capacity curves."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import bcec
from .core import (ChannelParams, ConfigError, GmTiming, DEFAULT_DROP_RATE, DEFAULT_TIMING,
                   derive_trial_seed, make_rng)
from .fec import LinearCode, decode_ml_erasure, encode
from .modem import ERASURE, apply_channel, decide_word, modulate
from .sync import (DEFAULT_T_BIN_FRAC, DEFAULT_THRESHOLD_FRAC, bin_signal, bins_per_symbol,
                   build_template, default_lambda_prime, detect, synchronize)

Z95 = 1.959963984540054
# Receiver window opens this many symbol periods before its first arrival,
# leaving room for leading drops and a late first pulse.
RECEIVER_LEAD_SYMBOLS = 3

# Substream labels under a trial seed; schemes that share a trial index share these.
_INFO, _CHANNEL, _COIN, _STREAM = 0, 1, 2, 3

BER_COLUMNS = ["normalized_delay", "code", "rate", "trials", "info_bits", "bit_errors", "ber", "ci95"]
DETECT_COLUMNS = ["normalized_delay", "trials", "mse", "detect_rate"]
CAPACITY_COLUMNS = ["normalized_delay", "drop_rate", "capacity_bits", "gamma_star"]
SIMULATE_COLUMNS = ["symbol", "tx_bit", "tx_time", "decision"]


@dataclass(frozen=True)
class SweepSpec:
    timing: GmTiming = DEFAULT_TIMING
    drop_rate: float = DEFAULT_DROP_RATE
    normalized_delays: tuple = (0.05,)
    code: LinearCode | None = None
    n_info_bits: int = 1000
    n_trials: int = 100
    seed: int = 0
    t_bin_frac: float = DEFAULT_T_BIN_FRAC
    lambda_prime: float | None = None
    threshold_frac: float = DEFAULT_THRESHOLD_FRAC
    min_gap: float = 0.0

    def __post_init__(self):
        delays = tuple(float(d) for d in self.normalized_delays)
        if not delays:
            raise ConfigError("normalized_delays must not be empty")
        if any(not (d >= 0 and math.isfinite(d)) for d in delays):
            raise ConfigError(f"normalized delays must be finite and >= 0, got {delays}")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.n_info_bits < 1:
            raise ConfigError("n_info_bits must be >= 1")
        if not 0 <= self.drop_rate <= 1:
            raise ConfigError(f"drop_rate must lie in [0, 1], got {self.drop_rate}")
        if self.min_gap < 0:
            raise ConfigError("min_gap must be >= 0")
        object.__setattr__(self, "normalized_delays", delays)

    def channel(self, normalized_delay: float) -> ChannelParams:
        return ChannelParams(normalized_delay * self.timing.t_slot, self.drop_rate)

    @property
    def t_bin(self) -> float:
        return self.timing.t_slot * self.t_bin_frac


@dataclass(frozen=True)
class BerPoint:
    normalized_delay: float
    code_name: str
    rate: float
    trials: int
    info_bits: int
    bit_errors: int
    ber: float
    ci95_halfwidth: float

    def row(self):
        return [self.normalized_delay, self.code_name, self.rate, self.trials, self.info_bits,
                self.bit_errors, self.ber, self.ci95_halfwidth]


@dataclass(frozen=True)
class DetectionPoint:
    normalized_delay: float
    trials: int
    mse: float
    detect_rate: float
    squared_errors: np.ndarray = field(repr=False, compare=False, default=None)

    def row(self):
        return [self.normalized_delay, self.trials, self.mse, self.detect_rate]


@dataclass(frozen=True)
class CapacityPoint:
    normalized_delay: float
    drop_rate: float
    capacity_bits: float
    gamma_star: float

    def row(self):
        return [self.normalized_delay, self.drop_rate, self.capacity_bits, self.gamma_star]


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


def wilson_halfwidth(successes: int, n: int, z: float = Z95) -> float:
    lo, hi = wilson_interval(successes, n, z)
    return (hi - lo) / 2


def _trial_rngs(seed: int, trial: int):
    ts = derive_trial_seed(seed, trial)
    return {label: make_rng(derive_trial_seed(ts, label)) for label in (_INFO, _CHANNEL, _COIN, _STREAM)}


def transmit(bits, timing: GmTiming, params: ChannelParams, rng: np.random.Generator,
             min_gap: float = 0.0) -> np.ndarray:
    """Modulate, pass through the channel, and return the ternary decisions."""
    tx = modulate(bits, timing)
    rx = apply_channel(tx, params, rng, min_gap=min_gap)
    return decide_word(rx, timing, tx.size)


def _ber_trial(spec: SweepSpec, params: ChannelParams, trial: int) -> tuple[int, int]:
    rngs = _trial_rngs(spec.seed, trial)
    k = spec.code.k if spec.code else 1
    n_blocks = -(-spec.n_info_bits // k)
    info = rngs[_INFO].integers(0, 2, n_blocks * k, dtype=np.uint8)

    if spec.code is None:
        ternary = transmit(info, spec.timing, params, rngs[_CHANNEL], spec.min_gap)
        # A receiver forced to guess resolves each erasure with a fair coin.
        coin = rngs[_COIN].integers(0, 2, ternary.size, dtype=np.uint8)
        decided = np.where(ternary == ERASURE, coin, ternary).astype(np.uint8)
    else:
        code = spec.code
        channel_bits = encode(code, info.reshape(n_blocks, k)).ravel()
        ternary = transmit(channel_bits, spec.timing, params, rngs[_CHANNEL], spec.min_gap)
        decided = decode_ml_erasure(code, ternary.reshape(n_blocks, code.n)).ravel()

    n = spec.n_info_bits
    return int(np.count_nonzero(decided[:n] != info[:n])), n


def run_ber_sweep(spec: SweepSpec) -> list[BerPoint]:
    """Info-bit error rate per normalized delay for ``spec.code`` (uncoded if None).

    Trial t draws its bits and channel from the same seeds whatever the code,
    so coded and uncoded runs are paired on the common prefix of channel uses.
    """
    code_name = spec.code.name if spec.code else "uncoded"
    rate = spec.code.rate if spec.code else 1.0
    points = []
    for nd in spec.normalized_delays:
        params = spec.channel(nd)
        errors = bits = 0
        for trial in range(spec.n_trials):
            e, b = _ber_trial(spec, params, trial)
            errors += e
            bits += b
        points.append(BerPoint(nd, code_name, rate, spec.n_trials, bits, errors, errors / bits,
                               wilson_halfwidth(errors, bits)))
    return points


def receiver_clock(rx: np.ndarray, timing: GmTiming, t_bin: float) -> float:
    """Time origin of a receiver with no shared clock.

    The window opens a few symbol periods before the first arrival, shifted so
    that arrival sits mid-bin; pulses then change bins only when their delay
    differs from the first one by more than half a bin.
    """
    first = float(rx[0]) if rx.size else 0.0
    return first - RECEIVER_LEAD_SYMBOLS * timing.t_sym - t_bin / 2


def _detection_trial(spec: SweepSpec, params: ChannelParams, trial: int, n_preamble: int,
                     n_stream_symbols: int, lambda_prime: float) -> tuple[float, bool]:
    timing = spec.timing
    t_bin = spec.t_bin
    bps = bins_per_symbol(timing, t_bin)
    rngs = _trial_rngs(spec.seed, trial)
    stream_rng = rngs[_STREAM]

    bits = stream_rng.integers(0, 2, n_stream_symbols, dtype=np.uint8)
    preamble = stream_rng.integers(0, 2, n_preamble, dtype=np.uint8)
    pos = int(stream_rng.integers(0, n_stream_symbols - n_preamble + 1))
    bits[pos:pos + n_preamble] = preamble

    rx = apply_channel(modulate(bits, timing), params, rngs[_CHANNEL], min_gap=spec.min_gap)
    origin = receiver_clock(rx, timing, t_bin)
    template = build_template(preamble, timing, t_bin, lambda_prime)
    binned = bin_signal(rx - origin, t_bin, (n_stream_symbols + RECEIVER_LEAD_SYMBOLS + 1) * bps + len(template))
    result = detect(binned, template, spec.threshold_frac)
    true_start = (pos * timing.t_sym - origin) / t_bin
    return (result.n_hat - true_start) ** 2, result.accepted


def run_detection_sweep(spec: SweepSpec, n_preamble: int = 30,
                        n_stream_symbols: int = 50) -> list[DetectionPoint]:
    """Mean squared preamble-start error (in bins squared) per normalized delay.

    Each trial hides a fresh random preamble at a random symbol position of a
    random GM stream; the receiver's bin grid starts from its first arrival.
    """
    if n_preamble < 1:
        raise ConfigError("n_preamble must be >= 1")
    if n_stream_symbols < n_preamble:
        raise ConfigError("stream must be at least as long as the preamble")
    bins_per_symbol(spec.timing, spec.t_bin)

    points = []
    for nd in spec.normalized_delays:
        params = spec.channel(nd)
        lam = spec.lambda_prime or default_lambda_prime(spec.timing, params.mean_delay)
        sq = np.empty(spec.n_trials)
        hits = 0
        for trial in range(spec.n_trials):
            sq[trial], accepted = _detection_trial(spec, params, trial, n_preamble,
                                                   n_stream_symbols, lam)
            hits += accepted
        points.append(DetectionPoint(nd, spec.n_trials, float(sq.mean()), hits / spec.n_trials, sq))
    return points


def run_capacity_curve(timing: GmTiming, drop_rate: float, normalized_delays,
                       monte_carlo: bool = False, mc_symbols: int = 100_000,
                       seed: int = 0) -> list[CapacityPoint]:
    """Capacity of the transition matrix at each normalized delay.

    By default the closed-form (isolated-symbol) matrix is used; with
    ``monte_carlo`` the matrix is measured from ``mc_symbols`` simulated symbols.
    """
    points = []
    for i, nd in enumerate(normalized_delays):
        params = ChannelParams(nd * timing.t_slot, drop_rate)
        if monte_carlo:
            tm = bcec.estimate_transitions_mc(timing, params, mc_symbols,
                                              make_rng(derive_trial_seed(seed, i)))
        else:
            tm = bcec.transitions_closed_form(timing, params)
        res = bcec.capacity(tm)
        points.append(CapacityPoint(float(nd), drop_rate, res.capacity_bits, res.gamma_star))
    return points


@dataclass
class SimulationTrace:
    info: np.ndarray
    channel_bits: np.ndarray
    tx: np.ndarray
    rx: np.ndarray
    detection: object
    true_start: float
    decisions: np.ndarray
    decoded: np.ndarray

    @property
    def bit_errors(self) -> int:
        return int(np.count_nonzero(self.decoded != self.info))

    def rows(self):
        for i, (b, t, d) in enumerate(zip(self.channel_bits, self.tx, self.decisions)):
            yield [i, int(b), float(t), "01?"[int(d)]]


def simulate(spec: SweepSpec, normalized_delay: float, n_preamble: int = 30) -> SimulationTrace:
    """One framed transmission: preamble plus payload, acquired and decoded blindly."""
    timing = spec.timing
    params = spec.channel(normalized_delay)
    rngs = _trial_rngs(spec.seed, 0)
    code = spec.code
    k = code.k if code else 1
    n_blocks = -(-spec.n_info_bits // k)
    info = rngs[_INFO].integers(0, 2, n_blocks * k, dtype=np.uint8)
    channel_bits = encode(code, info.reshape(n_blocks, k)).ravel() if code else info
    preamble = rngs[_STREAM].integers(0, 2, n_preamble, dtype=np.uint8)

    frame = np.concatenate([preamble, channel_bits])
    tx = modulate(frame, timing)
    # Everything below sees arrivals only on the receiver's own clock.
    rx_abs = apply_channel(tx, params, rngs[_CHANNEL], min_gap=spec.min_gap)
    origin = receiver_clock(rx_abs, timing, spec.t_bin)
    rx = rx_abs - origin

    t_bin = spec.t_bin
    bps = bins_per_symbol(timing, t_bin)
    lam = spec.lambda_prime or default_lambda_prime(timing, params.mean_delay)
    n_bins = (frame.size + RECEIVER_LEAD_SYMBOLS + 2) * bps
    det = synchronize(rx, preamble, timing, n_bins, t_bin, lam, spec.threshold_frac)

    payload_start = det.start_time(t_bin) + n_preamble * timing.t_sym
    decisions = decide_word(rx - payload_start, timing, channel_bits.size)
    if code:
        decoded = decode_ml_erasure(code, decisions.reshape(n_blocks, code.n)).ravel()
    else:
        coin = rngs[_COIN].integers(0, 2, decisions.size, dtype=np.uint8)
        decoded = np.where(decisions == ERASURE, coin, decisions).astype(np.uint8)
    return SimulationTrace(info, channel_bits, tx[n_preamble:], rx, det, -origin / t_bin,
                           decisions, decoded)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def to_csv(columns, rows) -> str:
    """CSV text with a header row, '.' decimals and shortest round-trip floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()
