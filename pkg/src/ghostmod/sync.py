"""Preamble acquisition and timing synchronization on a binned pulse stream."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, GmTiming, as_bits
from .modem import modulate

DEFAULT_T_BIN_FRAC = 1 / 7
DEFAULT_THRESHOLD_FRAC = 0.5


class UnusablePreamble(ValueError):
    """Too few arrivals after the detected start to estimate the delay."""


@dataclass(frozen=True)
class BinnedSignal:
    t_bin: float
    bins: np.ndarray

    def __len__(self):
        return self.bins.size


@dataclass(frozen=True)
class Template:
    """Delay-spread preamble template; ``weights[m]`` pairs with bin ``n + m`` of the stream."""

    weights: np.ndarray
    lambda_prime: float
    n_preamble: int
    t_bin: float

    @property
    def peak_bound(self) -> float:
        return self.n_preamble * self.lambda_prime

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True)
class DetectionResult:
    n_hat: int
    peak_metric: float
    accepted: bool
    mean_delay_hat: float | None = None

    def start_time(self, t_bin: float) -> float:
        return self.n_hat * t_bin


def bins_per_symbol(timing: GmTiming, t_bin: float) -> int:
    """Integer number of bins per symbol period; raises ConfigError otherwise."""
    if not t_bin > 0:
        raise ConfigError(f"t_bin must be positive, got {t_bin}")
    ratio = timing.t_sym / t_bin
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"t_sym / t_bin = {ratio!r} is not a positive integer")
    return n


def default_lambda_prime(timing: GmTiming, mean_delay: float | None) -> float:
    """Template rate: the true delay rate when known, else 2 / t_slot."""
    if mean_delay:
        return 1.0 / mean_delay
    return 2.0 / timing.t_slot


# Arrivals within this fraction of a bin below an edge count as on the edge, so
# schedule times that are exact bin multiples do not split on rounding noise.
EDGE_SNAP = 1e-9


def _bin_index(t: np.ndarray, t_bin: float) -> np.ndarray:
    return np.floor(np.asarray(t) / t_bin + EDGE_SNAP).astype(np.int64)


def bin_signal(rx, t_bin: float, n_bins: int) -> BinnedSignal:
    """Indicator binning: bin n is 1 when any pulse lands in [n*t_bin, (n+1)*t_bin)."""
    if not t_bin > 0:
        raise ConfigError(f"t_bin must be positive, got {t_bin}")
    rx = np.asarray(rx, dtype=float)
    bins = np.zeros(n_bins, dtype=np.uint8)
    idx = _bin_index(rx[rx >= 0], t_bin)
    bins[idx[idx < n_bins]] = 1
    return BinnedSignal(t_bin, bins)


def truncated_delay_pdf(timing: GmTiming, t_bin: float, lambda_prime: float) -> np.ndarray:
    """``lambda' * exp(-lambda' * t)`` sampled at bin starts over [0, t_slot + t_g)."""
    window = timing.t_slot + timing.t_g
    n_tail = max(1, math.ceil(window / t_bin - 1e-9))
    t = np.arange(n_tail) * t_bin
    return lambda_prime * np.exp(-lambda_prime * t)


def build_template(preamble, timing: GmTiming, t_bin: float, lambda_prime: float) -> Template:
    """Binned preamble impulse train convolved with the truncated delay pdf."""
    if not lambda_prime > 0:
        raise ConfigError(f"lambda_prime must be positive, got {lambda_prime}")
    preamble = as_bits(preamble)
    bps = bins_per_symbol(timing, t_bin)
    pdf = truncated_delay_pdf(timing, t_bin, lambda_prime)
    starts = _bin_index(modulate(preamble, timing), t_bin)

    length = max(preamble.size * bps, int(starts[-1]) + pdf.size)
    impulses = np.zeros(length)
    impulses[starts] = 1.0
    weights = np.convolve(impulses, pdf)[:length]
    return Template(weights, lambda_prime, preamble.size, t_bin)


def detection_metric(binned: BinnedSignal, template: Template) -> np.ndarray:
    """Sliding correlation ``M[n] = sum_m s[n + m] * Q[m]`` at every bin lag."""
    if len(binned) < len(template):
        raise ValueError(f"stream has {len(binned)} bins, template needs {len(template)}")
    return np.correlate(binned.bins.astype(float), template.weights, mode="valid")


def detect(binned: BinnedSignal, template: Template,
           threshold_frac: float = DEFAULT_THRESHOLD_FRAC) -> DetectionResult:
    """Locate the preamble start as the first lag of maximal correlation."""
    if not 0 < threshold_frac <= 1:
        raise ConfigError(f"threshold_frac must lie in (0, 1], got {threshold_frac}")
    metric = detection_metric(binned, template)
    n_hat = int(np.argmax(metric))
    peak = float(metric[n_hat])
    return DetectionResult(n_hat, peak, peak >= threshold_frac * template.peak_bound)


def estimate_mean_delay(rx, preamble, timing: GmTiming, t_hat_p: float) -> float:
    """Mean of (arrival - start - nominal offset) over the preamble arrivals, floored at 0.

    Assumes the preamble came through with no drops and no pulse leaving its
    own symbol period, so the first N_P arrivals from ``t_hat_p`` on are the
    preamble pulses in order.
    """
    preamble = as_bits(preamble)
    rx = np.asarray(rx, dtype=float)
    after = rx[rx >= t_hat_p]
    if after.size < preamble.size:
        raise UnusablePreamble(f"{after.size} arrivals after start, preamble has {preamble.size}")
    nominal = modulate(preamble, timing)
    est = float(np.mean(after[:preamble.size] - t_hat_p - nominal))
    return max(est, 0.0)


def synchronize(rx, preamble, timing: GmTiming, n_bins: int, t_bin: float | None = None,
                lambda_prime: float | None = None,
                threshold_frac: float = DEFAULT_THRESHOLD_FRAC) -> DetectionResult:
    """Bin, detect and estimate the mean delay in one pass.

    Falls back to ``1 / lambda_prime`` when the preamble is unusable for the
    delay estimate.
    """
    if t_bin is None:
        t_bin = timing.t_slot * DEFAULT_T_BIN_FRAC
    if lambda_prime is None:
        lambda_prime = default_lambda_prime(timing, None)
    template = build_template(preamble, timing, t_bin, lambda_prime)
    result = detect(bin_signal(rx, t_bin, n_bins), template, threshold_frac)
    try:
        delay = estimate_mean_delay(rx, preamble, timing, result.start_time(t_bin))
    except UnusablePreamble:
        delay = 1.0 / lambda_prime
    return DetectionResult(result.n_hat, result.peak_metric, result.accepted, delay)
