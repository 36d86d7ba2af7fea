"""Shared types for Ghost Modulation: timing geometry, channel parameters, seeding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class ConfigError(ValueError):
    """Invalid experiment or timing configuration."""


class DegenerateExperiment(RuntimeError):
    """An experiment ran but produced nothing usable (e.g. an input symbol never sent)."""


@dataclass(frozen=True)
class GmTiming:
    """Slot/guard geometry of one GM symbol period.

    The symbol period is always derived as ``2 * t_slot + t_g`` so it can
    never be stored inconsistently.
    """

    t_slot: float
    t_g: float

    def __post_init__(self):
        if not (self.t_slot > 0 and math.isfinite(self.t_slot)):
            raise ConfigError(f"t_slot must be positive, got {self.t_slot}")
        if not (self.t_g >= 0 and math.isfinite(self.t_g)):
            raise ConfigError(f"t_g must be nonnegative, got {self.t_g}")

    @property
    def t_sym(self) -> float:
        return 2 * self.t_slot + self.t_g


# Reference operating point, used as the default throughout.
DEFAULT_TIMING = GmTiming(t_slot=0.0175, t_g=0.005)
DEFAULT_DROP_RATE = 0.02
DEFAULT_N_PREAMBLE = 30
DEFAULT_N_STREAM = 50


@dataclass(frozen=True)
class ChannelParams:
    """Exponential delay with mean ``mean_delay`` (= 1/lambda), Bernoulli drops with rate ``drop_rate``."""

    mean_delay: float = 0.0
    drop_rate: float = 0.0

    def __post_init__(self):
        if not (self.mean_delay >= 0 and math.isfinite(self.mean_delay)):
            raise ConfigError(f"mean_delay must be >= 0, got {self.mean_delay}")
        if not 0 <= self.drop_rate <= 1:
            raise ConfigError(f"drop_rate must lie in [0, 1], got {self.drop_rate}")

    @property
    def rate(self) -> float:
        """Delay rate lambda; ``inf`` for the noiseless-delay channel."""
        return math.inf if self.mean_delay == 0 else 1.0 / self.mean_delay


def as_bits(bits) -> np.ndarray:
    """Validate and convert a bit sequence to a 1-D uint8 array."""
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("bit vector must be one-dimensional and nonempty")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bit vector may only contain 0 and 1")
    return arr.astype(np.uint8)


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer; a bijection on 64-bit integers."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_trial_seed(base: int, trial_index: int) -> int:
    """Seed for trial ``trial_index`` of a run seeded with ``base``.

    Injective in ``trial_index`` for a fixed base: the golden-ratio step is odd
    (a bijection mod 2**64) and the finalizer is a bijection too.
    """
    if trial_index < 0:
        raise ValueError("trial_index must be nonnegative")
    return splitmix64((base & MASK64) + _GOLDEN * (trial_index + 1))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & MASK64))
