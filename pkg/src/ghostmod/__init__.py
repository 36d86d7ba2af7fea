"""Simulation and analysis toolkit for Ghost Modulation covert timing channels."""

from .bcec import (CapacityResult, TransitionMatrix, capacity, estimate_transitions_mc,
                   mutual_information, transitions_closed_form)
from .core import (ChannelParams, ConfigError, DegenerateExperiment, GmTiming, DEFAULT_TIMING,
                   derive_trial_seed, make_rng)
from .fec import LinearCode, builtin_codes, decode_ml_erasure, encode, get_code
from .modem import Ternary, apply_channel, decide_word, decide_word_hard, modulate
from .sync import (BinnedSignal, DetectionResult, Template, bin_signal, build_template, detect,
                   estimate_mean_delay, synchronize)

__version__ = "0.1.0"
