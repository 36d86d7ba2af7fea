"""Acceptance checks, one group per criterion, each tagged with ``criterion(n)``."""

import itertools
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from ghostmod import harness
from ghostmod.bcec import (TransitionMatrix, bec, capacity, estimate_transitions_mc,
                          transitions_closed_form)
from ghostmod.core import ChannelParams, GmTiming, DEFAULT_TIMING, make_rng
from ghostmod.fec import builtin_codes, decode_ml_erasure, encode, get_code, info_words
from ghostmod.modem import ERASURE, apply_channel, decide_word, modulate
from ghostmod.sync import bin_signal, build_template, detect, estimate_mean_delay
from oracles import grid_capacity, random_matrix

T = DEFAULT_TIMING
T_BIN = T.t_slot / 7
BPS = 16


def hb(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


# 1. capacity oracles

@pytest.mark.criterion(1)
def test_c1_capacity_oracles():
    start = time.perf_counter()
    for e in np.round(np.arange(0, 1.0, 0.1), 10):
        res = capacity(bec(e))
        assert res.capacity_bits == pytest.approx(1 - e, abs=1e-8)
        assert res.gamma_star == pytest.approx(0.5, abs=1e-8)

    p = 0.11
    bsc = TransitionMatrix([[1 - p, p, 0], [p, 1 - p, 0]])
    assert capacity(bsc).capacity_bits == pytest.approx(1 - hb(p), abs=1e-6)

    z = TransitionMatrix([[1, 0, 0], [0.5, 0.5, 0]])
    res = capacity(z)
    assert res.capacity_bits == pytest.approx(math.log2(1.25), abs=1e-6)
    elapsed = time.perf_counter() - start

    c_grid, g_grid = grid_capacity(z, step=1e-6)
    assert res.capacity_bits == pytest.approx(c_grid, abs=1e-6)
    assert res.gamma_star == pytest.approx(g_grid, abs=2e-6)
    # the grid oracle is the slow part; the solver itself must be quick
    assert elapsed < 1.0


# 2. gamma* bound

@pytest.mark.criterion(2)
def test_c2_gamma_star_bound():
    rng = make_rng(2024)
    start = time.perf_counter()
    checked = 0
    for _ in range(1000):
        res = capacity(random_matrix(rng))
        if res.capacity_bits > 1e-6:
            checked += 1
            assert 1 / math.e - 1e-6 < res.gamma_star < 1 - 1 / math.e + 1e-6
    assert time.perf_counter() - start < 10
    assert checked > 900


# 3. Monte Carlo vs closed form

@pytest.mark.criterion(3)
@pytest.mark.parametrize("lam_t_slot", [math.log(2), 0.1])
@pytest.mark.parametrize("rho", [0.0, 0.02])
def test_c3_mc_matches_closed_form(lam_t_slot, rho):
    mean = T.t_slot / lam_t_slot
    timing = GmTiming(T.t_slot, 10 * mean)
    params = ChannelParams(mean, rho)
    n = 1_000_000
    start = time.perf_counter()
    mc = estimate_transitions_mc(timing, params, n, rng=31)
    assert time.perf_counter() - start < 30
    closed = transitions_closed_form(timing, params)
    n_row = n / 2
    for x, y in itertools.product(range(2), range(3)):
        p = closed[x, y]
        se = math.sqrt(max(p * (1 - p), 1 / n_row) / n_row)
        assert abs(mc[x, y] - p) <= 3 * se, (x, y, mc[x, y], p)


# 4. asymmetry

@pytest.mark.criterion(4)
@pytest.mark.parametrize("nd", [0.2, 0.25, 0.5, 1.0, 2.0, 5.0])
def test_c4_asymmetry_measured(nd):
    params = ChannelParams(nd * T.t_slot, 0.0)
    tm = estimate_transitions_mc(T, params, 100_000, rng=4, word_length=1)
    assert tm[1, 0] == 0.0
    assert tm[0, 1] > 0.0


@pytest.mark.criterion(4)
def test_c4_asymmetry_closed_form_grid():
    for nd in np.geomspace(2e-3, 1e3, 400):
        tm = transitions_closed_form(T, ChannelParams(nd * T.t_slot, 0.0))
        assert tm[1, 0] == 0.0
        assert tm[0, 1] > 0.0


# 5. detection peak bound

@pytest.mark.criterion(5)
def test_c5_aligned_peak():
    rng = make_rng(5)
    for lam in (1 / (0.01 * T.t_slot), 1 / T.t_slot, 2 / T.t_slot):
        preamble = rng.integers(0, 2, 30, dtype=np.uint8)
        bits = rng.integers(0, 2, 60, dtype=np.uint8)
        bits[10:40] = preamble
        tpl = build_template(preamble, T, T_BIN, lam)
        res = detect(bin_signal(modulate(bits, T), T_BIN, 70 * BPS), tpl)
        assert res.n_hat == 10 * BPS
        assert abs(res.peak_metric - 30 * lam) <= 1e-9 * 30 * lam


@pytest.mark.criterion(5)
def test_c5_bound_never_exceeded():
    rng = make_rng(55)
    for _ in range(1000):
        preamble = rng.integers(0, 2, 30, dtype=np.uint8)
        nd = 10 ** rng.uniform(-2, 0.5)
        lam_prime = 10 ** rng.uniform(-1, 1) / (nd * T.t_slot)
        bits = rng.integers(0, 2, 80, dtype=np.uint8)
        pos = rng.integers(0, 50)
        bits[pos:pos + 30] = preamble
        params = ChannelParams(nd * T.t_slot, rng.choice([0.0, 0.02]))
        rx = apply_channel(modulate(bits, T), params, rng)
        tpl = build_template(preamble, T, T_BIN, lam_prime)
        res = detect(bin_signal(rx, T_BIN, 90 * BPS), tpl)
        assert res.peak_metric <= tpl.peak_bound * (1 + 1e-12)


# 6. detection sweep shape

@pytest.mark.criterion(6)
def test_c6_detection_sweep():
    spec = harness.SweepSpec(normalized_delays=(0.01, 0.1, 1.0), n_trials=1000, seed=6)
    start = time.perf_counter()
    low, _, high = harness.run_detection_sweep(spec, n_preamble=30, n_stream_symbols=50)
    assert time.perf_counter() - start < 300
    assert low.mse <= high.mse
    assert 0 < low.mse <= 1


# 7. mean-delay estimator

@pytest.mark.criterion(7)
@pytest.mark.parametrize("nd", [0.1, 0.5, 1.0])
def test_c7_mean_delay_estimator(nd):
    rng = make_rng(7)
    mean = nd * T.t_slot
    t_p = 0.3
    estimates = []
    for _ in range(100):
        preamble = rng.integers(0, 2, 1000, dtype=np.uint8)
        rx = apply_channel(t_p + modulate(preamble, T), ChannelParams(mean, 0.0), rng)
        estimates.append(estimate_mean_delay(rx, preamble, T, t_p))
    assert np.mean(estimates) == pytest.approx(mean, rel=0.05)


# 8. FEC correctness

def _patterns(n, d):
    """Every (error set, erasure set) with 2e + f < d."""
    for e in range(d):
        for f in range(d - 2 * e):
            for err in itertools.combinations(range(n), e):
                rest = [i for i in range(n) if i not in err]
                for era in itertools.combinations(rest, f):
                    yield err, era


@pytest.mark.criterion(8)
@pytest.mark.parametrize("code", [c for c in builtin_codes() if c.n <= 8], ids=lambda c: c.name)
def test_c8_exhaustive_small_codes(code):
    infos = info_words(code.k)
    words = encode(code, infos).astype(np.int8)
    for err, era in _patterns(code.n, code.min_distance):
        received = words.copy()
        received[:, list(err)] ^= 1
        received[:, list(era)] = ERASURE
        np.testing.assert_array_equal(decode_ml_erasure(code, received), infos)


@pytest.mark.criterion(8)
def test_c8_randomized_n16():
    code = get_code("rm-5-16")
    d = code.min_distance
    rng = make_rng(8)
    n_pat = 100_000
    infos = rng.integers(0, 2, (n_pat, code.k), dtype=np.uint8)
    received = encode(code, infos).astype(np.int8)
    e = rng.integers(0, (d - 1) // 2 + 1, n_pat)
    f = rng.integers(0, d - 2 * e)
    order = np.argsort(rng.random((n_pat, code.n)), axis=1)
    pos = np.arange(code.n)
    flip_mask = np.zeros_like(received, dtype=bool)
    erase_mask = np.zeros_like(received, dtype=bool)
    rows = np.arange(n_pat)[:, None]
    flip_mask[rows, order] = pos < e[:, None]
    erase_mask[rows, order] = (pos >= e[:, None]) & (pos < (e + f)[:, None])
    assert np.all(2 * flip_mask.sum(1) + erase_mask.sum(1) < d)
    received[flip_mask] ^= 1
    received[erase_mask] = ERASURE
    decoded = np.concatenate([decode_ml_erasure(code, received[i:i + 10_000])
                              for i in range(0, n_pat, 10_000)])
    np.testing.assert_array_equal(decoded, infos)


@pytest.mark.criterion(8)
@pytest.mark.parametrize("code", builtin_codes(), ids=lambda c: c.name)
def test_c8_round_trip(code):
    infos = info_words(code.k)
    np.testing.assert_array_equal(decode_ml_erasure(code, encode(code, infos)), infos)


# 9. coded vs uncoded

@pytest.mark.criterion(9)
def test_c9_hamming_beats_uncoded():
    base = dict(drop_rate=0.02, normalized_delays=(0.05,), n_info_bits=10_000, n_trials=100, seed=9)
    start = time.perf_counter()
    (uncoded,) = harness.run_ber_sweep(harness.SweepSpec(**base))
    (coded,) = harness.run_ber_sweep(harness.SweepSpec(code=get_code("hamm-4-7"), **base))
    assert time.perf_counter() - start < 300
    assert uncoded.info_bits >= 1_000_000 and coded.info_bits >= 1_000_000
    _, coded_hi = harness.wilson_interval(coded.bit_errors, coded.info_bits)
    uncoded_lo, _ = harness.wilson_interval(uncoded.bit_errors, uncoded.info_bits)
    assert coded_hi < uncoded_lo


# 10. noiseless identity

@pytest.mark.criterion(10)
def test_c10_noiseless_identity():
    rng = make_rng(10)
    words = rng.integers(0, 2, (10_000, 50), dtype=np.uint8)
    tx = modulate(words.ravel(), T)
    rx = apply_channel(tx, ChannelParams(0.0, 0.0), rng)
    decisions = decide_word(rx, T, words.size).reshape(words.shape)
    assert not np.any(decisions == ERASURE)
    np.testing.assert_array_equal(decisions, words)
    (pt,) = harness.run_ber_sweep(harness.SweepSpec(drop_rate=0, normalized_delays=(0,),
                                                    n_info_bits=50, n_trials=10_000, seed=10))
    assert pt.bit_errors == 0 and pt.ber == 0.0


# 11. CLI reproducibility

SUBCOMMANDS = {
    "capacity": "delays = 0,0.1,0.5,1\nmonte-carlo = true\nmc-symbols = 20000\n",
    "ber-sweep": "delays = 0.05,0.5\ntrials = 10\ncode = hamm-4-7\ninfo-bits = 500\n",
    "detect-sweep": "delays = 0.01,1\ntrials = 50\n",
    "simulate": "delays = 0.05\ncode = rm-4-8\ninfo-bits = 64\n",
}


@pytest.mark.criterion(11)
@pytest.mark.parametrize("command", sorted(SUBCOMMANDS))
def test_c11_cli_reproducible(command, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"seed = 11\n{SUBCOMMANDS[command]}")
    outputs = []
    for run in range(2):
        out = tmp_path / f"{run}.csv"
        proc = subprocess.run([sys.executable, "-m", "ghostmod", command, "--config", str(cfg),
                               "--out", str(out)], capture_output=True, text=True, check=False)
        assert proc.returncode == 0, proc.stderr
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    assert outputs[0].count(b"\n") >= 2
