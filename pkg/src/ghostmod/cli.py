"""Command-line entry point: ``ghostmod {capacity,ber-sweep,detect-sweep,simulate}``."""

from __future__ import annotations

import argparse
import sys

from . import harness
from .core import ConfigError, DegenerateExperiment, GmTiming, DEFAULT_DROP_RATE
from .fec import get_code
from .modem import ternary_to_str
from .sync import DEFAULT_T_BIN_FRAC, DEFAULT_THRESHOLD_FRAC

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE = 0, 2, 3

DEFAULT_DELAYS = "0.01,0.02,0.05,0.1,0.2,0.5,1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; '#' starts a comment, keys use '-' or '_'."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _delays(text: str) -> tuple:
    try:
        return tuple(float(x) for x in str(text).split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad --delays value {text!r}") from exc


def _optional_float(text):
    if text is None or str(text).lower() in ("", "none", "auto"):
        return None
    return float(text)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value file; command-line flags override it")
    common.add_argument("--t-slot", type=float, default=0.0175, help="slot duration in seconds")
    common.add_argument("--t-guard", type=float, default=0.005, help="guard duration in seconds")
    common.add_argument("--drop-rate", type=float, default=DEFAULT_DROP_RATE)
    common.add_argument("--delays", default=DEFAULT_DELAYS,
                        help="comma list of mean delays in units of t_slot")
    common.add_argument("--trials", type=int, default=100)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--code", default="none", help="builtin code name, or 'none'")
    common.add_argument("--t-bin-frac", type=float, default=DEFAULT_T_BIN_FRAC,
                        help="bin width as a fraction of t_slot")
    common.add_argument("--lambda-prime", default=None,
                        help="template delay rate (1/s); default is the simulated rate")
    common.add_argument("--threshold-frac", type=float, default=DEFAULT_THRESHOLD_FRAC)
    common.add_argument("--min-gap", type=float, default=0.0,
                        help="minimum spacing between received pulses (s)")
    common.add_argument("--out", help="CSV output path (default stdout)")

    parser = _Parser(prog="ghostmod", description="Ghost Modulation channel simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("capacity", parents=[common], help="capacity vs normalized delay")
    p.add_argument("--monte-carlo", action="store_true",
                   help="measure transition matrices by simulation instead of closed form")
    p.add_argument("--mc-symbols", type=int, default=100_000)

    p = sub.add_parser("ber-sweep", parents=[common], help="info-bit error rate vs delay")
    p.add_argument("--info-bits", type=int, default=1000, help="info bits per trial")

    p = sub.add_parser("detect-sweep", parents=[common], help="preamble detection MSE vs delay")
    p.add_argument("--n-preamble", type=int, default=30)
    p.add_argument("--stream-symbols", type=int, default=50)

    p = sub.add_parser("simulate", parents=[common], help="one framed run with a trace on stderr")
    p.add_argument("--info-bits", type=int, default=40)
    p.add_argument("--n-preamble", type=int, default=30)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        # Re-parse with the file's values as defaults so explicit flags still win.
        file_values = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(file_values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**file_values)
        args = parser.parse_args(argv)
        # Defaults given as strings are not run through type=; convert them here.
        for action in sub._actions:
            value = getattr(args, action.dest, None)
            if action.type is not None and isinstance(value, str):
                setattr(args, action.dest, action.type(value))
            elif action.const is True and isinstance(value, str):
                setattr(args, action.dest, value.lower() in ("1", "true", "yes", "on"))
    return args


def spec_from_args(args) -> harness.SweepSpec:
    code = None if str(args.code).lower() in ("none", "uncoded", "") else get_code(args.code)
    return harness.SweepSpec(
        timing=GmTiming(args.t_slot, args.t_guard),
        drop_rate=args.drop_rate,
        normalized_delays=_delays(args.delays),
        code=code,
        n_info_bits=getattr(args, "info_bits", 1000),
        n_trials=args.trials,
        seed=args.seed,
        t_bin_frac=args.t_bin_frac,
        lambda_prime=_optional_float(args.lambda_prime),
        threshold_frac=args.threshold_frac,
        min_gap=args.min_gap,
    )


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(args) -> int:
    spec = spec_from_args(args)
    if args.command == "capacity":
        points = harness.run_capacity_curve(spec.timing, spec.drop_rate, spec.normalized_delays,
                                            monte_carlo=args.monte_carlo,
                                            mc_symbols=args.mc_symbols, seed=spec.seed)
        _emit(harness.to_csv(harness.CAPACITY_COLUMNS, (p.row() for p in points)), args.out)
        return EXIT_OK

    if args.command == "ber-sweep":
        points = harness.run_ber_sweep(spec)
        _emit(harness.to_csv(harness.BER_COLUMNS, (p.row() for p in points)), args.out)
        return EXIT_OK

    if args.command == "detect-sweep":
        points = harness.run_detection_sweep(spec, args.n_preamble, args.stream_symbols)
        _emit(harness.to_csv(harness.DETECT_COLUMNS, (p.row() for p in points)), args.out)
        if all(p.detect_rate == 0 for p in points):
            raise DegenerateExperiment("no preamble was accepted at any delay")
        return EXIT_OK

    # simulate
    trace = harness.simulate(spec, spec.normalized_delays[0], args.n_preamble)
    det = trace.detection
    log = sys.stderr
    print(f"info bits    : {''.join(map(str, trace.info))}", file=log)
    print(f"channel bits : {''.join(map(str, trace.channel_bits))}", file=log)
    print(f"sent pulses  : {trace.tx.size + args.n_preamble}, received: {trace.rx.size}", file=log)
    print(f"preamble     : n_hat={det.n_hat} true={trace.true_start:.3f} "
          f"peak={det.peak_metric:.6g} accepted={det.accepted} "
          f"mean_delay_hat={det.mean_delay_hat:.6g}", file=log)
    print(f"decisions    : {ternary_to_str(trace.decisions)}", file=log)
    print(f"decoded      : {''.join(map(str, trace.decoded))}", file=log)
    print(f"bit errors   : {trace.bit_errors}/{trace.info.size}", file=log)
    _emit(harness.to_csv(harness.SIMULATE_COLUMNS, trace.rows()), args.out)
    if not det.accepted:
        raise DegenerateExperiment("preamble not acquired")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        return run(args)
    except (UsageError, ConfigError, KeyError, ValueError) as exc:
        print(f"ghostmod: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateExperiment as exc:
        print(f"ghostmod: degenerate experiment: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
