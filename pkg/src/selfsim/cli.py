"""``selfsim`` command line: calibrate, generate, analyze.

Exit codes: 0 success, 1 usage, 2 infeasible target, 3 non-convergence,
4 I/O or file format, 5 degenerate analysis input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import trace_io
from .aggregator import achieved_bit_rate, generate_trace, relative_error
from .analysis import VarianceTimeHurst, default_bin_width
from .calibration import BETA_OFF_BOUNDS, calibrate
from .exceptions import (
    DegenerateSeriesError,
    InfeasibleTargetError,
    InsufficientDataError,
    NonConvergenceError,
    ParameterDomainError,
    SingularFitError,
    TraceFormatError,
    TraceValidationError,
)
from .source_model import SIZE_FIXED, SIZE_POLICIES

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4
EXIT_DEGENERATE = 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def history_path(config_path) -> Path:
    p = Path(config_path)
    return p.with_name(p.stem + ".history.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="selfsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cal = sub.add_parser("calibrate", help="tune beta_off and N until the achieved rate hits the target")
    cal.add_argument("--rate", type=float, required=True, help="target load r (bit/s)")
    cal.add_argument("--link-rate", type=float, required=True, help="link rate R (bit/s)")
    cal.add_argument("--alpha-on", type=float, default=1.6)
    cal.add_argument("--tolerance", type=float, default=0.02, help="relative rate tolerance")
    cal.add_argument("--packets", type=int, default=200_000, help="packets per trial trace")
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--sources", type=int, default=32, help="initial N")
    cal.add_argument("--beta-off", type=float, default=1e-3, help="initial minimum gap (s)")
    cal.add_argument("--max-iters", type=int, default=50)
    cal.add_argument("--size-policy", choices=SIZE_POLICIES, default=SIZE_FIXED)
    cal.add_argument("--phase-offset", action="store_true")
    cal.add_argument("--out", required=True, help="config file to write")

    gen = sub.add_parser("generate", help="write a trace from a config file")
    gen.add_argument("--config", required=True)
    gen.add_argument("--packets", type=int, help="override packet budget")
    gen.add_argument("--seed", type=int, help="override master seed")
    gen.add_argument("--out", required=True, help="trace file (.gz for gzip)")

    ana = sub.add_parser("analyze", help="variance-time Hurst estimate and ACF of a trace")
    ana.add_argument("--trace", required=True)
    ana.add_argument("--bin-width", type=float, help="seconds; default span/2^14 to 1 s.f.")
    ana.add_argument("--max-lag", type=int, default=100)
    ana.add_argument("--fit-min-m", type=int)
    ana.add_argument("--fit-max-m", type=int)
    ana.add_argument("--out-prefix", required=True)
    return parser


def cmd_calibrate(args) -> int:
    if not args.rate > 0 or not args.link_rate > 0:
        raise UsageError("--rate and --link-rate must be positive")
    if args.rate > args.link_rate:
        raise UsageError("--rate must not exceed --link-rate")
    if not 1 < args.alpha_on < 2:
        raise UsageError("--alpha-on must lie in (1, 2)")
    if args.tolerance <= 0 or args.packets < 2 or args.sources < 1 or args.max_iters < 1:
        raise UsageError("--tolerance, --packets, --sources and --max-iters must be positive")
    if not BETA_OFF_BOUNDS[0] <= args.beta_off <= BETA_OFF_BOUNDS[1]:
        raise UsageError(f"--beta-off must lie in {BETA_OFF_BOUNDS}")

    hist_file = history_path(args.out)
    try:
        res = calibrate(
            args.rate, args.link_rate, args.alpha_on, tolerance=args.tolerance,
            packet_budget=args.packets, master_seed=args.seed, n_sources=args.sources,
            beta_off=args.beta_off, max_iterations=args.max_iters,
            size_policy=args.size_policy, phase_offset=args.phase_offset,
        )
    except NonConvergenceError as exc:
        trace_io.write_history(exc.history, hist_file)
        print(f"not converged: {exc}; history in {hist_file}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    trace_io.write_calibration_result(res, args.out)
    trace_io.write_history(res.history, hist_file)
    cfg = res.config
    print(f"converged in {res.iterations} iteration(s): N={cfg.n_sources} "
          f"beta_off={cfg.beta_off:.6g} s alpha_on={cfg.alpha_on:.6g} alpha_off={cfg.alpha_off:.6g}")
    print(f"achieved rate {res.achieved_rate:.6g} b/s, relative error {res.relative_error:+.4%}")
    print(f"config: {args.out}  history: {hist_file}")
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = trace_io.read_config(args.config)
    changes = {}
    if args.packets is not None:
        if args.packets < 1:
            raise UsageError("--packets must be positive")
        changes["packet_budget"] = args.packets
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if changes:
        cfg = cfg.replace(**changes)
    trace = generate_trace(cfg)
    trace_io.write_trace(trace, trace_io.TraceFileHeader.from_config(cfg), args.out)
    print(f"wrote {len(trace)} packets to {args.out}")
    if len(trace) >= 2:
        rate = achieved_bit_rate(trace)
        err = relative_error(rate, cfg.target_rate)
        print(f"achieved rate {rate:.6g} b/s, target {cfg.target_rate:.6g} b/s, "
              f"relative error {err:+.4%}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    trace, _ = trace_io.read_trace(args.trace)
    if args.bin_width is not None and not args.bin_width > 0:
        raise UsageError("--bin-width must be positive")
    width = args.bin_width if args.bin_width is not None else default_bin_width(trace)
    est = VarianceTimeHurst(bin_width=width, fit_min_m=args.fit_min_m,
                            fit_max_m=args.fit_max_m, max_lag=args.max_lag).fit(trace)
    prefix = args.out_prefix
    trace_io.write_plot_data(est.points_, f"{prefix}.vt.csv")
    trace_io.write_plot_data(est.acf_, f"{prefix}.acf.csv")
    used = [round(10**p.log_m) for p in est.fit_points_]
    summary = [
        ("slope", est.slope_),
        ("hurst", est.hurst_),
        ("r_squared", est.r_squared_),
        ("points_used", est.estimate_.points_used),
        ("scales_used", ",".join(str(m) for m in used)),
        ("scales", ",".join(str(m) for m in est.scales_)),
        ("bin_width", width),
        ("bins", len(est.series_)),
        ("fit_min_m", args.fit_min_m),
        ("fit_max_m", args.fit_max_m),
        ("max_lag", len(est.acf_) - 1),
    ]
    text = "# variance-time Hurst estimate\n" + "".join(
        f"{k}={trace_io.format_value(v)}\n" for k, v in summary
    )
    trace_io.write_text(f"{prefix}.hurst.txt", text)
    print(f"H={est.hurst_:.4f} (slope {est.slope_:.4f}, r^2 {est.r_squared_:.4f}, "
          f"{est.estimate_.points_used} scales)")
    return EXIT_OK


_COMMANDS = {"calibrate": cmd_calibrate, "generate": cmd_generate, "analyze": cmd_analyze}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"selfsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleTargetError as exc:
        print(f"infeasible target: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DegenerateSeriesError, InsufficientDataError, SingularFitError) as exc:
        print(f"cannot analyze: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (OSError, TraceFormatError, TraceValidationError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ParameterDomainError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
