"""Command line entry point.

Four subcommands: ``convergence`` estimates the strong order of a
scheme, ``benchmark`` compares the run time and error of both schemes,
``occupation`` measures the time paths spend near the interface and
``check`` audits the model assumptions.

Exit codes: 0 on success, 1 when a run finishes but reports a failed
check, 2 for usage or configuration problems.
"""

import argparse
import sys

from ..kernels import available_backends
from ..models import MODEL_BUILDERS, ModelError
from ..transform import TransformError
from .config import ConfigError, build_config, parse_levels, read_config_file
from .experiments import (
    run_benchmark,
    run_check,
    run_convergence,
    run_occupation,
    timing_path,
    write_benchmark_csv,
    write_check_csv,
    write_convergence_csv,
    write_occupation_csv,
)

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    # argparse already exits with 2 on bad flags; keep that, just route
    # the message to stderr without a traceback
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_common(sub):
    sub.add_argument("--model", choices=sorted(MODEL_BUILDERS), default=None,
                     help="model to simulate (default step_function)")
    sub.add_argument("--scheme", choices=["em", "gm", "both"], default=None,
                     help="direct (em), transformed (gm) or both")
    sub.add_argument("--paths", type=int, default=None, help="Monte Carlo sample size")
    sub.add_argument("--seed", type=int, default=None, help="base seed for the noise")
    sub.add_argument("--levels", default=None, metavar="K_MIN:K_MAX",
                     help="refinement range; level k runs 2^(k+2) steps")
    sub.add_argument("--config", default=None, metavar="FILE",
                     help="flat key = value settings file")
    sub.add_argument("--out", default=None, metavar="FILE",
                     help="write results to this CSV (timings go to *.timing.csv)")
    sub.add_argument("--threads", type=int, default=None,
                     help="worker threads; results do not depend on this")
    sub.add_argument("--backend", choices=["pure", "compiled"], default=None,
                     help="force a kernel backend (default: fastest available)")


def make_parser():
    parser = _Parser(prog="pwsde",
                     description="Monte Carlo schemes for diffusions with a drift "
                                 "that jumps across a surface")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("convergence", "estimate the strong convergence order of a scheme"),
        ("benchmark", "time both schemes on the same sample and compare errors"),
        ("occupation", "measure the time spent near the interface"),
        ("check", "audit the model assumptions (exit 1 if any fail)"),
    ]:
        sub = commands.add_parser(name, help=help_text)
        _add_common(sub)
    return parser


def _config_from_args(args):
    file_settings = read_config_file(args.config) if args.config else {}
    overrides = {
        "model": args.model,
        "scheme": args.scheme,
        "paths": args.paths,
        "seed": args.seed,
        "levels": parse_levels(args.levels) if args.levels else None,
        "threads": args.threads,
        "out": args.out,
        "backend": args.backend,
    }
    return build_config(file_settings, overrides)


def _fmt(x):
    return f"{x:.6g}"


def _print_convergence(reports):
    for rep in reports:
        print(f"model {rep.model}, scheme {rep.scheme}, {rep.paths} paths, "
              f"seed {rep.seed}, backend {rep.backend}")
        print("level  steps      dt          error       raw")
        for i, k in enumerate(rep.levels):
            print(f"{k:5d}  {rep.steps[i]:6d}  {_fmt(rep.dts[i]):>10s}  "
                  f"{_fmt(rep.errors[i]):>10s}  {_fmt(rep.raw_errors[i]):>10s}")
        if rep.degenerate_normalization:
            print("raw errors are at rounding noise level; the scheme is exact "
                  "for this model and the fitted order is meaningless")
        print(f"fitted order {rep.slope:.3f}   wall time {rep.seconds:.2f}s")


def _print_benchmark(report):
    print(f"model {report.model}, level {report.level}, backend {report.backend}")
    print("scheme  steps  paths   error        seconds")
    for r in report.rows:
        print(f"{r.scheme:6s}  {r.steps:5d}  {r.paths:5d}  {_fmt(r.raw_error):>10s}  "
              f"{r.seconds:9.3f}")
    em, gm = report.rows
    if em.seconds > 0:
        print(f"time ratio gm/em: {gm.seconds / em.seconds:.2f}")


def _print_occupation(model_name, stats):
    print(f"model {model_name}, {stats.n_paths} paths, dt {_fmt(stats.dt)}")
    print("eps       mean time   stderr")
    for i in range(len(stats.eps_values)):
        print(f"{_fmt(stats.eps_values[i]):>8s}  {_fmt(stats.occupations[i]):>9s}  "
              f"{_fmt(stats.stderrs[i]):>9s}")
    print(f"growth exponent in eps: {stats.exponent:.3f}")


def _print_check(report):
    print(f"model {report.model_name}")
    for c in report.checks:
        verdict = "pass" if c.passed else "FAIL"
        print(f"  {verdict}  {c.name:28s} value {_fmt(c.value):>10s}  "
              f"bound {_fmt(c.bound):>10s}")
    print("all assumptions hold" if report.satisfied else "some assumptions FAILED")


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config_from_args(args)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "convergence":
            reports = run_convergence(cfg)
            if not isinstance(reports, list):
                reports = [reports]
            if cfg.out:
                write_convergence_csv(cfg.out, reports)
                print(f"wrote {cfg.out} and {timing_path(cfg.out)}")
            else:
                _print_convergence(reports)
        elif args.command == "benchmark":
            report = run_benchmark(cfg)
            if cfg.out:
                write_benchmark_csv(cfg.out, report)
                print(f"wrote {cfg.out} and {timing_path(cfg.out)}")
            else:
                _print_benchmark(report)
        elif args.command == "occupation":
            stats = run_occupation(cfg)
            if cfg.out:
                write_occupation_csv(cfg.out, cfg.model, stats)
                print(f"wrote {cfg.out}")
            else:
                _print_occupation(cfg.model, stats)
        elif args.command == "check":
            report = run_check(cfg)
            if cfg.out:
                write_check_csv(cfg.out, report)
                print(f"wrote {cfg.out}")
            _print_check(report)
            if not report.satisfied:
                return EXIT_FAILED_CHECK
    except (ModelError, TransformError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ImportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
