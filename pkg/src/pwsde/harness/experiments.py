"""Experiment drivers behind the command line tool.

Each runner takes an :class:`~pwsde.harness.config.ExperimentConfig` and
returns a small report object; ``write_*_csv`` helpers serialize the
reports.  Result files never contain timings, those go to a separate
``*.timing.csv`` next to the result file, so repeated runs with the same
seed produce byte-identical result files no matter how the work was
scheduled.
"""

import dataclasses
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from ..analysis import check_assumptions, occupation_time
from ..kernels import active_backend
from ..models import get_model
from ..solver import level_dt, level_step_count, simulate_batch
from .config import ConfigError


@dataclass
class ConvergenceReport:
    model: str
    scheme: str
    paths: int
    seed: int
    levels: List[int]  # levels carrying an error (k_min + 1 .. k_max)
    steps: List[int]
    dts: List[float]
    raw_errors: List[float]  # coupled rms gap between level k and k - 1
    errors: List[float]  # raw errors scaled so the first entry is 0.5
    normalization: float
    slope: float  # least squares order in the step size
    seconds: float
    backend: str
    # raw errors at rounding-noise scale make ``errors`` and ``slope``
    # meaningless (the scheme is exact for the model); flagged, not raised
    degenerate_normalization: bool = False


def run_convergence(cfg, model=None):
    """Coupled-level strong error estimate for one scheme.

    The grids at levels ``k_min .. k_max`` all reuse the finest Brownian
    increments; the error at level k is the rms terminal gap to level
    k - 1, so the coarsest grid only serves as a partner and errors run
    from ``k_min + 1`` up.  Scheme ``both`` returns a list with one
    report per scheme.
    """
    if cfg.scheme == "both":
        return [run_convergence(_with_scheme(cfg, s), model) for s in ("em", "gm")]
    if model is None:
        model = get_model(cfg.model)
    lo, hi = cfg.levels
    if hi - lo < 2:
        raise ConfigError("convergence needs at least three levels (k_max - k_min >= 2)")
    start = time.perf_counter()
    states = simulate_batch(model, cfg.scheme, cfg.paths, list(range(lo, hi + 1)),
                            cfg.seed, threads=cfg.threads, backend=cfg.backend)
    seconds = time.perf_counter() - start
    err_levels = list(range(lo + 1, hi + 1))
    raw = []
    for k in err_levels:
        gap = states[k] - states[k - 1]
        raw.append(float(np.sqrt(np.mean(np.sum(gap * gap, axis=1)))))
    raw = np.maximum(raw, 1e-300)
    scale = 0.5 / raw[0]
    errors = scale * raw
    dts = [level_dt(model.horizon, k) for k in err_levels]
    slope = float(np.polyfit(np.log2(dts), np.log2(errors), 1)[0])
    return ConvergenceReport(
        model=cfg.model,
        scheme=cfg.scheme,
        paths=cfg.paths,
        seed=cfg.seed,
        levels=err_levels,
        steps=[level_step_count(k) for k in err_levels],
        dts=dts,
        raw_errors=[float(r) for r in raw],
        errors=[float(e) for e in errors],
        normalization=float(scale),
        slope=slope,
        seconds=seconds,
        backend=cfg.backend or active_backend(),
        degenerate_normalization=bool(raw[0] < 1e-12),
    )


def _with_scheme(cfg, scheme):
    return dataclasses.replace(cfg, scheme=scheme)


@dataclass
class BenchmarkRow:
    scheme: str
    steps: int
    paths: int
    raw_error: float
    seconds: float


@dataclass
class BenchmarkReport:
    model: str
    seed: int
    level: int
    backend: str
    rows: List[BenchmarkRow]


def run_benchmark(cfg, model=None):
    """Wall-clock and error comparison of the two schemes on one model.

    Both schemes run the same path count at the configured bench level
    (with one coarser level for the coupled error estimate), one after
    the other on a single thread so the timings are comparable.
    """
    if model is None:
        model = get_model(cfg.model)
    k = cfg.bench_level
    rows = []
    for scheme in ("em", "gm"):
        start = time.perf_counter()
        states = simulate_batch(model, scheme, cfg.bench_paths, [k - 1, k], cfg.seed,
                                threads=1, backend=cfg.backend)
        seconds = time.perf_counter() - start
        gap = states[k] - states[k - 1]
        raw = float(np.sqrt(np.mean(np.sum(gap * gap, axis=1))))
        rows.append(BenchmarkRow(
            scheme=scheme,
            steps=level_step_count(k),
            paths=cfg.bench_paths,
            raw_error=raw,
            seconds=seconds,
        ))
    return BenchmarkReport(
        model=cfg.model,
        seed=cfg.seed,
        level=k,
        backend=cfg.backend or active_backend(),
        rows=rows,
    )


def run_occupation(cfg, model=None):
    """Tube occupation statistics for the configured model."""
    if model is None:
        model = get_model(cfg.model)
    scheme = "gm" if cfg.scheme == "gm" else "em"
    return occupation_time(
        model.coefficients,
        model.surface,
        model.x0,
        model.horizon,
        cfg.occupation_eps,
        n_paths=cfg.paths,
        steps=cfg.occupation_steps,
        seed=cfg.seed,
        scheme=scheme,
        model=model,
    )


def run_check(cfg, model=None):
    """Audit the model assumptions; the report says whether all hold."""
    if model is None:
        model = get_model(cfg.model)
    return check_assumptions(model)


# ---------------------------------------------------------------------
# serialization

def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows):
    """Comma separated, '.' decimal marker, one header line, LF endings."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def timing_path(out):
    """Result file name with a .timing.csv suffix for the wall clock data."""
    p = Path(out)
    stem = p.name[:-4] if p.name.endswith(".csv") else p.name
    return p.with_name(stem + ".timing.csv")


def write_convergence_csv(out, reports):
    header = ["model", "scheme", "paths", "seed", "level", "steps", "dt",
              "raw_error", "error", "slope"]
    rows = []
    for rep in reports:
        for i, k in enumerate(rep.levels):
            rows.append([rep.model, rep.scheme, rep.paths, rep.seed, k, rep.steps[i],
                         rep.dts[i], rep.raw_errors[i], rep.errors[i], rep.slope])
    write_csv(out, header, rows)
    trows = [[rep.model, rep.scheme, rep.backend, rep.seconds] for rep in reports]
    write_csv(timing_path(out), ["model", "scheme", "backend", "seconds"], trows)


def write_benchmark_csv(out, report):
    header = ["model", "scheme", "level", "steps", "paths", "raw_error"]
    rows = [[report.model, r.scheme, report.level, r.steps, r.paths, r.raw_error]
            for r in report.rows]
    write_csv(out, header, rows)
    trows = [[report.model, r.scheme, report.backend, r.seconds] for r in report.rows]
    write_csv(timing_path(out), ["model", "scheme", "backend", "seconds"], trows)


def write_occupation_csv(out, model_name, stats):
    header = ["model", "paths", "steps", "eps", "mean_time", "stderr", "exponent"]
    rows = [[model_name, stats.n_paths, int(round(stats.horizon / stats.dt)),
             stats.eps_values[i], stats.occupations[i], stats.stderrs[i], stats.exponent]
            for i in range(len(stats.eps_values))]
    write_csv(out, header, rows)


def write_check_csv(out, report):
    header = ["model", "check", "passed", "value", "bound", "note"]
    rows = [[report.model_name, c.name, c.passed, c.value, c.bound, c.note]
            for c in report.checks]
    write_csv(out, header, rows)
