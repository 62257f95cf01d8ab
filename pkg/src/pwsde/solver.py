"""Time-stepping drivers for both schemes.

Single-path helpers return full trajectories for plotting and tests;
:func:`simulate_batch` is the Monte Carlo workhorse.  It draws each
path's increments once on the finest requested grid and coarsens them
level by level, so the terminal states across levels are coupled through
the same Brownian path, which is what the strong-error estimator needs.

Paths are processed in fixed-size chunks.  Chunk boundaries depend only
on the path index, never on the worker count, and each path has its own
random stream, so a run is reproducible bit for bit no matter how many
threads are used.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .brownian import coarsen_array, increment_batch

#: paths per work item; fixed so thread count cannot influence results
CHUNK_SIZE = 256


class SolverError(ValueError):
    pass


@dataclass
class PathResult:
    """One simulated trajectory on a uniform grid."""

    scheme: str
    dt: float
    times: np.ndarray  # (steps + 1,)
    states: np.ndarray  # (steps + 1, dim)

    @property
    def terminal(self):
        return self.states[-1]


def euler_maruyama(coeffs, x0, grid):
    """Direct scheme along one Brownian path."""
    inc = grid.increments[None, :, :]
    states = kernels.pure.em_paths(coeffs, np.asarray(x0, dtype=np.float64), grid.dt, inc)[0]
    return PathResult(scheme="em", dt=grid.dt, times=grid.times(), states=states)


def transform_scheme(model, grid, x0=None):
    """Transformed scheme along one Brownian path, in original coordinates."""
    start = model.x0 if x0 is None else np.asarray(x0, dtype=np.float64)
    inc = grid.increments[None, :, :]
    states = kernels.pure.gm_paths(model, start, grid.dt, inc)[0]
    return PathResult(scheme="gm", dt=grid.dt, times=grid.times(), states=states)


def euler_maruyama_paths(coeffs, x0, dt, increments):
    """Batched full trajectories of the direct scheme (numpy backend)."""
    return kernels.pure.em_paths(coeffs, np.asarray(x0, dtype=np.float64), dt, increments)


def level_step_count(level):
    """Grid size of a refinement level (level 0 is the 4-step grid)."""
    if level < 0:
        raise SolverError("levels start at 0")
    return 2 ** (level + 2)


def level_dt(horizon, level):
    return horizon / level_step_count(level)


def simulate_batch(model, scheme, n_paths, levels, seed, threads=1, backend=None, x0=None):
    """Coupled terminal states for several refinement levels.

    Returns a dict mapping each requested level to an (n_paths, dim)
    array.  All levels of one path share the same underlying Brownian
    path; level k uses step size ``horizon / 2**(k+2)``.
    """
    levels = sorted(set(int(k) for k in levels))
    if not levels:
        raise SolverError("need at least one level")
    if levels[0] < 0:
        raise SolverError("levels start at 0")
    if n_paths < 1:
        raise SolverError("need at least one path")
    if scheme not in ("em", "gm"):
        raise SolverError(f"unknown scheme {scheme!r}")
    start = model.x0 if x0 is None else np.asarray(x0, dtype=np.float64)
    top = levels[-1]
    fine_steps = level_step_count(top)
    horizon = model.horizon
    out = {k: np.empty((n_paths, model.dim)) for k in levels}
    wanted = set(levels)

    def run_chunk(lo, hi):
        idx = np.arange(lo, hi)
        inc = increment_batch(seed, idx, model.dim, horizon, fine_steps)
        for k in range(top, levels[0] - 1, -1):
            if k in wanted:
                dt = level_dt(horizon, k)
                out[k][lo:hi] = kernels.terminal_states(
                    model, scheme, start, dt, inc, backend=backend
                )
            if k > levels[0]:
                inc = coarsen_array(inc, 2, axis=1)

    spans = [(lo, min(lo + CHUNK_SIZE, n_paths)) for lo in range(0, n_paths, CHUNK_SIZE)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda span: run_chunk(*span), spans))
    else:
        for span in spans:
            run_chunk(*span)
    return out
