"""Brownian increments on dyadic grids with per-path counter streams.

Each path owns an independent Philox stream keyed by (seed, path index),
so the increments a path sees never depend on how many paths are drawn,
in which order, or on which worker thread.  Gaussians come from the
inverse normal CDF applied to uniforms built from the raw 64-bit output,
which keeps the draw count per step fixed and the values reproducible
across numpy versions of the Philox core.

Coarsening by a power of two sums consecutive fine increments.  It is
done one halving at a time so that coarsening to level j and then to
level j+1 gives bitwise the same numbers as coarsening straight to
level j+1; the strong-error estimator relies on that.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri


class BrownianError(ValueError):
    pass


def _gaussians(seed, path_index, count):
    """Standard normals number 0..count-1 of the stream (seed, path_index)."""
    key = np.array([seed, path_index], dtype=np.uint64)
    raw = np.random.Philox(key=key).random_raw(count)
    # 53 significant bits, offset to the cell centre so u is never 0 or 1
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


@dataclass
class BrownianGrid:
    """Increments of one path on a uniform grid over [0, horizon]."""

    seed: int
    path_index: int
    dim: int
    horizon: float
    increments: np.ndarray  # (steps, dim)

    @property
    def steps(self):
        return self.increments.shape[0]

    @property
    def dt(self):
        return self.horizon / self.steps

    def times(self):
        return np.linspace(0.0, self.horizon, self.steps + 1)


def brownian_increments(seed, path_index, dim, horizon, steps):
    """Draw one path's increments on the uniform ``steps``-point grid."""
    if steps < 1 or dim < 1:
        raise BrownianError("steps and dim must be positive")
    if horizon <= 0:
        raise BrownianError("horizon must be positive")
    z = _gaussians(seed, path_index, steps * dim).reshape(steps, dim)
    inc = z * np.sqrt(horizon / steps)
    return BrownianGrid(seed=int(seed), path_index=int(path_index), dim=dim,
                        horizon=float(horizon), increments=inc)


def increment_batch(seed, path_indices, dim, horizon, steps):
    """Increments for many paths at once, shape (n_paths, steps, dim)."""
    if steps < 1 or dim < 1:
        raise BrownianError("steps and dim must be positive")
    if horizon <= 0:
        raise BrownianError("horizon must be positive")
    path_indices = np.asarray(path_indices)
    out = np.empty((path_indices.shape[0], steps, dim))
    scale = np.sqrt(horizon / steps)
    for row, p in enumerate(path_indices):
        out[row] = _gaussians(seed, int(p), steps * dim).reshape(steps, dim) * scale
    return out


def _halve(arr, axis):
    n = arr.shape[axis]
    left = arr.take(np.arange(0, n, 2), axis=axis)
    right = arr.take(np.arange(1, n, 2), axis=axis)
    return left + right


def coarsen_array(increments, factor, axis=0):
    """Sum blocks of ``factor`` consecutive increments along ``axis``.

    ``factor`` must be a power of two not exceeding the grid size; the
    sum is accumulated by repeated pairwise halving (see module notes).
    """
    factor = int(factor)
    if factor < 1 or factor & (factor - 1):
        raise BrownianError("coarsening factor must be a power of two")
    arr = np.asarray(increments)
    if arr.shape[axis] % factor:
        raise BrownianError("grid size is not divisible by the coarsening factor")
    while factor > 1:
        arr = _halve(arr, axis)
        factor //= 2
    return arr


def coarsen(grid, factor):
    """Coarsened copy of a :class:`BrownianGrid`."""
    inc = coarsen_array(grid.increments, factor, axis=0)
    return BrownianGrid(seed=grid.seed, path_index=grid.path_index, dim=grid.dim,
                        horizon=grid.horizon, increments=inc)
