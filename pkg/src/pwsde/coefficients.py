"""Containers for SDE coefficients.

A coefficient set bundles the drift and diffusion callables together with
sup-norm bounds that the a priori estimates need.  Drift callables map a
batch of states ``(n, d)`` to drifts ``(n, d)``; diffusion callables map
``(n, d)`` to matrices ``(n, d, d)``.  Single points ``(d,)`` are accepted
too and give unbatched output.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import _as_batch, _unbatch


class CoefficientError(ValueError):
    pass


@dataclass
class CoefficientSet:
    """Drift, diffusion and their sup bounds for one SDE."""

    dim: int
    drift: Callable
    diffusion: Callable
    sup_drift: float
    sup_diffusion: float

    def __post_init__(self):
        if self.dim < 1:
            raise CoefficientError("dimension must be at least 1")
        if not (self.sup_drift >= 0 and np.isfinite(self.sup_drift)):
            raise CoefficientError("sup_drift must be finite and nonnegative")
        if not (self.sup_diffusion >= 0 and np.isfinite(self.sup_diffusion)):
            raise CoefficientError("sup_diffusion must be finite and nonnegative")

    def drift_at(self, x):
        pts, single = _as_batch(x, self.dim)
        return _unbatch(np.asarray(self.drift(pts), dtype=np.float64), single)

    def diffusion_at(self, x):
        pts, single = _as_batch(x, self.dim)
        return _unbatch(np.asarray(self.diffusion(pts), dtype=np.float64), single)

    def covariance_at(self, x):
        """sigma sigma^T evaluated pointwise."""
        sig = self.diffusion_at(x)
        if sig.ndim == 2:
            return sig @ sig.T
        return np.einsum("nik,njk->nij", sig, sig)


@dataclass
class PiecewiseDrift:
    """Drift given by one smooth expression per side of a hypersurface.

    The two branches must each be globally Lipschitz; only the glued
    field is allowed to jump.  Points exactly on the surface use the
    nonnegative-distance branch, matching the convention that indicator
    functions are closed on the positive side.
    """

    surface: object
    branch_negative: Callable
    branch_positive: Callable
    branch_negative_jac: Optional[Callable] = None
    branch_positive_jac: Optional[Callable] = None

    def side(self, x):
        """0 on the negative side of the surface, 1 on the other."""
        d = self.surface.signed_distance(x)
        return (np.asarray(d) >= 0.0).astype(np.int64)

    def __call__(self, x):
        pts, single = _as_batch(x, self.surface.dim)
        d = self.surface.signed_distance(pts)
        neg = np.asarray(self.branch_negative(pts), dtype=np.float64)
        pos = np.asarray(self.branch_positive(pts), dtype=np.float64)
        out = np.where((d >= 0.0)[:, None], pos, neg)
        return _unbatch(out, single)

    def jump(self, xi):
        """Drift jump across the surface at surface points: negative minus positive limit."""
        pts, single = _as_batch(xi, self.surface.dim)
        neg = np.asarray(self.branch_negative(pts), dtype=np.float64)
        pos = np.asarray(self.branch_positive(pts), dtype=np.float64)
        return _unbatch(neg - pos, single)
