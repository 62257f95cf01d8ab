"""Change of variables that removes a drift jump across a hypersurface.

The map acts only inside a tube around the interface.  A point x is
moved along a direction that depends on its closest surface point:

    apply(x) = x + ramp(dist(x)) * ratio(project(x)),

where ``ramp`` is an odd C^1 profile vanishing outside ``|t| < width``
together with its first derivative, and ``ratio`` is half the drift jump
scaled by the squared normal noise.  With this choice the transformed
drift no longer jumps across the surface: the kink that ``ramp``
introduces in the Ito correction exactly cancels the jump.  The map is
a Lipschitz perturbation of the identity, so for a small enough width it
is a global bijection and the inverse is computed by fixed-point
iteration.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .coefficients import CoefficientSet
from .geometry import _as_batch, _unbatch


class TransformError(ValueError):
    pass


class DegenerateNoiseError(TransformError):
    """Noise has no component across the interface, the jump ratio blows up."""


class WidthSelectionError(TransformError):
    pass


class TransformInversionError(RuntimeError):
    pass


def bump(u):
    """C^2 bump ``(1 - u^2)^3`` on [-1, 1], zero outside."""
    u = np.asarray(u, dtype=np.float64)
    inside = np.abs(u) <= 1.0
    w = np.where(inside, 1.0 - u * u, 0.0)
    return w * w * w


def _ramp(t, width):
    """Odd profile t|t| * bump(t/width); behaves like t|t| near zero."""
    v = t / width
    return t * np.abs(t) * bump(v)


def _ramp_d1(t, width):
    v = t / width
    inside = np.abs(v) <= 1.0
    f = np.where(inside, 1.0 - v * v, 0.0)
    return 2.0 * np.abs(t) * f * f * (1.0 - 4.0 * v * v)


def _ramp_d2(t, width):
    v = t / width
    inside = np.abs(v) <= 1.0
    f = np.where(inside, 1.0 - v * v, 0.0)
    sign = np.where(t >= 0.0, 1.0, -1.0)
    v2 = v * v
    return 2.0 * sign * f * (1.0 - 17.0 * v2 + 28.0 * v2 * v2)


def _fd_jacobian(fn, x, step):
    """Central-difference Jacobian of a batched vector field."""
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    out = np.empty((n, d, d))
    for m in range(d):
        xp = x.copy()
        xm = x.copy()
        xp[:, m] += step
        xm[:, m] -= step
        out[:, :, m] = (fn(xp) - fn(xm)) / (2.0 * step)
    return out


def _fd_hessian_contract(fn, x, mats, step):
    """Contract the (componentwise) Hessian of ``fn`` with matrices ``mats``."""
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    mats = np.asarray(mats, dtype=np.float64)
    if mats.ndim == 2:
        mats = np.broadcast_to(mats, (n, d, d))
    hess = np.empty((n, d, d, d))  # (point, component, i, j)
    base = fn(x)
    for i in range(d):
        for j in range(i, d):
            if i == j:
                xp = x.copy()
                xm = x.copy()
                xp[:, i] += step
                xm[:, i] -= step
                val = (fn(xp) - 2.0 * base + fn(xm)) / (step * step)
            else:
                xpp = x.copy()
                xpm = x.copy()
                xmp = x.copy()
                xmm = x.copy()
                xpp[:, i] += step
                xpp[:, j] += step
                xpm[:, i] += step
                xpm[:, j] -= step
                xmp[:, i] -= step
                xmp[:, j] += step
                xmm[:, i] -= step
                xmm[:, j] -= step
                val = (fn(xpp) - fn(xpm) - fn(xmp) + fn(xmm)) / (4.0 * step * step)
            hess[:, :, i, j] = val
            hess[:, :, j, i] = val
    return np.einsum("nkij,nij->nk", hess, 0.5 * (mats + np.swapaxes(mats, 1, 2)))


@dataclass
class JumpRatio:
    """Direction field of the straightening map.

    ``value`` must be a smooth ambient formula that agrees on the surface
    with (drift jump) / (2 * |sigma^T normal|^2).  Derivative callables
    are optional; finite differences of ``value`` fill in when they are
    missing.  ``hess_contract(xi, mats)`` returns the componentwise
    contraction sum_ij mats_ij d2 value_k / dxi_i dxi_j.
    """

    value: Callable
    jac: Optional[Callable] = None
    hess_contract: Optional[Callable] = None
    fd_step_jac: float = 6e-6
    fd_step_hess: float = 2e-4

    def value_at(self, xi):
        return np.asarray(self.value(np.asarray(xi, dtype=np.float64)), dtype=np.float64)

    def jac_at(self, xi):
        if self.jac is not None:
            return np.asarray(self.jac(np.asarray(xi, dtype=np.float64)), dtype=np.float64)
        return _fd_jacobian(self.value_at, xi, self.fd_step_jac)

    def hess_contract_at(self, xi, mats):
        if self.hess_contract is not None:
            return np.asarray(self.hess_contract(np.asarray(xi, dtype=np.float64), mats), dtype=np.float64)
        return _fd_hessian_contract(self.value_at, xi, mats, self.fd_step_hess)


def jump_ratio_from_pieces(drift, diffusion, min_normal_noise=1e-8):
    """Build the jump ratio of a piecewise drift with the given diffusion.

    ``drift`` is a :class:`~pwsde.coefficients.PiecewiseDrift`;
    ``diffusion`` maps a batch of points to matrices (n, d, d).  The
    returned ratio uses finite differences for its derivatives, so prefer
    a hand-written :class:`JumpRatio` when closed forms are available.
    """
    surface = drift.surface

    def value(x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        xi = surface.project(x)
        normal = surface.unit_normal(xi)
        sig = np.asarray(diffusion(x), dtype=np.float64)
        stn = np.einsum("nik,ni->nk", sig, normal)
        denom = np.sum(stn * stn, axis=1)
        if np.any(denom < min_normal_noise**2):
            raise DegenerateNoiseError(
                "noise component across the interface falls below "
                f"{min_normal_noise:g}; the jump cannot be removed here"
            )
        return drift.jump(x) / (2.0 * denom)[:, None]

    return JumpRatio(value=value)


@dataclass
class TransformParams:
    """Tuning knobs of the straightening map."""

    width: float
    tube_radius: float
    inversion_tol: float = 1e-12
    inversion_max_iter: int = 60
    min_normal_noise: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.width <= self.tube_radius):
            raise TransformError("need 0 < width <= tube_radius")
        if self.inversion_tol <= 0 or self.inversion_max_iter < 1:
            raise TransformError("bad inversion settings")


class JumpRemovalTransform:
    """The straightening map G, its derivatives and its inverse."""

    def __init__(self, surface, jump_ratio, params):
        if params.tube_radius > surface.reach:
            raise TransformError(
                f"tube radius {params.tube_radius} exceeds the surface reach {surface.reach}"
            )
        self.surface = surface
        self.jump_ratio = jump_ratio
        self.params = params
        self.dim = surface.dim

    # -- helpers -------------------------------------------------------

    def _active(self, pts):
        return self.surface.distance(pts) < self.params.width

    def _fiber_data(self, pts):
        """Signed distance, surface point, normal and ratio value for active rows."""
        t = self.surface.signed_distance(pts)
        xi = self.surface.project(pts)
        normal = self.surface.unit_normal(xi)
        ratio = self.jump_ratio.value_at(xi)
        return t, xi, normal, ratio

    # -- forward map ---------------------------------------------------

    def offset(self, x):
        """Displacement ``apply(x) - x``; zero outside the active tube."""
        pts, single = _as_batch(x, self.dim)
        out = np.zeros_like(pts)
        act = self._active(pts)
        if np.any(act):
            sub = pts[act]
            t, _, _, ratio = self._fiber_data(sub)
            out[act] = _ramp(t, self.params.width)[:, None] * ratio
        return _unbatch(out, single)

    def apply(self, x):
        pts, single = _as_batch(x, self.dim)
        return _unbatch(pts + self.offset(pts), single)

    # -- derivatives ---------------------------------------------------

    def _composite_jac(self, sub, xi, jac_ratio):
        pj = self.surface.projection_jacobian(sub)
        return np.einsum("nkm,nmi->nki", jac_ratio, pj)

    def jacobian(self, x):
        """Jacobian of the map, the identity outside the active tube."""
        pts, single = _as_batch(x, self.dim)
        n = pts.shape[0]
        out = np.broadcast_to(np.eye(self.dim), (n, self.dim, self.dim)).copy()
        act = self._active(pts)
        if np.any(act):
            sub = pts[act]
            t, xi, normal, ratio = self._fiber_data(sub)
            w = self.params.width
            g = _ramp(t, w)
            g1 = _ramp_d1(t, w)
            jac_ratio = self.jump_ratio.jac_at(xi)
            comp = self._composite_jac(sub, xi, jac_ratio)
            out[act] += g1[:, None, None] * ratio[:, :, None] * normal[:, None, :]
            out[act] += g[:, None, None] * comp
        return _unbatch(out, single)

    def ito_correction(self, x, cov):
        """Second-order term of the transformed drift.

        ``cov`` is sigma sigma^T per point, shape (n, d, d) or (d, d); the
        result is the vector with components 0.5 * sum_ij cov_ij d2 G_k.
        """
        pts, single = _as_batch(x, self.dim)
        cov = np.asarray(cov, dtype=np.float64)
        if cov.ndim == 2:
            cov = np.broadcast_to(cov, (pts.shape[0], self.dim, self.dim))
        # Hessians are symmetric, so only the symmetric part of cov matters
        cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
        out = np.zeros_like(pts)
        act = self._active(pts)
        if np.any(act):
            sub = pts[act]
            scov = cov[act]
            t, xi, normal, ratio = self._fiber_data(sub)
            w = self.params.width
            g = _ramp(t, w)
            g1 = _ramp_d1(t, w)
            g2 = _ramp_d2(t, w)
            jac_ratio = self.jump_ratio.jac_at(xi)
            comp = self._composite_jac(sub, xi, jac_ratio)

            cov_n = np.einsum("nij,nj->ni", scov, normal)
            nn = np.sum(normal * cov_n, axis=1)
            dist_h = self.surface.distance_hessian(sub)
            tr_h = np.einsum("nij,nij->n", scov, dist_h)

            pj = self.surface.projection_jacobian(sub)
            tangential = np.einsum("nmi,nij,nlj->nml", pj, scov, pj)
            hess_term = self.jump_ratio.hess_contract_at(xi, tangential)
            proj_bend = self.surface.projection_hessian_contract(sub, scov)
            hess_term = hess_term + np.einsum("nkm,nm->nk", jac_ratio, proj_bend)

            acc = (g2 * nn + g1 * tr_h)[:, None] * ratio
            acc += 2.0 * g1[:, None] * np.einsum("nki,ni->nk", comp, cov_n)
            acc += g[:, None] * hess_term
            out[act] = 0.5 * acc
        return _unbatch(out, single)

    def hessian_bilinear(self, x, v, w):
        """Second derivative of the map applied to a pair of vectors."""
        pts, single = _as_batch(x, self.dim)
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        w = np.atleast_2d(np.asarray(w, dtype=np.float64))
        v = np.broadcast_to(v, pts.shape)
        w = np.broadcast_to(w, pts.shape)
        # reuse the contraction path with the (possibly asymmetric) outer product
        mats = v[:, :, None] * w[:, None, :]
        out = 2.0 * self.ito_correction(pts, mats)
        return _unbatch(out, single)

    # -- inverse -------------------------------------------------------

    def invert(self, y):
        """Solve apply(x) = y by fixed-point iteration, row by row.

        Each row stops updating the moment its own step falls below the
        tolerance, so results do not depend on what else is in the batch.
        """
        pts, single = _as_batch(y, self.dim)
        z = pts.copy()
        active = np.ones(pts.shape[0], dtype=bool)
        tol = self.params.inversion_tol
        for _ in range(self.params.inversion_max_iter):
            zs = z[active]
            znew = pts[active] - self.offset(zs)
            step = np.max(np.abs(znew - zs), axis=1)
            z[active] = znew
            done = step < tol
            if np.all(done):
                active = np.zeros_like(active)
                break
            idx = np.flatnonzero(active)
            active[idx[done]] = False
        if np.any(active):
            raise TransformInversionError(
                f"{int(active.sum())} rows failed to invert within "
                f"{self.params.inversion_max_iter} iterations; the width is too large"
            )
        return _unbatch(z, single)

    # -- transformed equation ------------------------------------------

    def transformed_drift(self, z, base):
        """Drift of the image process at transformed coordinates ``z``."""
        pts, single = _as_batch(z, self.dim)
        x = self.invert(pts)
        jac = self.jacobian(x)
        mu = np.atleast_2d(base.drift_at(x))
        cov = base.covariance_at(x)
        if cov.ndim == 2:
            cov = cov[None, :, :]
        out = np.einsum("nkj,nj->nk", jac, mu) + self.ito_correction(x, cov)
        return _unbatch(out, single)

    def transformed_diffusion(self, z, base):
        pts, single = _as_batch(z, self.dim)
        x = self.invert(pts)
        jac = self.jacobian(x)
        sig = base.diffusion_at(x)
        return _unbatch(np.einsum("nkj,njl->nkl", jac, sig), single)

    def transformed_coefficients(self, base, sup_samples=None):
        """Coefficient set of the image process.

        Sup bounds are taken over ``sup_samples`` (a point cloud covering
        the region of interest) when given, otherwise over a deterministic
        cloud around the interface, with a 25 percent safety margin on top
        of the base bounds.
        """
        if sup_samples is None:
            sup_samples = self._default_samples()
        zs = np.atleast_2d(self.apply(sup_samples))
        zd = np.atleast_2d(self.transformed_drift(zs, base))
        sig = self.transformed_diffusion(zs, base)
        sup_mu = max(base.sup_drift, float(np.max(np.linalg.norm(zd, axis=1)))) * 1.25
        fro = np.sqrt(np.einsum("nkl,nkl->n", sig, sig))
        sup_sig = max(base.sup_diffusion, float(np.max(fro))) * 1.25
        return CoefficientSet(
            dim=self.dim,
            drift=lambda z: np.atleast_2d(self.transformed_drift(z, base)),
            diffusion=lambda z: self.transformed_diffusion(np.atleast_2d(z), base),
            sup_drift=sup_mu,
            sup_diffusion=sup_sig,
        )

    def _default_samples(self, count=256, seed=20240611):
        rng = np.random.Generator(np.random.Philox(seed))
        d = self.dim
        if self.surface.kind == "sphere":
            dirs = rng.standard_normal((count, d))
            dirs /= np.linalg.norm(dirs, axis=1)[:, None]
            xi = self.surface.center + self.surface.radius * dirs
        else:
            n = self.surface.normal_vector
            base = self.surface.project(np.zeros(d))
            tang = rng.standard_normal((count, d))
            tang -= (tang @ n)[:, None] * n
            xi = base + tang
        t = rng.uniform(-0.999, 0.999, size=count) * self.params.width
        normal = self.surface.unit_normal(xi)
        return xi + t[:, None] * normal


def choose_width(
    surface,
    jump_ratio,
    tube_radius,
    anchor=None,
    spread=1.0,
    target=0.5,
    levels=24,
    n_samples=512,
    seed=20240611,
):
    """Pick the largest dyadic width keeping the map a nice bijection.

    Candidates ``tube_radius * 2**-j`` are scanned from the widest down;
    the first one whose offset Jacobian stays below ``target`` in operator
    norm over a sampled tube cloud is returned.  ``anchor``/``spread``
    control where along the surface the cloud is centred and how far it
    extends (ignored for spheres, which are sampled uniformly).
    """
    rng = np.random.Generator(np.random.Philox(seed))
    d = surface.dim
    if surface.kind == "sphere":
        dirs = rng.standard_normal((n_samples, d))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        xi = surface.center + surface.radius * dirs
    else:
        n = surface.normal_vector
        base = surface.project(np.zeros(d) if anchor is None else np.asarray(anchor, dtype=np.float64))
        tang = rng.standard_normal((n_samples, d)) * spread
        tang -= (tang @ n)[:, None] * n
        xi = base + tang
    normal = surface.unit_normal(xi)
    offsets = rng.uniform(-0.999, 0.999, size=n_samples)

    for j in range(levels + 1):
        width = tube_radius * 2.0**-j
        pts = xi + (offsets * width)[:, None] * normal
        trial = JumpRemovalTransform(
            surface, jump_ratio, TransformParams(width=width, tube_radius=tube_radius)
        )
        jac = np.atleast_3d(trial.jacobian(pts)) - np.eye(d)
        opnorm = np.linalg.svd(jac, compute_uv=False)[:, 0].max()
        if opnorm <= target:
            return width
    raise WidthSelectionError(
        f"no width down to {tube_radius * 2.0**-levels:g} keeps the offset "
        f"Jacobian below {target}"
    )
