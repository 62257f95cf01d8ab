"""Hypersurfaces that can act as drift discontinuity interfaces.

Every surface here is a smooth codimension-one set with an explicit
closest-point projection, unit normal field and signed distance.  The
drift-jump removal machinery additionally needs first and second
derivatives of the projection and of the distance, so each family
exposes those in closed form as well.  Points are handled in batches of
shape ``(n, d)``; a single point of shape ``(d,)`` is accepted everywhere
and returns unbatched results.
"""

import numpy as np

#: tolerance used when a point is required to lie exactly on the surface
SURFACE_TOL = 1e-10


class GeometryError(ValueError):
    pass


class ProjectionError(GeometryError):
    """Closest-point projection is not defined (or not unique) at a point."""


class OffSurfaceError(GeometryError):
    """A surface-only quantity was requested away from the surface."""


def _as_batch(x, dim):
    """Return ``(points, single)`` with points of shape (n, dim)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise GeometryError(f"expected point of dimension {dim}, got {x.shape[0]}")
        return x[None, :], True
    if x.ndim != 2 or x.shape[1] != dim:
        raise GeometryError(f"expected points of shape (n, {dim}), got {x.shape}")
    return x, False


def _unbatch(val, single):
    return val[0] if single else val


class Hyperplane:
    """Affine hyperplane ``{x : a . x = b}``.

    Parameters
    ----------
    normal : array_like, shape (d,)
        Any nonzero vector orthogonal to the plane.  It is normalised on
        construction; the sign convention of the signed distance follows
        the direction given here.
    offset : float
        Right-hand side b of the defining equation.
    """

    kind = "hyperplane"

    def __init__(self, normal, offset):
        a = np.asarray(normal, dtype=np.float64)
        if a.ndim != 1:
            raise GeometryError("normal must be a vector")
        if not np.all(np.isfinite(a)) or not np.isfinite(offset):
            raise GeometryError("hyperplane parameters must be finite")
        norm = np.linalg.norm(a)
        if norm == 0.0:
            raise GeometryError("normal vector must be nonzero")
        self.dim = a.shape[0]
        self.normal_vector = a / norm
        self.offset = float(offset) / norm
        # a flat surface never folds back on itself
        self.reach = np.inf

    def signed_distance(self, x):
        """Signed distance, positive on the side the normal points to."""
        pts, single = _as_batch(x, self.dim)
        d = pts @ self.normal_vector - self.offset
        return _unbatch(d, single)

    def distance(self, x):
        return np.abs(self.signed_distance(x))

    def project(self, x):
        """Closest point on the plane."""
        pts, single = _as_batch(x, self.dim)
        d = pts @ self.normal_vector - self.offset
        out = pts - d[:, None] * self.normal_vector[None, :]
        return _unbatch(out, single)

    def unit_normal(self, xi):
        """Unit normal at a surface point ``xi`` (constant field here)."""
        pts, single = _as_batch(xi, self.dim)
        res = np.abs(pts @ self.normal_vector - self.offset)
        if np.any(res > SURFACE_TOL):
            raise OffSurfaceError(f"point is {res.max():.3e} away from the plane")
        out = np.broadcast_to(self.normal_vector, pts.shape).copy()
        return _unbatch(out, single)

    def in_tube(self, x, eps):
        """True where the distance to the plane is strictly below ``eps``."""
        if eps <= 0:
            raise GeometryError("tube radius must be positive")
        return self.distance(x) < eps

    # -- derivative data used by the jump-removal transform ------------

    def projection_jacobian(self, x):
        """Jacobian of the projection; the constant tangential projector."""
        pts, single = _as_batch(x, self.dim)
        n = self.normal_vector
        pj = np.eye(self.dim) - np.outer(n, n)
        out = np.broadcast_to(pj, (pts.shape[0], self.dim, self.dim)).copy()
        return _unbatch(out, single)

    def distance_hessian(self, x):
        pts, single = _as_batch(x, self.dim)
        out = np.zeros((pts.shape[0], self.dim, self.dim))
        return _unbatch(out, single)

    def projection_hessian_bilinear(self, x, v, w):
        """Second derivative of the projection applied to (v, w): zero."""
        pts, single = _as_batch(x, self.dim)
        out = np.zeros_like(pts)
        return _unbatch(out, single)

    def projection_hessian_contract(self, x, s):
        """Contraction of the projection Hessian with matrices ``s``: zero."""
        pts, single = _as_batch(x, self.dim)
        out = np.zeros_like(pts)
        return _unbatch(out, single)

    def __repr__(self):
        return f"Hyperplane(normal={self.normal_vector!r}, offset={self.offset!r})"


class Sphere:
    """Sphere of given center and radius.

    The signed distance is negative inside the ball and positive outside,
    so the unit normal points away from the center.  The projection is
    radial and is undefined exactly at the center.
    """

    kind = "sphere"

    def __init__(self, center, radius):
        c = np.asarray(center, dtype=np.float64)
        if c.ndim != 1:
            raise GeometryError("center must be a vector")
        if not np.all(np.isfinite(c)) or not np.isfinite(radius):
            raise GeometryError("sphere parameters must be finite")
        if radius <= 0:
            raise GeometryError("radius must be positive")
        self.dim = c.shape[0]
        self.center = c
        self.radius = float(radius)
        # curvature limits how wide a tube still has unique projections
        self.reach = float(radius)

    def _radial(self, pts):
        rel = pts - self.center
        rho = np.linalg.norm(rel, axis=1)
        if np.any(rho == 0.0):
            raise ProjectionError("projection undefined at the sphere center")
        return rel, rho

    def signed_distance(self, x):
        pts, single = _as_batch(x, self.dim)
        rho = np.linalg.norm(pts - self.center, axis=1)
        return _unbatch(rho - self.radius, single)

    def distance(self, x):
        return np.abs(self.signed_distance(x))

    def project(self, x):
        pts, single = _as_batch(x, self.dim)
        rel, rho = self._radial(pts)
        out = self.center + (self.radius / rho)[:, None] * rel
        return _unbatch(out, single)

    def unit_normal(self, xi):
        pts, single = _as_batch(xi, self.dim)
        rel = pts - self.center
        rho = np.linalg.norm(rel, axis=1)
        if np.any(np.abs(rho - self.radius) > SURFACE_TOL):
            raise OffSurfaceError("point does not lie on the sphere")
        out = rel / rho[:, None]
        return _unbatch(out, single)

    def in_tube(self, x, eps):
        if eps <= 0:
            raise GeometryError("tube radius must be positive")
        return self.distance(x) < eps

    def projection_jacobian(self, x):
        """d(project)/dx, equal to (r/rho) times the projector onto e-perp."""
        pts, single = _as_batch(x, self.dim)
        rel, rho = self._radial(pts)
        e = rel / rho[:, None]
        eye = np.eye(self.dim)
        out = (self.radius / rho)[:, None, None] * (eye[None, :, :] - e[:, :, None] * e[:, None, :])
        return _unbatch(out, single)

    def distance_hessian(self, x):
        """Hessian of the signed distance, (I - e e^T)/rho."""
        pts, single = _as_batch(x, self.dim)
        rel, rho = self._radial(pts)
        e = rel / rho[:, None]
        eye = np.eye(self.dim)
        out = (eye[None, :, :] - e[:, :, None] * e[:, None, :]) / rho[:, None, None]
        return _unbatch(out, single)

    def projection_hessian_bilinear(self, x, v, w):
        """Apply the second derivative of the projection to vectors v, w."""
        pts, single = _as_batch(x, self.dim)
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        w = np.atleast_2d(np.asarray(w, dtype=np.float64))
        rel, rho = self._radial(pts)
        e = rel / rho[:, None]
        ev = np.sum(e * v, axis=1)
        ew = np.sum(e * w, axis=1)
        vw = np.sum(v * w, axis=1)
        coef = -self.radius / rho**2
        out = coef[:, None] * (
            ew[:, None] * v + ev[:, None] * w + (vw - 3.0 * ev * ew)[:, None] * e
        )
        return _unbatch(out, single)

    def projection_hessian_contract(self, x, s):
        """Contract the projection Hessian with a matrix per point.

        ``s`` may be a single (d, d) matrix or a batch (n, d, d); the
        result is the vector with components sum_ij s_ij d2(project_m)/dx_i dx_j.
        """
        pts, single = _as_batch(x, self.dim)
        s = np.asarray(s, dtype=np.float64)
        if s.ndim == 2:
            s = np.broadcast_to(s, (pts.shape[0],) + s.shape)
        rel, rho = self._radial(pts)
        e = rel / rho[:, None]
        se = np.einsum("nij,nj->ni", s, e)
        ste = np.einsum("nij,ni->nj", s, e)
        tr = np.trace(s, axis1=1, axis2=2)
        ese = np.sum(e * se, axis=1)
        coef = -self.radius / rho**2
        out = coef[:, None] * (se + ste + (tr - 3.0 * ese)[:, None] * e)
        return _unbatch(out, single)

    def __repr__(self):
        return f"Sphere(center={self.center!r}, radius={self.radius!r})"
