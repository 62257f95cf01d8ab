"""Ready-made SDE models with a drift jump across a known interface.

Four systems are shipped:

* ``step_function_model``: planar toy problem, drift jumps between
  (-3, 1) and (3, 1) across the vertical axis, identity noise.
* ``unit_circle_model``: drift jumps across the unit circle and the
  noise matrix has rank one everywhere (only the first Brownian
  component acts), yet its component across the circle stays unit size.
* ``dividend_model``: five-dimensional filter dynamics from an optimal
  dividend problem; the control threshold makes the first drift
  component jump across an affine hyperplane and the noise again has
  rank one.
* ``prescribed_transform_model``: scalar equation built backwards from
  an explicit straightening map, so the transformed scheme reproduces
  the exact solution and makes round-trip errors visible.

Each model packs drift, diffusion, interface, jump ratio and transform
settings into a :class:`ModelSpec`.  Jump ratios carry hand-written
derivatives; the generic finite-difference fallback is for user models.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .coefficients import CoefficientSet, PiecewiseDrift
from .geometry import Hyperplane, Sphere
from .transform import (
    JumpRatio,
    JumpRemovalTransform,
    TransformParams,
    _ramp_d1,
    choose_width,
)


class ModelError(ValueError):
    pass


@dataclass(eq=False)
class ModelSpec:
    """Everything needed to simulate one model with either scheme."""

    name: str
    dim: int
    x0: np.ndarray
    horizon: float
    coefficients: CoefficientSet
    drift_pieces: PiecewiseDrift
    jump_ratio: JumpRatio
    tube_radius: float
    sample_box: np.ndarray  # (dim, 2) lo/hi box for assumption checks
    width: Optional[float] = None  # resolved on first use unless fixed here
    width_anchor: Optional[np.ndarray] = None
    width_spread: float = 1.0
    kernel_id: Optional[int] = None
    kernel_params: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def surface(self):
        return self.drift_pieces.surface

    def resolved_width(self):
        if self.width is None:
            self.width = choose_width(
                self.surface,
                self.jump_ratio,
                self.tube_radius,
                anchor=self.width_anchor,
                spread=self.width_spread,
            )
        return self.width

    @cached_property
    def transform(self):
        params = TransformParams(width=self.resolved_width(), tube_radius=self.tube_radius)
        return JumpRemovalTransform(self.surface, self.jump_ratio, params)

    @cached_property
    def transformed_coefficients(self):
        return self.transform.transformed_coefficients(self.coefficients)


# ---------------------------------------------------------------------
# step function drift

def step_function_model(jump_size=3.0, x0=(0.1, 0.0), horizon=1.0):
    """Planar drift +-``jump_size`` in the first component, identity noise."""
    surface = Hyperplane(normal=(1.0, 0.0), offset=0.0)

    def branch_neg(x):
        out = np.empty_like(x)
        out[:, 0] = -jump_size
        out[:, 1] = 1.0
        return out

    def branch_pos(x):
        out = np.empty_like(x)
        out[:, 0] = jump_size
        out[:, 1] = 1.0
        return out

    pieces = PiecewiseDrift(surface, branch_neg, branch_pos)

    def diffusion(x):
        return np.broadcast_to(np.eye(2), (x.shape[0], 2, 2)).copy()

    coeffs = CoefficientSet(
        dim=2,
        drift=pieces,
        diffusion=diffusion,
        sup_drift=float(np.hypot(jump_size, 1.0)),
        sup_diffusion=float(np.sqrt(2.0)),
    )

    # noise across the plane has unit size, so the ratio is constant
    ratio_vec = np.array([-jump_size, 0.0])
    ratio = JumpRatio(
        value=lambda xi: np.broadcast_to(ratio_vec, xi.shape).copy(),
        jac=lambda xi: np.zeros((xi.shape[0], 2, 2)),
        hess_contract=lambda xi, mats: np.zeros_like(np.atleast_2d(xi)),
    )

    return ModelSpec(
        name="step_function",
        dim=2,
        x0=np.asarray(x0, dtype=np.float64),
        horizon=horizon,
        coefficients=coeffs,
        drift_pieces=pieces,
        jump_ratio=ratio,
        tube_radius=0.5,
        sample_box=np.array([[-2.0, 2.0], [-2.0, 2.0]]),
        width_anchor=np.asarray(x0, dtype=np.float64),
        kernel_id=1,
        kernel_params=np.array([float(jump_size)]),
    )


# ---------------------------------------------------------------------
# discontinuity along the unit circle

def unit_circle_model(x0=(1.2, 0.0), horizon=1.0):
    """Drift jumps across the unit circle, rank-one noise everywhere.

    The noise matrix is 2/(1 + |x|^2) times the rank-one matrix with
    first column x, and its component across the circle has norm one at
    every circle point even though the matrix is singular.
    """
    surface = Sphere(center=(0.0, 0.0), radius=1.0)

    def branch_neg(x):  # inside the disc
        out = np.empty_like(x)
        out[:, 0] = -x[:, 0]
        out[:, 1] = x[:, 1]
        return out

    def branch_pos(x):  # on and outside the circle
        return np.ones_like(x)

    pieces = PiecewiseDrift(surface, branch_neg, branch_pos)

    def diffusion(x):
        out = np.zeros((x.shape[0], 2, 2))
        scale = 2.0 / (1.0 + x[:, 0] ** 2 + x[:, 1] ** 2)
        out[:, 0, 0] = scale * x[:, 0]
        out[:, 1, 0] = scale * x[:, 1]
        return out

    coeffs = CoefficientSet(
        dim=2,
        drift=pieces,
        diffusion=diffusion,
        sup_drift=float(np.sqrt(2.0)),
        sup_diffusion=1.0,
    )

    # on the circle the ratio reduces to an affine expression, which we
    # use as the smooth ambient extension for all derivatives
    def ratio_value(xi):
        out = np.empty_like(xi)
        out[:, 0] = -0.5 * (xi[:, 0] + 1.0)
        out[:, 1] = 0.5 * (xi[:, 1] - 1.0)
        return out

    ratio_jac_mat = np.array([[-0.5, 0.0], [0.0, 0.5]])
    ratio = JumpRatio(
        value=ratio_value,
        jac=lambda xi: np.broadcast_to(ratio_jac_mat, (xi.shape[0], 2, 2)).copy(),
        hess_contract=lambda xi, mats: np.zeros_like(np.atleast_2d(xi)),
    )

    return ModelSpec(
        name="unit_circle",
        dim=2,
        x0=np.asarray(x0, dtype=np.float64),
        horizon=horizon,
        coefficients=coeffs,
        drift_pieces=pieces,
        jump_ratio=ratio,
        tube_radius=0.5,
        sample_box=np.array([[-2.0, 2.0], [-2.0, 2.0]]),
        kernel_id=2,
    )


# ---------------------------------------------------------------------
# dividend maximization filter dynamics

def dividend_model(
    dim=5,
    payout_rate=1.0,
    signal_noise=0.3,
    drift_states=(0.1, 0.2, 0.3, 0.4, 0.5),
    switch_rate=0.25,
    threshold_const=0.2,
    threshold_slope=0.1,
    x0=(0.25, 0.2, 0.2, 0.2, 0.2),
    horizon=1.0,
):
    """Filtered dividend dynamics with a payout threshold.

    The state is the log-value of the company together with the filter
    probabilities of the first ``dim - 1`` regimes.  Dividends are paid
    at ``payout_rate`` while the value exceeds an affine threshold in
    the filter coordinates, which is where the drift jumps.  The hidden
    regime switches at uniform rate ``switch_rate``; ``drift_states``
    lists the value drift per regime and ``signal_noise`` the
    observation volatility.
    """
    d = int(dim)
    if d < 2:
        raise ModelError("need at least one filter coordinate")
    theta = np.asarray(drift_states, dtype=np.float64)
    if theta.shape != (d,):
        raise ModelError("drift_states must have one entry per regime")
    thetabar = theta[:-1] - theta[-1]  # regime drift offsets, length d-1
    beta = float(signal_noise)
    ubar = float(payout_rate)

    # uniform generator of the hidden chain
    gen = np.full((d, d), float(switch_rate))
    np.fill_diagonal(gen, -(d - 1) * float(switch_rate))
    drift_const = gen[d - 1, : d - 1].copy()  # filter drift, constant part
    drift_lin = gen[: d - 1, : d - 1] - gen[d - 1 : d, : d - 1]  # (j, m)

    normal = np.empty(d)
    normal[0] = 1.0
    normal[1:] = -float(threshold_slope)
    surface = Hyperplane(normal=normal, offset=float(threshold_const))
    nhat = surface.normal_vector

    def common_drift(x):
        out = np.empty_like(x)
        mix = x[:, 1:] @ thetabar
        out[:, 0] = theta[-1] + mix
        out[:, 1:] = drift_const[None, :] + x[:, 1:] @ drift_lin
        return out

    def branch_neg(x):
        return common_drift(x)

    def branch_pos(x):
        out = common_drift(x)
        out[:, 0] -= ubar
        return out

    pieces = PiecewiseDrift(surface, branch_neg, branch_pos)

    def diffusion(x):
        out = np.zeros((x.shape[0], d, d))
        mix = x[:, 1:] @ thetabar
        out[:, 0, 0] = beta
        out[:, 1:, 0] = x[:, 1:] * (thetabar[None, :] - mix[:, None]) / beta
        return out

    coeffs = CoefficientSet(
        dim=d,
        drift=pieces,
        diffusion=diffusion,
        sup_drift=4.0,
        sup_diffusion=5.5,
    )

    # the noise component across the plane is the scalar
    #   s(x) = beta nhat_1 + (1/beta) sum_i nhat_i x_i (thetabar_{i-1} - mix)
    # and the drift jump is payout_rate in the first coordinate only
    def normal_noise(x):
        mix = x[:, 1:] @ thetabar
        return beta * nhat[0] + (x[:, 1:] * (thetabar[None, :] - mix[:, None])) @ nhat[1:] / beta

    def normal_noise_grad(x):
        mix = x[:, 1:] @ thetabar
        tail = x[:, 1:] @ nhat[1:]
        out = np.zeros_like(x)
        out[:, 1:] = (nhat[1:][None, :] * (thetabar[None, :] - mix[:, None])
                      - thetabar[None, :] * tail[:, None]) / beta
        return out

    # Hessian of s: symmetrised outer product of nhat and thetabar tails
    noise_hess = np.zeros((d, d))
    noise_hess[1:, 1:] = -(np.outer(nhat[1:], thetabar) + np.outer(thetabar, nhat[1:])) / beta

    def ratio_value(xi):
        s = normal_noise(xi)
        out = np.zeros_like(xi)
        out[:, 0] = 0.5 * ubar / (s * s)
        return out

    def ratio_jac(xi):
        s = normal_noise(xi)
        grad = normal_noise_grad(xi)
        out = np.zeros((xi.shape[0], d, d))
        out[:, 0, :] = -ubar / (s**3)[:, None] * grad
        return out

    def ratio_hess_contract(xi, mats):
        s = normal_noise(xi)
        grad = normal_noise_grad(xi)
        mats = np.asarray(mats, dtype=np.float64)
        if mats.ndim == 2:
            mats = np.broadcast_to(mats, (xi.shape[0], d, d))
        gmg = np.einsum("ni,nij,nj->n", grad, mats, grad)
        hm = np.einsum("ij,nij->n", noise_hess, mats)
        out = np.zeros_like(xi)
        out[:, 0] = 3.0 * ubar / s**4 * gmg - ubar / s**3 * hm
        return out

    ratio = JumpRatio(value=ratio_value, jac=ratio_jac, hess_contract=ratio_hess_contract)

    box = np.zeros((d, 2))
    box[0] = (-0.5, 1.0)
    box[1:] = (0.0, 0.5)

    params = np.concatenate([
        [ubar, beta, theta[-1]],
        thetabar,
        drift_const,
        drift_lin.reshape(-1),  # row j, column m
        nhat,
        [surface.offset],
    ])

    return ModelSpec(
        name="dividend",
        dim=d,
        x0=np.asarray(x0, dtype=np.float64),
        horizon=horizon,
        coefficients=coeffs,
        drift_pieces=pieces,
        jump_ratio=ratio,
        tube_radius=0.2,
        sample_box=box,
        width_anchor=np.asarray(x0, dtype=np.float64),
        width_spread=0.15,
        kernel_id=3,
        kernel_params=params,
    )


# ---------------------------------------------------------------------
# scalar model built backwards from its straightening map

PRESCRIBED_WIDTH = 0.1


def prescribed_transform_model(x0=0.0, horizon=1.0):
    """Scalar drift/noise derived from an explicit straightening map.

    The map is fixed first (the standard profile with width 0.1 and unit
    ratio) and the coefficients are chosen so that the transformed
    equation is exactly ``dZ = dW``.  The transformed scheme therefore
    reproduces the exact solution at the grid points no matter the step
    size, which makes it a sharp test of the forward and inverse maps.
    """
    surface = Hyperplane(normal=(1.0,), offset=0.0)
    w = PRESCRIBED_WIDTH

    def map_d1(t):
        return 1.0 + _ramp_d1(t, w)

    def map_d2_signed(t, sign):
        v = t / w
        inside = np.abs(v) <= 1.0
        f = np.where(inside, 1.0 - v * v, 0.0)
        v2 = v * v
        return 2.0 * sign * f * (1.0 - 17.0 * v2 + 28.0 * v2 * v2)

    def branch_neg(x):
        t = x[:, 0]
        return (-map_d2_signed(t, -1.0) / (2.0 * map_d1(t) ** 3))[:, None]

    def branch_pos(x):
        t = x[:, 0]
        return (-map_d2_signed(t, 1.0) / (2.0 * map_d1(t) ** 3))[:, None]

    pieces = PiecewiseDrift(surface, branch_neg, branch_pos)

    def diffusion(x):
        return (1.0 / map_d1(x[:, 0]))[:, None, None]

    coeffs = CoefficientSet(
        dim=1,
        drift=pieces,
        diffusion=diffusion,
        sup_drift=1.6,
        sup_diffusion=1.05,
    )

    ratio = JumpRatio(
        value=lambda xi: np.ones_like(np.atleast_2d(xi)),
        jac=lambda xi: np.zeros((np.atleast_2d(xi).shape[0], 1, 1)),
        hess_contract=lambda xi, mats: np.zeros_like(np.atleast_2d(xi)),
    )

    return ModelSpec(
        name="prescribed_transform",
        dim=1,
        x0=np.atleast_1d(np.asarray(x0, dtype=np.float64)),
        horizon=horizon,
        coefficients=coeffs,
        drift_pieces=pieces,
        jump_ratio=ratio,
        tube_radius=w,
        sample_box=np.array([[-0.5, 0.5]]),
        width=w,
        kernel_id=4,
        kernel_params=np.array([w]),
    )


MODEL_BUILDERS = {
    "step_function": step_function_model,
    "unit_circle": unit_circle_model,
    "dividend": dividend_model,
    "prescribed_transform": prescribed_transform_model,
}


def get_model(name, **kwargs):
    try:
        builder = MODEL_BUILDERS[name]
    except KeyError:
        known = ", ".join(sorted(MODEL_BUILDERS))
        raise ModelError(f"unknown model {name!r}; known models: {known}") from None
    return builder(**kwargs)
