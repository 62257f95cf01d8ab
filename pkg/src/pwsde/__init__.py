"""Monte Carlo toolkit for SDEs whose drift jumps across a smooth hypersurface.

The package simulates d-dimensional Ito equations

    dX_t = mu(X_t) dt + sigma(X_t) dW_t,    X_0 = x0,

where ``mu`` is piecewise Lipschitz with a jump across a hypersurface and
``sigma`` may be degenerate away from that surface.  Two schemes are
provided: the direct Euler-Maruyama discretisation and a transformed
scheme that first straightens the drift jump with an explicit change of
variables, runs Euler-Maruyama on the transformed equation and maps the
result back.  Supporting tools measure strong convergence orders,
occupation times of the discontinuity neighbourhood and per-step moments.
"""

from .geometry import Hyperplane, Sphere
from .coefficients import CoefficientSet, PiecewiseDrift
from .transform import JumpRatio, JumpRemovalTransform, TransformParams, choose_width
from .brownian import BrownianGrid, brownian_increments, coarsen
from .solver import PathResult, euler_maruyama, transform_scheme, simulate_batch
from .models import (
    ModelSpec,
    step_function_model,
    unit_circle_model,
    dividend_model,
    prescribed_transform_model,
)

__version__ = "0.1.0"

__all__ = [
    "Hyperplane",
    "Sphere",
    "CoefficientSet",
    "PiecewiseDrift",
    "JumpRatio",
    "JumpRemovalTransform",
    "TransformParams",
    "choose_width",
    "BrownianGrid",
    "brownian_increments",
    "coarsen",
    "PathResult",
    "euler_maruyama",
    "transform_scheme",
    "simulate_batch",
    "ModelSpec",
    "step_function_model",
    "unit_circle_model",
    "dividend_model",
    "prescribed_transform_model",
]
