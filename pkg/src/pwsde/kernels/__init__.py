"""Stepping kernel backends.

The compiled Cython kernels cover the shipped models (they carry a
``kernel_id``); everything else runs on the numpy reference kernels.
The active default is picked at import time: compiled when the
extension built, unless the PWSDE_BACKEND environment variable says
``pure`` (or ``compiled`` to insist, raising if it is missing).
"""

import os

import numpy as np

from . import pure

try:
    from . import _ckern
except ImportError:
    _ckern = None

_env = os.environ.get("PWSDE_BACKEND", "").strip().lower()
if _env == "compiled" and _ckern is None:
    raise ImportError(
        "PWSDE_BACKEND=compiled but the extension is not built; "
        "reinstall with a C compiler available"
    )

#: largest dimension the compiled kernels allocate scratch space for
COMPILED_MAX_DIM = 8


def available_backends():
    return ("pure",) if _ckern is None else ("pure", "compiled")


def active_backend():
    """Name of the backend used when no explicit choice is given."""
    if _env == "pure" or _ckern is None:
        return "pure"
    return "compiled"


def _can_compile(model):
    return (
        _ckern is not None
        and model.kernel_id is not None
        and model.dim <= COMPILED_MAX_DIM
    )


def terminal_states(model, scheme, x0, dt, increments, backend=None):
    """Run one scheme over a batch of increment arrays, return (n, dim) states.

    ``backend`` may be ``"pure"`` or ``"compiled"``; by default the
    active backend is used where the model supports it.
    """
    if backend is None:
        backend = active_backend()
    if backend not in ("pure", "compiled"):
        raise ValueError(f"unknown backend {backend!r}")
    inc = np.ascontiguousarray(increments, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    use_compiled = backend == "compiled" and _can_compile(model)

    if scheme == "em":
        if use_compiled:
            out = np.empty((inc.shape[0], model.dim))
            _ckern.em_terminal(model.kernel_id, model.kernel_params, x0, dt, inc, out)
            return out
        return pure.em_terminal(model.coefficients, x0, dt, inc)

    if scheme == "gm":
        if use_compiled:
            p = model.transform.params
            out = np.empty((inc.shape[0], model.dim))
            _ckern.gm_terminal(
                model.kernel_id,
                model.kernel_params,
                x0,
                dt,
                inc,
                p.width,
                p.inversion_tol,
                p.inversion_max_iter,
                out,
            )
            return out
        return pure.gm_terminal(model, x0, dt, inc)

    raise ValueError(f"unknown scheme {scheme!r}; use 'em' or 'gm'")
