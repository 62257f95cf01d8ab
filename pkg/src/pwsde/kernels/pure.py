"""Reference stepping kernels in plain numpy.

These walk whole batches of paths one time step at a time.  All state
updates are elementwise, every reduction over the space dimension is an
explicit left-to-right loop, and no call mixes information between
paths, so results are independent of batch composition and thread
scheduling.  The compiled backend mirrors these loops operation for
operation; keep the two in sync when touching either.
"""

import numpy as np


def _matvec(mats, vecs):
    """Batched matrix-vector product with a fixed summation order."""
    d = vecs.shape[1]
    out = mats[:, :, 0] * vecs[:, 0:1]
    for j in range(1, d):
        out = out + mats[:, :, j] * vecs[:, j : j + 1]
    return out


def em_terminal(coeffs, x0, dt, increments):
    """Terminal states of the direct scheme, shape (n_paths, dim)."""
    n, steps, d = increments.shape
    x = np.tile(np.asarray(x0, dtype=np.float64), (n, 1))
    for k in range(steps):
        mu = coeffs.drift(x)
        sig = coeffs.diffusion(x)
        x = x + mu * dt + _matvec(sig, increments[:, k, :])
    return x


def em_paths(coeffs, x0, dt, increments):
    """Full trajectories of the direct scheme, shape (n_paths, steps+1, dim)."""
    n, steps, d = increments.shape
    out = np.empty((n, steps + 1, d))
    out[:, 0, :] = np.asarray(x0, dtype=np.float64)
    x = out[:, 0, :].copy()
    for k in range(steps):
        mu = coeffs.drift(x)
        sig = coeffs.diffusion(x)
        x = x + mu * dt + _matvec(sig, increments[:, k, :])
        out[:, k + 1, :] = x
    return out


def _gm_step(model, x, z, dw, dt):
    """One step of the transformed scheme given matched states x = inverse(z)."""
    transform = model.transform
    coeffs = model.coefficients
    jac = transform.jacobian(x)
    mu = coeffs.drift(x)
    sig = coeffs.diffusion(x)
    cov = np.einsum("nik,njk->nij", sig, sig)
    drift_t = _matvec(jac, mu) + transform.ito_correction(x, cov)
    noise = _matvec(jac, _matvec(sig, dw))
    return z + drift_t * dt + noise


def gm_terminal(model, x0, dt, increments):
    """Terminal states of the transformed scheme, mapped back."""
    n, steps, d = increments.shape
    x = np.tile(np.asarray(x0, dtype=np.float64), (n, 1))
    z = model.transform.apply(x)
    for k in range(steps):
        z = _gm_step(model, x, z, increments[:, k, :], dt)
        x = model.transform.invert(z)
    return x


def gm_paths(model, x0, dt, increments):
    """Full trajectories of the transformed scheme in original coordinates."""
    n, steps, d = increments.shape
    out = np.empty((n, steps + 1, d))
    x = np.tile(np.asarray(x0, dtype=np.float64), (n, 1))
    out[:, 0, :] = x
    z = model.transform.apply(x)
    for k in range(steps):
        z = _gm_step(model, x, z, increments[:, k, :], dt)
        x = model.transform.invert(z)
        out[:, k + 1, :] = x
    return out
