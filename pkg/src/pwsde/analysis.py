"""Path statistics around the discontinuity interface.

The estimators here back up the error analysis of the schemes: how much
time paths spend near the interface, how far a single step can travel,
and how often steps make large excursions.  A smooth capped version of
the signed distance is included as well; it is handy as a test function
because its first two derivatives vanish at the cap, which is exactly
what comparison arguments for occupation bounds need.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from .brownian import increment_batch
from .solver import euler_maruyama_paths
from .kernels import pure

#: paths per processing block (memory bound, result independent)
BLOCK = 256


class AnalysisError(ValueError):
    pass


# ---------------------------------------------------------------------
# smooth capped distance map

def soft_clip(z, radius):
    """Odd quintic saturation: identity slope at 0, flat beyond ``radius``.

    Inside [-radius, radius] this is the polynomial
    ``z - 2 z^3 / (3 r^2) + z^5 / (5 r^4)``; outside it freezes at the
    attained cap ``8 r / 15``.  The first two derivatives vanish at the
    junction, so the glued function is C^2.
    """
    if radius <= 0:
        raise AnalysisError("radius must be positive")
    z = np.asarray(z, dtype=np.float64)
    cap = 8.0 * radius / 15.0
    v2 = (z / radius) ** 2
    # factored so the map is odd to the last bit (v2 is exactly even in z)
    inner = z * (1.0 - 2.0 * v2 / 3.0 + v2 * v2 / 5.0)
    return np.clip(np.where(np.abs(z) <= radius, inner, np.sign(z) * cap), -cap, cap)


def soft_clip_d1(z, radius):
    """First derivative of :func:`soft_clip`, equal to (1 - (z/r)^2)^2 inside."""
    if radius <= 0:
        raise AnalysisError("radius must be positive")
    z = np.asarray(z, dtype=np.float64)
    v = z / radius
    return np.where(np.abs(v) <= 1.0, (1.0 - v * v) ** 2, 0.0)


def soft_clip_d2(z, radius):
    if radius <= 0:
        raise AnalysisError("radius must be positive")
    z = np.asarray(z, dtype=np.float64)
    v = z / radius
    return np.where(np.abs(v) <= 1.0, -4.0 * v * (1.0 - v * v) / radius, 0.0)


# ---------------------------------------------------------------------
# occupation time of the interface neighbourhood

@dataclass
class OccupationStats:
    """Monte Carlo occupation times of distance tubes, with a power fit."""

    eps_values: np.ndarray
    occupations: np.ndarray  # mean time in the tube per path
    stderrs: np.ndarray
    exponent: float  # slope of log occupation against log eps
    amplitude: float  # occupation at eps = 1 according to the fit
    n_paths: int
    dt: float
    horizon: float


def _path_blocks(coeffs, x0, horizon, steps, n_paths, seed, scheme="em", model=None):
    dt = horizon / steps
    for lo in range(0, n_paths, BLOCK):
        hi = min(lo + BLOCK, n_paths)
        inc = increment_batch(seed, np.arange(lo, hi), coeffs.dim, horizon, steps)
        if scheme == "em":
            yield euler_maruyama_paths(coeffs, x0, dt, inc)
        else:
            yield pure.gm_paths(model, x0, dt, inc)


def occupation_time(coeffs, surface, x0, horizon, eps_values, n_paths, steps, seed,
                    scheme="em", model=None):
    """Expected time a simulated path spends within distance eps of the surface.

    Time in the tube is measured on the simulation grid (dt per grid
    point inside).  Returns an :class:`OccupationStats` with one entry
    per requested eps and a least-squares exponent of the growth in eps.
    """
    eps_values = np.sort(np.asarray(eps_values, dtype=np.float64))
    if eps_values.ndim != 1 or eps_values.size < 2:
        raise AnalysisError("need at least two eps values")
    if np.any(eps_values <= 0):
        raise AnalysisError("eps values must be positive")
    if scheme not in ("em", "gm"):
        raise AnalysisError(f"unknown scheme {scheme!r}")
    if scheme == "gm" and model is None:
        raise AnalysisError("the transformed scheme needs the full model")
    dt = horizon / steps
    totals = np.zeros((len(eps_values), n_paths))
    row = 0
    for block in _path_blocks(coeffs, x0, horizon, steps, n_paths, seed, scheme, model):
        n, m, d = block.shape
        dist = np.abs(surface.signed_distance(block.reshape(n * m, d))).reshape(n, m)
        for i, eps in enumerate(eps_values):
            totals[i, row : row + n] = dt * np.sum(dist < eps, axis=1)
        row += n
    occ = totals.mean(axis=1)
    se = totals.std(axis=1, ddof=1) / np.sqrt(n_paths)
    if np.any(occ <= 0):
        raise AnalysisError("a tube was never visited; enlarge eps or the sample")
    slope, intercept = np.polyfit(np.log(eps_values), np.log(occ), 1)
    return OccupationStats(
        eps_values=eps_values,
        occupations=occ,
        stderrs=se,
        exponent=float(slope),
        amplitude=float(np.exp(intercept)),
        n_paths=n_paths,
        dt=dt,
        horizon=horizon,
    )


def brownian_tube_occupation(start_distance, eps, horizon, n_nodes=2049):
    """Closed-form occupation time of a distance tube for driftless unit noise.

    For a one-dimensional standard Brownian motion started at distance
    ``start_distance`` from a flat interface, the expected time in the
    eps-tube is the time integral of Phi((eps - x0)/sqrt(s)) -
    Phi((-eps - x0)/sqrt(s)); the integral is done by Simpson quadrature
    on a uniform grid with ``n_nodes`` points (odd count).
    """
    if n_nodes % 2 == 0:
        raise AnalysisError("Simpson quadrature needs an odd node count")
    s = np.linspace(0.0, horizon, n_nodes)
    vals = np.empty_like(s)
    vals[0] = 1.0 if abs(start_distance) < eps else 0.0
    sq = np.sqrt(s[1:])
    vals[1:] = norm.cdf((eps - start_distance) / sq) - norm.cdf((-eps - start_distance) / sq)
    h = s[1] - s[0]
    weights = np.ones(n_nodes)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(h / 3.0 * np.sum(weights * vals))


# ---------------------------------------------------------------------
# local time along a scalar series

def local_time_estimate(series, level, window):
    """Quadratic-variation estimate of local time at a level.

    ``series`` holds scalar paths of shape (n_paths, n_points).  The
    estimator is 1/(2 window) times the sum of squared increments taken
    from points within ``window`` of the level, averaged over paths.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 2 or series.shape[1] < 2:
        raise AnalysisError("series must be (n_paths, n_points) with n_points >= 2")
    if window <= 0:
        raise AnalysisError("window must be positive")
    inc = np.diff(series, axis=1)
    near = np.abs(series[:, :-1] - level) < window
    per_path = np.sum(np.where(near, inc * inc, 0.0), axis=1) / (2.0 * window)
    return float(per_path.mean())


# ---------------------------------------------------------------------
# single-step moment growth

def one_step_moment(model, dt, n_paths, seed, sub_nodes=8):
    """Time-averaged squared displacement since the last grid point.

    For the continuous-time interpolation of the direct scheme the
    squared displacement at lag u past a grid point has conditional mean
    |mu|^2 u^2 + |sigma|_F^2 u.  The lag integral over one step is done
    with Simpson quadrature on ``sub_nodes`` sub-intervals (exact here
    since the integrand is quadratic in u), then summed over the grid
    and averaged over paths and the horizon.
    """
    if sub_nodes < 2 or sub_nodes % 2:
        raise AnalysisError("sub_nodes must be a positive even count")
    steps = int(round(model.horizon / dt))
    if abs(steps * dt - model.horizon) > 1e-12 * model.horizon or steps < 1:
        raise AnalysisError("dt must divide the horizon")
    coeffs = model.coefficients
    u = np.linspace(0.0, dt, sub_nodes + 1)
    w = np.ones(sub_nodes + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (dt / sub_nodes) / 3.0
    qa = float(np.sum(w * u * u))  # integral of u^2 over the step
    qb = float(np.sum(w * u))  # integral of u over the step
    total = 0.0
    for block in _path_blocks(coeffs, model.x0, model.horizon, steps, n_paths, seed):
        states = block[:, :-1, :].reshape(-1, model.dim)
        mu = coeffs.drift(states)
        sig = coeffs.diffusion(states)
        a = np.sum(mu * mu, axis=1)
        b = np.einsum("nij,nij->n", sig, sig)
        total += float(np.sum(a * qa + b * qb))
    return total / (n_paths * model.horizon)


# ---------------------------------------------------------------------
# one-step excursion frequencies

@dataclass
class ExcursionStats:
    """Tail frequencies of single-step displacements."""

    eps_values: np.ndarray
    counts: np.ndarray
    frequencies: np.ndarray
    total_steps: int
    noise_scale: float  # sup diffusion norm times sqrt(dt)
    slope: float  # log-frequency per unit eps/noise_scale


def excursion_profile(model, dt, eps_values, n_paths, seed):
    """How often one step of the direct scheme travels at least eps.

    All eps values share the same simulated sample.  The slope reported
    is from a least-squares fit of log frequency against eps scaled by
    the typical noise size per step; Gaussian steps make it fall at
    least linearly.
    """
    eps_values = np.sort(np.asarray(eps_values, dtype=np.float64))
    if np.any(eps_values <= 0):
        raise AnalysisError("eps values must be positive")
    steps = int(round(model.horizon / dt))
    coeffs = model.coefficients
    counts = np.zeros(len(eps_values), dtype=np.int64)
    total = 0
    for block in _path_blocks(coeffs, model.x0, model.horizon, steps, n_paths, seed):
        jump = np.linalg.norm(np.diff(block, axis=1), axis=2).reshape(-1)
        total += jump.size
        for i, eps in enumerate(eps_values):
            counts[i] += int(np.sum(jump >= eps))
    freqs = counts / total
    if np.any(counts == 0):
        raise AnalysisError("an excursion level was never reached; shrink eps")
    scale = model.coefficients.sup_diffusion * np.sqrt(dt)
    slope = float(np.polyfit(eps_values / scale, np.log(freqs), 1)[0])
    return ExcursionStats(
        eps_values=eps_values,
        counts=counts,
        frequencies=freqs,
        total_steps=total,
        noise_scale=float(scale),
        slope=slope,
    )


# ---------------------------------------------------------------------
# model assumption audit

@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    value: float
    bound: float
    note: str = ""


@dataclass
class AssumptionReport:
    model_name: str
    checks: list = field(default_factory=list)

    @property
    def satisfied(self):
        return all(c.passed for c in self.checks)

    def add(self, name, passed, value, bound, note=""):
        self.checks.append(AssumptionCheck(name, bool(passed), float(value), float(bound), note))


def _lipschitz_quotient(fn, pts, step, rng):
    """Largest observed difference quotient over random direction pairs."""
    d = pts.shape[1]
    dirs = rng.standard_normal(pts.shape)
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    a = np.atleast_2d(fn(pts))
    b = np.atleast_2d(fn(pts + step * dirs))
    diff = (b - a).reshape(pts.shape[0], -1)
    return float(np.max(np.linalg.norm(diff, axis=1)) / step)


def check_assumptions(model, n_samples=2000, seed=20240611, lipschitz_cap=1e4):
    """Sample-based audit of the standing assumptions on a model.

    Checks drift and noise bounds against the declared sups, Lipschitz
    behaviour of the drift branches and the noise over the sample box,
    the fit of the tube radius below the surface reach, noise
    non-degeneracy across the interface, and boundedness of the jump
    ratio and its first derivatives on the surface.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    box = model.sample_box
    pts = rng.uniform(box[:, 0], box[:, 1], size=(n_samples, model.dim))
    surface = model.surface
    coeffs = model.coefficients
    report = AssumptionReport(model_name=model.name)

    sup_mu = float(np.max(np.linalg.norm(coeffs.drift(pts), axis=1)))
    report.add("drift_bounded", sup_mu <= coeffs.sup_drift, sup_mu, coeffs.sup_drift,
               "largest sampled drift norm against the declared bound")

    sig = coeffs.diffusion(pts)
    sup_sig = float(np.max(np.sqrt(np.einsum("nij,nij->n", sig, sig))))
    report.add("noise_bounded", sup_sig <= coeffs.sup_diffusion, sup_sig, coeffs.sup_diffusion,
               "largest sampled noise Frobenius norm against the declared bound")

    # Lipschitz quotients per drift branch (the glued drift may jump)
    h = 1e-4
    qn = _lipschitz_quotient(model.drift_pieces.branch_negative, pts, h, rng)
    qp = _lipschitz_quotient(model.drift_pieces.branch_positive, pts, h, rng)
    report.add("drift_branches_lipschitz", max(qn, qp) <= lipschitz_cap, max(qn, qp),
               lipschitz_cap, "largest sampled difference quotient of a drift branch")

    qs = _lipschitz_quotient(lambda x: coeffs.diffusion(x).reshape(x.shape[0], -1),
                             pts, h, rng)
    report.add("noise_lipschitz", qs <= lipschitz_cap, qs, lipschitz_cap,
               "largest sampled difference quotient of the noise")

    report.add("tube_fits_reach", model.tube_radius <= surface.reach,
               model.tube_radius, float(surface.reach),
               "straightened tube must stay inside the unique-projection zone")

    # non-degeneracy across the interface, on surface samples
    xi = surface.project(_surface_cloud(model, rng, n_samples))
    normal = surface.unit_normal(xi)
    stn = np.einsum("nik,ni->nk", coeffs.diffusion(xi), normal)
    min_normal_noise = float(np.min(np.linalg.norm(stn, axis=1)))
    threshold = model.transform.params.min_normal_noise
    report.add("noise_crosses_interface", min_normal_noise >= threshold,
               min_normal_noise, threshold,
               "smallest sampled noise component across the interface")

    ratio = model.jump_ratio.value_at(xi)
    sup_ratio = float(np.max(np.linalg.norm(ratio, axis=1)))
    rj = model.jump_ratio.jac_at(xi)
    sup_ratio_jac = float(np.max(np.sqrt(np.einsum("nij,nij->n", rj, rj))))
    report.add("jump_ratio_bounded", np.isfinite(sup_ratio) and sup_ratio <= lipschitz_cap,
               sup_ratio, lipschitz_cap, "largest sampled jump ratio norm on the surface")
    report.add("jump_ratio_smooth", np.isfinite(sup_ratio_jac) and sup_ratio_jac <= lipschitz_cap,
               sup_ratio_jac, lipschitz_cap, "largest sampled jump ratio derivative norm")
    return report


def _surface_cloud(model, rng, count):
    """Points near the surface suitable for projection, inside the model box."""
    surface = model.surface
    if surface.kind == "sphere":
        dirs = rng.standard_normal((count, model.dim))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        return surface.center + surface.radius * dirs
    n = surface.normal_vector
    anchor = model.width_anchor if model.width_anchor is not None else np.zeros(model.dim)
    base = surface.project(anchor)
    tang = rng.standard_normal((count, model.dim)) * model.width_spread
    tang -= (tang @ n)[:, None] * n
    return base + tang
