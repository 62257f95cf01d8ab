"""Acceptance gate: one test and one printed verdict line per criterion.

Settings here are pinned (seeds, path counts, level windows, tolerances);
do not loosen them to make a failing criterion pass.  Criterion A2 is
known to fail on the pinned level window, see the test for details.
"""

import numpy as np
import pytest

from pwsde.analysis import (
    brownian_tube_occupation,
    excursion_profile,
    occupation_time,
    one_step_moment,
    soft_clip,
    soft_clip_d1,
    soft_clip_d2,
)
from pwsde.brownian import increment_batch
from pwsde.coefficients import CoefficientSet
from pwsde.geometry import Hyperplane
from pwsde.harness import ExperimentConfig, run_benchmark, run_convergence
from pwsde.harness.cli import main
from pwsde.kernels import pure
from pwsde.models import MODEL_BUILDERS, get_model

SEED = 12345
PATHS = 4096
LEVELS = (1, 7)

MODEL_NAMES = sorted(MODEL_BUILDERS)


def _verdict(capsys, ok, label, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    return f"{label}: {detail}"


def _convergence(model, scheme, paths=PATHS, levels=LEVELS, seed=SEED):
    cfg = ExperimentConfig(model=model, scheme=scheme, paths=paths,
                           seed=seed, levels=levels, threads=1)
    return run_convergence(cfg)


def test_a01_direct_scheme_order_step_drift(capsys):
    rep = _convergence("step_function", "em")
    ok = 0.25 <= rep.slope <= 1.1 and rep.seconds < 180.0
    msg = _verdict(capsys, ok, "A1 direct scheme order, step drift",
                   f"slope {rep.slope:.3f} (need 0.25..1.10), "
                   f"{rep.seconds:.1f}s (need < 180s)")
    assert ok, msg


def test_a02_transformed_scheme_order_step_drift(capsys):
    # Known red: on the pinned window (16..512 steps) the transformed
    # scheme is still pre-asymptotic for this drift; its local order
    # only climbs toward 1/2 several levels deeper.  Recorded as a
    # failure rather than papered over with a looser bound.
    rep = _convergence("step_function", "gm")
    ok = rep.slope >= 0.4
    msg = _verdict(capsys, ok, "A2 transformed scheme order, step drift",
                   f"slope {rep.slope:.3f} (need >= 0.40)")
    assert ok, msg


def test_a03_direct_scheme_order_other_models(capsys):
    circle = _convergence("unit_circle", "em")
    dividend = _convergence("dividend", "em")
    ok = circle.slope >= 0.25 and dividend.slope >= 0.25
    msg = _verdict(capsys, ok, "A3 direct scheme order, circle and dividend",
                   f"slopes {circle.slope:.3f} / {dividend.slope:.3f} "
                   f"(need >= 0.25 each)")
    assert ok, msg


def test_a04_interface_occupation(capsys):
    eps = (0.02, 0.04, 0.08, 0.16)
    m = get_model("step_function")
    stats = occupation_time(m.coefficients, m.surface, m.x0, m.horizon, eps,
                            n_paths=PATHS, steps=1024, seed=SEED)
    ok = 0.7 <= stats.exponent <= 1.3

    # driftless unit-noise control run against the closed-form tube time
    zero = lambda x: np.zeros_like(x)
    flat = CoefficientSet(dim=1, drift=zero,
                          diffusion=lambda x: np.ones((x.shape[0], 1, 1)),
                          sup_drift=0.0, sup_diffusion=1.0)
    ctrl = occupation_time(flat, Hyperplane((1.0,), 0.0), np.array([0.1]), 1.0,
                           eps, n_paths=PATHS, steps=1024, seed=SEED)
    zmax = 0.0
    for i, e in enumerate(ctrl.eps_values):
        want = brownian_tube_occupation(0.1, e, 1.0)
        zmax = max(zmax, abs(ctrl.occupations[i] - want) / ctrl.stderrs[i])
    ok = ok and zmax < 3.0
    msg = _verdict(capsys, ok, "A4 time near the interface",
                   f"growth exponent {stats.exponent:.3f} (need 0.70..1.30), "
                   f"control max |z| {zmax:.2f} (need < 3)")
    assert ok, msg


def test_a05_one_step_moment_scaling(capsys):
    ratios = {}
    for name in MODEL_NAMES:
        m = get_model(name)
        coarse = one_step_moment(m, m.horizon / 256, PATHS, SEED)
        fine = one_step_moment(m, m.horizon / 512, PATHS, SEED)
        ratios[name] = fine / coarse
    ok = all(0.35 <= r <= 0.70 for r in ratios.values())
    shown = ", ".join(f"{n} {r:.3f}" for n, r in ratios.items())
    msg = _verdict(capsys, ok, "A5 one-step moment halving",
                   f"ratios {shown} (need 0.35..0.70)")
    assert ok, msg


def test_a06_excursion_tail(capsys):
    m = get_model("step_function")
    dt = m.horizon / 256
    scale = m.coefficients.sup_diffusion * np.sqrt(dt)
    eps = scale * np.linspace(0.5, 2.5, 6)
    stats = excursion_profile(m, dt, eps, n_paths=512, seed=SEED)
    ok = stats.slope <= -0.5 and int(stats.counts.min()) >= 50
    msg = _verdict(capsys, ok, "A6 one-step excursion tail",
                   f"slope {stats.slope:.3f} (need <= -0.50), "
                   f"min count {int(stats.counts.min())} (need >= 50)")
    assert ok, msg


def _tube_points(model, rng, count):
    # surface patch the model declares as its working region (anchored
    # and scaled for hyperplanes, the whole sphere otherwise), thickened
    # across the interface up to the straightening width
    surface = model.surface
    if surface.kind == "sphere":
        dirs = rng.standard_normal((count, model.dim))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        xi = surface.center + surface.radius * dirs
    else:
        n = surface.normal_vector
        anchor = (model.width_anchor if model.width_anchor is not None
                  else np.zeros(model.dim))
        tang = rng.standard_normal((count, model.dim)) * model.width_spread
        tang -= (tang @ n)[:, None] * n
        xi = surface.project(anchor) + tang
    t = rng.uniform(-0.999, 0.999, size=count) * model.resolved_width()
    return xi + t[:, None] * surface.unit_normal(xi), xi


def _drift_after_map(model, x):
    pts = np.atleast_2d(x)
    tr = model.transform
    co = model.coefficients
    jac = tr.jacobian(pts)
    mu = np.atleast_2d(co.drift_at(pts))
    cov = co.covariance_at(pts)
    return np.einsum("nkj,nj->nk", jac, mu) + tr.ito_correction(pts, cov)


def test_a07_transform_consistency(capsys):
    rng = np.random.Generator(np.random.Philox(SEED))
    h = 1e-5
    worst_round = 0.0
    worst_jac = 0.0
    ok = True
    details = []
    for name in MODEL_NAMES:
        m = get_model(name)
        tr = m.transform
        pts, _ = _tube_points(m, rng, 10_000)
        back = tr.invert(tr.apply(pts))
        worst_round = max(worst_round, float(np.max(np.abs(back - pts))))

        sub = pts[:200]
        jac = tr.jacobian(sub)
        fd = np.empty_like(jac)
        hj = 1e-6
        for j in range(m.dim):
            e = np.zeros(m.dim)
            e[j] = hj
            fd[:, :, j] = (tr.apply(sub + e) - tr.apply(sub - e)) / (2 * hj)
        worst_jac = max(worst_jac, float(np.max(np.abs(jac - fd))))

        _, xi = _tube_points(m, rng, 100)
        n = m.surface.unit_normal(xi)
        mu_p = np.atleast_2d(m.coefficients.drift_at(xi + h * n))
        mu_m = np.atleast_2d(m.coefficients.drift_at(xi - h * n))
        raw_q = float(np.max(np.linalg.norm(mu_p - mu_m, axis=1))) / (2 * h)

        f = lambda x: _drift_after_map(m, x)
        cross = np.linalg.norm(f(xi + h * n) - f(xi - h * n), axis=1) / (2 * h)
        same = np.maximum(
            np.linalg.norm(f(xi + 2 * h * n) - f(xi + h * n), axis=1) / h,
            np.linalg.norm(f(xi - h * n) - f(xi - 2 * h * n), axis=1) / h,
        )
        cross_q = float(np.max(cross))
        same_q = float(np.max(same))
        model_ok = raw_q > 1e3 and cross_q <= 10 * max(same_q, 1e-12)
        ok = ok and model_ok
        details.append(f"{name} raw {raw_q:.1e} cross {cross_q:.1e} same {same_q:.1e}")
    ok = ok and worst_round < 1e-10 and worst_jac < 1e-6
    msg = _verdict(capsys, ok, "A7 straightening map consistency",
                   f"round trip {worst_round:.1e} (need < 1e-10), "
                   f"jacobian vs fd {worst_jac:.1e} (need < 1e-6); "
                   + "; ".join(details))
    assert ok, msg


def test_a08_prescribed_model_reproduces_exact_solution(capsys):
    m = get_model("prescribed_transform")
    tr = m.transform
    n_paths, steps = 128, 128
    inc = increment_batch(SEED, np.arange(n_paths), 1, m.horizon, steps)
    dt = m.horizon / steps
    got = pure.gm_paths(m, m.x0, dt, inc)
    z = tr.apply(m.x0[None, :])[0] + np.concatenate(
        [np.zeros((n_paths, 1, 1)), np.cumsum(inc, axis=1)], axis=1)
    want = tr.invert(z.reshape(-1, 1)).reshape(n_paths, steps + 1, 1)
    gap = float(np.max(np.abs(got - want)))
    tol = 10 * tr.params.inversion_tol
    ok = gap < tol
    msg = _verdict(capsys, ok, "A8 prescribed model exactness",
                   f"max grid gap {gap:.2e} (need < {tol:.0e})")
    assert ok, msg


def test_a09_scheme_cost_comparison(capsys):
    cfg = ExperimentConfig(model="unit_circle", seed=SEED, backend="pure",
                           bench_level=7, bench_paths=1024)
    rep = run_benchmark(cfg)
    em, gm = rep.rows
    ratio = gm.seconds / em.seconds
    err_ratio = gm.raw_error / em.raw_error
    ok = ratio >= 5.0 and 0.1 <= err_ratio <= 10.0
    msg = _verdict(capsys, ok, "A9 transformed scheme cost",
                   f"time ratio {ratio:.1f} (need >= 5), "
                   f"error ratio {err_ratio:.2f} (need 0.1..10)")
    assert ok, msg


def test_a10_circle_noise_crosses_interface(capsys):
    m = get_model("unit_circle")
    theta = np.linspace(0.0, 2 * np.pi, 1000, endpoint=False)
    xi = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    n = m.surface.unit_normal(xi)
    sig = m.coefficients.diffusion_at(xi)
    norms = np.linalg.norm(np.einsum("nik,ni->nk", sig, n), axis=1)
    gap = float(np.max(np.abs(norms.min() - 1.0)))
    ok = gap <= 1e-12
    msg = _verdict(capsys, ok, "A10 noise across the circle",
                   f"|min norm - 1| = {gap:.2e} (need <= 1e-12)")
    assert ok, msg


def test_a11_capped_distance_map_identities(capsys):
    tol = 1e-12
    bad = []
    for r in (0.04, 0.25, 1.0):
        if abs(soft_clip(r, r) - 8 * r / 15) > tol:
            bad.append(f"cap({r})")
        if soft_clip_d1(0.0, r) != 1.0:
            bad.append(f"slope at 0 ({r})")
        if soft_clip_d1(r, r) != 0.0 or soft_clip_d1(-r, r) != 0.0:
            bad.append(f"flat join ({r})")
        if soft_clip_d2(r, r) != 0.0 or soft_clip_d2(-r, r) != 0.0:
            bad.append(f"curvature join ({r})")
        if soft_clip_d1(r / 2, r) != (3.0 / 4.0) ** 2:
            bad.append(f"half-width slope ({r})")
        z = np.linspace(-3 * r, 3 * r, 501)
        if not np.array_equal(soft_clip(-z, r), -soft_clip(z, r)):
            bad.append(f"oddness ({r})")
        if np.any(np.diff(soft_clip(z, r)) < 0):
            bad.append(f"monotonicity ({r})")
    ok = not bad
    msg = _verdict(capsys, ok, "A11 capped distance map",
                   "all identities hold" if ok else "failed: " + ", ".join(bad))
    assert ok, msg


def test_a12_results_independent_of_threads(capsys, tmp_path):
    args = ["convergence", "--model", "step_function", "--scheme", "em",
            "--paths", "2048", "--seed", str(SEED), "--levels", "1:5"]
    a = tmp_path / "t1.csv"
    b = tmp_path / "t4.csv"
    assert main(args + ["--threads", "1", "--out", str(a)]) == 0
    assert main(args + ["--threads", "4", "--out", str(b)]) == 0
    ok = a.read_bytes() == b.read_bytes()
    msg = _verdict(capsys, ok, "A12 thread-count independence",
                   "result files byte-identical (timings kept separate)"
                   if ok else "result files differ between thread counts")
    assert ok, msg
