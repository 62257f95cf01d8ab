import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwsde.analysis import (
    AnalysisError,
    brownian_tube_occupation,
    check_assumptions,
    excursion_profile,
    local_time_estimate,
    occupation_time,
    one_step_moment,
    soft_clip,
    soft_clip_d1,
    soft_clip_d2,
)
from pwsde.coefficients import CoefficientSet, PiecewiseDrift
from pwsde.geometry import Hyperplane
from pwsde.models import ModelSpec, get_model
from pwsde.transform import JumpRatio


# ---------------------------------------------------------------------
# capped distance map

def test_soft_clip_cap_and_junction_values():
    r = 0.3
    cap = 8 * r / 15
    z = np.array([-2 * r, -r, 0.0, r, 5 * r])
    lam = soft_clip(z, r)
    assert np.array_equal(lam, [-cap, -cap, 0.0, cap, cap])
    # the junction is exact, not approximate
    assert soft_clip(r, r) == cap


def test_soft_clip_tube_indicator_equivalence():
    # being inside the tube is the same as being strictly below the cap
    r = 0.25
    cap = 8 * r / 15
    z = np.linspace(-3 * r, 3 * r, 401)
    lam = soft_clip(z, r)
    assert np.array_equal(np.abs(z) < r, np.abs(lam) < cap)


@given(z=st.floats(-3.0, 3.0), r=st.floats(0.1, 2.0))
def test_soft_clip_is_odd_and_capped(z, r):
    cap = 8 * r / 15
    assert abs(soft_clip(z, r)) <= cap + 1e-15
    assert soft_clip(-z, r) == -soft_clip(z, r)


def test_soft_clip_monotone():
    z = np.linspace(-2.0, 2.0, 1001)
    assert np.all(np.diff(soft_clip(z, 0.7)) >= 0)


@given(z=st.floats(-2.0, 2.0), r=st.floats(0.1, 1.5))
@settings(max_examples=200)
def test_soft_clip_derivatives_match_fd(z, r):
    h = 1e-6
    fd1 = (soft_clip(z + h, r) - soft_clip(z - h, r)) / (2 * h)
    assert soft_clip_d1(z, r) == pytest.approx(fd1, abs=1e-6)
    if abs(abs(z) - r) < 1e-3:
        return  # the third derivative jumps at the junction
    fd2 = (soft_clip_d1(z + h, r) - soft_clip_d1(z - h, r)) / (2 * h)
    assert soft_clip_d2(z, r) == pytest.approx(fd2, abs=1e-5)


def test_soft_clip_rejects_bad_radius():
    for fn in (soft_clip, soft_clip_d1, soft_clip_d2):
        with pytest.raises(AnalysisError):
            fn(0.1, 0.0)


# ---------------------------------------------------------------------
# tube occupation

def _driftless_line(dim=1):
    surface = Hyperplane(np.eye(dim)[0], 0.0)
    zero = lambda x: np.zeros_like(x)
    coeffs = CoefficientSet(
        dim=dim,
        drift=zero,
        diffusion=lambda x: np.tile(np.eye(dim), (x.shape[0], 1, 1)),
        sup_drift=0.0,
        sup_diffusion=float(np.sqrt(dim)),
    )
    return coeffs, surface


def test_occupation_monotone_and_bounded(models):
    m = models["step_function"]
    stats = occupation_time(m.coefficients, m.surface, m.x0, m.horizon,
                            [0.05, 0.1, 0.2], n_paths=256, steps=128, seed=5)
    assert np.all(np.diff(stats.occupations) >= 0)
    assert np.all(stats.occupations <= m.horizon + 1e-12)
    assert np.all(stats.stderrs > 0)
    assert np.isfinite(stats.exponent)


def test_occupation_matches_closed_form_for_pure_noise():
    # flat interface, no drift, unit noise: the expected tube time has
    # an explicit normal-cdf integral to compare against
    coeffs, surface = _driftless_line()
    x0 = np.array([0.3])
    stats = occupation_time(coeffs, surface, x0, 1.0, [0.1, 0.2],
                            n_paths=2048, steps=1024, seed=99)
    for i, eps in enumerate(stats.eps_values):
        want = brownian_tube_occupation(0.3, eps, 1.0)
        assert abs(stats.occupations[i] - want) < 3 * stats.stderrs[i] + 2e-3


def test_occupation_input_validation(models):
    m = models["step_function"]
    with pytest.raises(AnalysisError):
        occupation_time(m.coefficients, m.surface, m.x0, m.horizon,
                        [0.1], n_paths=8, steps=8, seed=0)
    with pytest.raises(AnalysisError):
        occupation_time(m.coefficients, m.surface, m.x0, m.horizon,
                        [0.1, -0.2], n_paths=8, steps=8, seed=0)
    with pytest.raises(AnalysisError):
        occupation_time(m.coefficients, m.surface, m.x0, m.horizon,
                        [0.1, 0.2], n_paths=8, steps=8, seed=0, scheme="xx")
    with pytest.raises(AnalysisError):
        occupation_time(m.coefficients, m.surface, m.x0, m.horizon,
                        [0.1, 0.2], n_paths=8, steps=8, seed=0, scheme="gm")


def test_occupation_raises_when_tube_unreachable(models):
    m = models["step_function"]
    far = np.array([50.0, 0.0])
    with pytest.raises(AnalysisError, match="never visited"):
        occupation_time(m.coefficients, m.surface, far, m.horizon,
                        [0.01, 0.02], n_paths=64, steps=64, seed=1)


def test_brownian_tube_occupation_limits():
    # a tube wider than any plausible excursion soaks up the whole horizon
    assert brownian_tube_occupation(0.0, 50.0, 1.0) == pytest.approx(1.0, abs=1e-6)
    # starting far away with a narrow tube leaves almost nothing
    assert brownian_tube_occupation(30.0, 0.05, 1.0) < 1e-8
    with pytest.raises(AnalysisError):
        brownian_tube_occupation(0.0, 0.1, 1.0, n_nodes=100)


# ---------------------------------------------------------------------
# local time

def test_local_time_matches_brownian_expectation():
    # E local time at 0 over [0, 1] is sqrt(2/pi)
    rng = np.random.Generator(np.random.Philox(31415))
    steps = 2048
    inc = rng.standard_normal((1024, steps)) * np.sqrt(1.0 / steps)
    series = np.concatenate([np.zeros((1024, 1)), np.cumsum(inc, axis=1)], axis=1)
    est = local_time_estimate(series, level=0.0, window=0.15)
    assert est == pytest.approx(np.sqrt(2.0 / np.pi), rel=0.12)


def test_local_time_input_validation():
    with pytest.raises(AnalysisError):
        local_time_estimate(np.zeros(8), 0.0, 0.1)
    with pytest.raises(AnalysisError):
        local_time_estimate(np.zeros((4, 8)), 0.0, -1.0)


# ---------------------------------------------------------------------
# one-step moment

def _const_model(mu_vec, sig_mat):
    mu_vec = np.asarray(mu_vec, dtype=np.float64)
    sig_mat = np.asarray(sig_mat, dtype=np.float64)
    dim = mu_vec.size
    drift = lambda x: np.tile(mu_vec, (x.shape[0], 1))
    diffusion = lambda x: np.tile(sig_mat, (x.shape[0], 1, 1))
    surface = Hyperplane(np.eye(dim)[0], -50.0)
    return ModelSpec(
        name="const",
        dim=dim,
        x0=np.zeros(dim),
        horizon=1.0,
        coefficients=CoefficientSet(
            dim=dim, drift=drift, diffusion=diffusion,
            sup_drift=float(np.linalg.norm(mu_vec)),
            sup_diffusion=float(np.linalg.norm(sig_mat)),
        ),
        drift_pieces=PiecewiseDrift(surface, drift, drift),
        jump_ratio=JumpRatio(value=lambda x: np.zeros_like(np.atleast_2d(x))),
        tube_radius=1.0,
        sample_box=np.tile([-2.0, 2.0], (dim, 1)),
        width=0.5,
    )


def test_one_step_moment_zero_for_frozen_dynamics():
    model = _const_model([0.0, 0.0], np.zeros((2, 2)))
    assert one_step_moment(model, dt=1.0 / 8, n_paths=4, seed=0) == 0.0


def test_one_step_moment_constant_coefficient_closed_form():
    mu = np.array([0.4, -0.3])
    sig = np.array([[1.2, 0.0], [0.5, 0.7]])
    model = _const_model(mu, sig)
    a = float(mu @ mu)
    b = float(np.sum(sig * sig))
    dt = 1.0 / 16
    got = one_step_moment(model, dt=dt, n_paths=4, seed=0)
    assert got == pytest.approx(a * dt**2 / 3 + b * dt / 2, rel=1e-12)


def test_one_step_moment_input_validation(models):
    m = models["step_function"]
    with pytest.raises(AnalysisError):
        one_step_moment(m, dt=0.3, n_paths=4, seed=0)
    with pytest.raises(AnalysisError):
        one_step_moment(m, dt=0.25, n_paths=4, seed=0, sub_nodes=3)


# ---------------------------------------------------------------------
# excursion frequencies

def test_excursion_counts_decay(models):
    m = models["step_function"]
    dt = 1.0 / 64
    stats = excursion_profile(m, dt, [0.1, 0.2, 0.3], n_paths=64, seed=8)
    assert np.all(np.diff(stats.counts) <= 0)
    assert stats.total_steps == 64 * 64
    assert np.allclose(stats.frequencies, stats.counts / stats.total_steps)
    assert stats.slope < 0


def test_excursion_unreachable_level(models):
    m = models["step_function"]
    with pytest.raises(AnalysisError, match="never reached"):
        excursion_profile(m, 1.0 / 64, [0.1, 50.0], n_paths=16, seed=8)


# ---------------------------------------------------------------------
# assumption audit

def test_all_shipped_models_pass_audit(models):
    for m in models.values():
        report = check_assumptions(m)
        assert report.satisfied, [c.name for c in report.checks if not c.passed]
        assert len(report.checks) == 8


def test_audit_catches_understated_drift_bound():
    m = get_model("step_function")
    m.coefficients = dataclasses.replace(m.coefficients, sup_drift=0.5)
    report = check_assumptions(m)
    assert not report.satisfied
    failed = [c.name for c in report.checks if not c.passed]
    assert failed == ["drift_bounded"]
