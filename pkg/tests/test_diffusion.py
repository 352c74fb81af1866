import math

import numpy as np
import pytest

from rwre.analysis import FAIL, INCONCLUSIVE, PASS
from rwre.diffusion import (
    DiffusionCoefficients,
    check_constant_drift_of_Y,
    check_quadratic_bound,
    integrate,
    variance_curve_diffusion,
    variance_limit_diffusion,
)
from rwre.environment import ContinuousEnvironment, FourierProfile
from rwre.errors import UnstableStep

BM = ContinuousEnvironment(FourierProfile(1.5))
FLOW = ContinuousEnvironment(FourierProfile.parse("2+sin"), seed=1)


def test_coefficients():
    env = ContinuousEnvironment(FourierProfile.parse("2+sin"), FourierProfile.parse("1+0.5cos"), phase=0.2)
    co = DiffusionCoefficients(env)
    x = np.linspace(-1, 1, 21)
    assert np.allclose(co.sigma2(x), env.lam_at(x) / env.gam_at(x))
    assert np.allclose(co.drift(x), co.drift_fd(x), atol=1e-8)
    lo, hi = co.sigma2_bounds()
    assert lo == pytest.approx(1 / 1.5) and hi == pytest.approx(3 / 0.5)


def test_brownian_motion_variance():
    run = integrate(BM, 0.01, [1.0, 4.0], 20_000, seed=2, bias_streams=100)
    m, se = run.second_moments()
    for t, mi, si in zip(run.horizons, m, se):
        assert abs(mi - 1.5 * t) <= 4 * si


def test_levels_coincide_without_drift():
    # constant coefficients: every level sums the same Gaussian increments
    run = integrate(BM, 0.01, [0.5, 1.0], 300, seed=4, bias_streams=300, levels=2)
    for lev in range(2):
        assert np.allclose(run.fine[lev], run.endpoints, atol=1e-12)


def test_thread_invariance():
    a = integrate(FLOW, 0.01, [1.0], 5000, seed=3, threads=1, bias_streams=3000)
    b = integrate(FLOW, 0.01, [1.0], 5000, seed=3, threads=4, bias_streams=3000)
    assert np.array_equal(a.endpoints, b.endpoints)
    assert np.array_equal(a.fine, b.fine)


def test_bias_streams_do_not_change_level_zero():
    a = integrate(FLOW, 0.01, [1.0], 500, seed=3, bias_streams=2)
    b = integrate(FLOW, 0.01, [1.0], 500, seed=3, bias_streams=500)
    assert np.array_equal(a.endpoints, b.endpoints)


def test_half_step_bias_is_small():
    run = integrate(FLOW, 1e-3, [2.0], 4000, seed=1, bias_streams=4000)
    bias, se = run.em_bias()
    assert abs(bias[0]) < 0.05 * 2.0 * math.sqrt(3) + 4 * se[0]


def test_input_validation():
    with pytest.raises(ValueError):
        integrate(FLOW, 0.03, [1.0], 10, seed=0)
    with pytest.raises(ValueError):
        integrate(FLOW, 0.01, [1.0], 10, seed=0, levels=0)
    with pytest.raises(UnstableStep):
        integrate(FLOW, 0.01, [1.0], 10, seed=0, guard=0.05)


def test_limit():
    lim = variance_limit_diffusion(FLOW)
    assert lim.value == pytest.approx(math.sqrt(3))
    assert lim.provenance == "closed-form"
    env = ContinuousEnvironment(FourierProfile.parse("2+sin+0.3cos2"), seed=1)
    assert variance_limit_diffusion(env).provenance == "birkhoff-estimated"


def test_quadratic_bound_verdicts():
    run = integrate(BM, 0.01, [1.0, 5.0], 10_000, seed=1, bias_streams=1000)
    assert all(h.verdict == PASS for h in check_quadratic_bound(run, 1.5, "equal"))
    assert all(h.verdict == FAIL for h in check_quadratic_bound(run, 1.0, "upper"))
    assert all(h.verdict == FAIL for h in check_quadratic_bound(run, 2.0, "lower"))
    small = integrate(BM, 0.01, [1.0], 20, seed=1, bias_streams=20)
    assert check_quadratic_bound(small, 1.5, "upper")[0].verdict == INCONCLUSIVE
    env = ContinuousEnvironment(FourierProfile.parse("2+sin"), FourierProfile(2.0))
    with pytest.raises(ValueError):
        check_quadratic_bound(integrate(env, 0.01, [1.0], 10, seed=0), 1.0)


def test_corrector_martingale_for_the_flow():
    run = integrate(FLOW, 1e-3, [1.0, 4.0], 4000, seed=2, bias_streams=1000)
    assert all(h.verdict == PASS for h in check_constant_drift_of_Y(run))


def test_curve_report():
    run = integrate(FLOW, 0.01, [1.0, 2.0], 1000, seed=2, bias_streams=500)
    rep = variance_curve_diffusion(run)
    assert rep.times == [1.0, 2.0]
    assert len(rep.extra["em_bias"]) == 2
