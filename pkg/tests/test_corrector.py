import math

import numpy as np
import pytest
from scipy import integrate

from rwre.checks import catalogue, naive_corrector
from rwre.corrector import (
    asymptotic_ratio,
    build_continuous,
    build_discrete,
    build_discrete_L,
    check_poisson,
    continuous_residuals,
    richardson_change,
)
from rwre.environment import IID, Constant, ContinuousEnvironment, DiscreteEnvironment, FourierProfile, TwoPoint


def test_constant_closed_form():
    env = DiscreteEnvironment(Constant(1.0))
    t = build_discrete(env, 500)
    m = t.points.astype(float)
    assert np.array_equal(t.values, m * (m - 1))
    tl = build_discrete_L(env, 500)
    assert np.allclose(tl.values, m * (m - 1) / 2, rtol=0, atol=1e-9)


@pytest.mark.parametrize("name", list(catalogue()))
def test_matches_naive_double_sum(name):
    env = catalogue(2)[name]
    t = build_discrete(env, 2000)
    pts = np.random.default_rng(0).integers(-2000, 2001, size=20)
    pts = np.concatenate([pts, [-1, 0, 1, 2]])
    ref = naive_corrector(env, pts)
    assert np.allclose(t.at(pts), ref, rtol=1e-13, atol=0)
    assert ref[-3] == ref[-2] == 0.0 and ref[-4] > 0


@pytest.mark.parametrize("name", list(catalogue()))
def test_poisson_equation(name):
    env = catalogue(1)[name]
    assert check_poisson(build_discrete(env, 3000), env, -2999, 2999) < 1e-12
    assert check_poisson(build_discrete_L(env, 3000), env, -2999, 2999) < 1e-12


def test_normalisation():
    env = DiscreteEnvironment(IID(TwoPoint(1.0, 2.0, 0.5)), seed=4)
    t = build_discrete(env, 10)
    assert t.at(0) == 0.0 and t.at(1) == 0.0
    with pytest.raises(IndexError):
        t.at(11)


def test_two_point_ratio():
    env = DiscreteEnvironment(IID(TwoPoint(1.0, 2.0, 0.5)), seed=1)
    ar = asymptotic_ratio(build_discrete(env, 100_000))
    assert ar.expected == pytest.approx(1.125)
    assert ar.relative_error < 0.05


def test_jump_process_ratio():
    env = DiscreteEnvironment(IID(TwoPoint(1.0, 2.0, 0.5)), seed=1)
    ar = asymptotic_ratio(build_discrete_L(env, 100_000))
    assert ar.expected == pytest.approx(0.375)
    assert ar.relative_error < 0.05


def test_continuous_against_nested_quadrature():
    env = ContinuousEnvironment(FourierProfile.parse("2+sin"), phase=0.3)
    t = build_continuous(env, 3.0, 1e-3)
    for x in (0.7, 2.5, -1.9):
        sign = 1.0 if x > 0 else -1.0

        def outer(v):
            inner, _ = integrate.quad(lambda u: 2.0 * env.gam_at(sign * u), 0, v, epsabs=1e-13)
            return inner / env.lam_at(sign * v)

        ref, _ = integrate.quad(outer, 0, abs(x), epsabs=1e-12, limit=200)
        assert float(t.at(x)) == pytest.approx(ref, rel=1e-9)


def test_continuous_residual_and_richardson():
    env = ContinuousEnvironment(FourierProfile.parse("2+sin"), FourierProfile.parse("1+0.5cos"), phase=0.0)
    t = build_continuous(env, 12.0, 1e-3)
    _, res = continuous_residuals(t, 10.0)
    assert res.max() < 1e-3
    assert richardson_change(env, 20.0, 1e-2) < 1e-8
    ar = asymptotic_ratio(build_continuous(env, 400.0, 1e-2))
    assert ar.expected == pytest.approx(1 / math.sqrt(3))
    assert ar.relative_error < 0.01
