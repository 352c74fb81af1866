import numpy as np
import pytest

from rwre.ctmc import simulate_jump_process, variance_curve_ctmc, variance_limit_ctmc
from rwre.environment import IID, Constant, DiscreteEnvironment, TwoPoint, Uniform
from rwre.errors import RateOverflow


def test_constant_medium_is_poisson():
    env = DiscreteEnvironment(Constant(1.0))
    rep = variance_curve_ctmc(env, [2.0, 20.0], 20_000, seed=1)
    for v, se in zip(rep.values, rep.stderr):
        assert abs(v - 2.0) <= 4 * se
    # holding rate cbar = 2: on average 2 jumps per unit time
    assert rep.extra["events_per_t"][1] == pytest.approx(2.0, rel=0.01)
    assert rep.limit == 2.0


def test_limits():
    assert variance_limit_ctmc(DiscreteEnvironment(IID(TwoPoint(1.0, 2.0, 0.5)))).value == pytest.approx(8 / 3)
    lim = variance_limit_ctmc(DiscreteEnvironment(IID(Uniform(0.0, 1.0))))
    assert lim.value == 0.0 and lim.provenance == "divergent-flag"


def test_parity_and_thread_invariance():
    env = DiscreteEnvironment(IID(TwoPoint(1.0, 2.0, 0.5)), seed=2)
    a = simulate_jump_process(env, [1.0, 50.0], 5000, seed=3, threads=1)
    b = simulate_jump_process(env, [1.0, 50.0], 5000, seed=3, threads=3)
    assert np.array_equal(a.endpoints, b.endpoints)
    assert np.array_equal(a.events, b.events)
    assert np.all((a.endpoints - a.events) % 2 == 0)


def test_window_growth_is_a_replay():
    # a long horizon forces the window to grow; results must not depend on it
    env = DiscreteEnvironment(Constant(1.0))
    a = simulate_jump_process(env, [3000.0], 64, seed=5)
    b = simulate_jump_process(env, [10.0, 3000.0], 64, seed=5)
    assert np.array_equal(a.endpoints[0], b.endpoints[1])


def test_rate_cap():
    env = DiscreteEnvironment(Constant(1e7))
    with pytest.raises(RateOverflow):
        simulate_jump_process(env, [1.0], 10, seed=0)


def test_scaling_speeds_up_time():
    env = DiscreteEnvironment(IID(TwoPoint(1.0, 2.0, 0.5)), seed=1)
    a = simulate_jump_process(env, [10.0], 4000, seed=1)
    b = simulate_jump_process(env.scaled(2.0), [5.0], 4000, seed=1)
    # same jump chain; clock runs twice as fast, so the laws agree
    ma, sa = a.second_moments()
    mb, sb = b.second_moments()
    assert abs(ma[0] - mb[0]) <= 4 * np.hypot(sa[0], sb[0])
