import math

import numpy as np
import pytest

from rwre.analysis import (
    DEGENERATE_PASS,
    FAIL,
    INCONCLUSIVE,
    PASS,
    birkhoff_estimate,
    convergence_report,
    ctmc_limit,
    diffusion_limit,
    medium_integrals,
    variance_limit,
    walk_limit,
)
from rwre.environment import IID, Constant, ContinuousEnvironment, DiscreteEnvironment, FourierProfile, Rotation, TwoPoint, Uniform


def test_limit_formulas():
    assert variance_limit(1.0, 1.0) == 1.0
    assert variance_limit(1.5, 0.75) == pytest.approx(8 / 9)
    assert variance_limit(0.5, math.inf) == 0.0
    assert variance_limit(0.5, 2.0, inv_infinite=True) == 0.0
    assert ctmc_limit(0.75) == pytest.approx(8 / 3)
    assert ctmc_limit(math.inf) == 0.0
    assert diffusion_limit(1.0, 1 / math.sqrt(3)) == pytest.approx(math.sqrt(3))


def test_birkhoff_constant():
    env = DiscreteEnvironment(Constant(1.0))
    assert birkhoff_estimate(env, "c", 1000).averages == (1.0, 1.0, 1.0)
    assert birkhoff_estimate(env, "1/c", 1000).averages == (1.0, 1.0, 1.0)
    assert birkhoff_estimate(env, "cbar", 1000).averages == (2.0, 2.0, 2.0)


def test_birkhoff_lln():
    env = DiscreteEnvironment(IID(TwoPoint(1.0, 2.0, 0.5)), seed=1)
    est = birkhoff_estimate(env, "c", 10**6)
    assert est.checkpoints == (10**5, 5 * 10**5, 10**6)
    assert abs(est.final - 1.5) <= 3 * 0.5 / math.sqrt(10**6)
    assert est.stabilized and not est.divergent_suspect


def test_birkhoff_divergence_witness():
    env = DiscreteEnvironment(IID(Uniform(0.0, 1.0)), seed=1)
    est = birkhoff_estimate(env, "1/c", 10**6, checkpoints=[10**4, 10**6])
    assert est.averages[1] > est.averages[0]


def test_birkhoff_flow():
    env = ContinuousEnvironment(FourierProfile.parse("2+sin"), seed=1)
    assert birkhoff_estimate(env, "1/lambda", 10**5).final == pytest.approx(1 / math.sqrt(3), rel=1e-6)
    with pytest.raises(ValueError):
        birkhoff_estimate(env, "c", 10)


def test_estimate_only_fallback():
    env = DiscreteEnvironment(Rotation(math.sqrt(2) - 1, FourierProfile.parse("2+cos+0.5sin2")), seed=1)
    it = medium_integrals(env)
    assert it.provenance == "birkhoff-estimated"
    lim = walk_limit(env)
    assert lim.provenance == "birkhoff-estimated"
    assert lim.value == pytest.approx(1 / (lim.mean * lim.mean_inverse))


def test_convergence_report_examples():
    assert convergence_report([10, 100, 1000], [1.0, 1.0, 1.0], 1.0, 0.05).verdict == PASS
    v = convergence_report([100, 1000, 10000], [0.95, 0.87, 0.89], 8 / 9, 0.05)
    assert v.verdict == PASS
    v = convergence_report([100, 1000, 10000], [0.5, 0.3, 0.2], 0.0, 0.05)
    assert v.verdict == DEGENERATE_PASS


def test_convergence_report_failures():
    assert convergence_report([10, 100, 1000], [1.0, 1.1, 1.3], 1.0, 0.05).verdict == FAIL
    assert convergence_report([10, 100, 1000], [0.5, 0.6, 0.55], 0.0, 0.05).verdict == FAIL
    v = convergence_report([10, 100, 1000], [1.0, 1.0, 1.0], 1.0, 0.05, stderr=[0.1, 0.1, 0.1])
    assert v.verdict == INCONCLUSIVE
    v = convergence_report([10, 100, 1000], [0.5, 0.49, 0.48], 0.0, 0.05, stderr=[0.1, 0.1, 0.1])
    assert v.verdict == INCONCLUSIVE
    with pytest.raises(ValueError):
        convergence_report([10, 20, 30], [1, 1, 1], 1.0, 0.05)
    with pytest.raises(ValueError):
        convergence_report([10, 1000], [1, 1], 1.0, 0.05)
