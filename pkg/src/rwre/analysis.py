"""Ergodic averages, limit formulas and convergence verdicts."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .environment import ContinuousEnvironment, DiscreteEnvironment, MediumIntegrals
from .errors import EstimateOnly

PASS = "PASS"
DEGENERATE_PASS = "DEGENERATE-PASS"
FAIL = "FAIL"
INCONCLUSIVE = "INCONCLUSIVE"

DISCRETE_OBSERVABLES = ("c", "1/c", "cbar")
CONTINUOUS_OBSERVABLES = ("gamma", "1/lambda")

# Continuous Birkhoff averages sample the flow on a regular grid of this step.
FLOW_SAMPLE_STEP = 1e-2


@dataclass(frozen=True)
class LimitValue:
    value: float
    provenance: str  # closed-form | birkhoff-estimated | divergent-flag
    mean: float
    mean_inverse: float


@dataclass
class MomentReport:
    """Second moment over time along a curve, with the predicted limit."""

    times: list
    second_moment: list
    values: list
    stderr: list
    methods: list
    limit: float
    limit_provenance: str
    environment: dict
    extra: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [
            {
                "time": t,
                "second_moment": m2,
                "value": v,
                "stderr": se,
                "method": meth,
            }
            for t, m2, v, se, meth in zip(
                self.times, self.second_moment, self.values, self.stderr, self.methods
            )
        ]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BirkhoffEstimate:
    observable: str
    checkpoints: tuple
    averages: tuple
    stabilized: bool
    divergent_suspect: bool

    @property
    def final(self) -> float:
        return self.averages[-1]


@dataclass(frozen=True)
class Verdict:
    verdict: str
    reason: str
    final_value: float
    limit: float


# ---------------------------------------------------------------------------
# Limit formulas
# ---------------------------------------------------------------------------

def variance_limit(mean_c: float, mean_inv_c: float,
                   c_infinite: bool = False, inv_infinite: bool = False) -> float:
    """``[(int c)(int 1/c)]^-1``, zero as soon as either integral diverges."""
    if c_infinite or inv_infinite or math.isinf(mean_c) or math.isinf(mean_inv_c):
        return 0.0
    return 1.0 / (mean_c * mean_inv_c)


def ctmc_limit(mean_inv_c: float, inv_infinite: bool = False) -> float:
    """``2 [int 1/c]^-1`` for the constant-speed jump process."""
    if inv_infinite or math.isinf(mean_inv_c):
        return 0.0
    return 2.0 / mean_inv_c


def diffusion_limit(mean_gamma: float, mean_inv_lambda: float,
                    gamma_infinite: bool = False, inv_infinite: bool = False) -> float:
    return variance_limit(mean_gamma, mean_inv_lambda, gamma_infinite, inv_infinite)


def medium_integrals(env, birkhoff_n: int = 10**6) -> MediumIntegrals:
    """Closed-form integrals when available, otherwise Birkhoff averages."""
    try:
        return env.integrals()
    except EstimateOnly:
        pass
    if isinstance(env, DiscreteEnvironment):
        m = birkhoff_estimate(env, "c", birkhoff_n)
        mi = birkhoff_estimate(env, "1/c", birkhoff_n)
    else:
        m = birkhoff_estimate(env, "gamma", birkhoff_n)
        mi = birkhoff_estimate(env, "1/lambda", birkhoff_n)
    return MediumIntegrals(
        mean=m.final,
        mean_inverse=mi.final,
        mean_infinite=m.divergent_suspect,
        inverse_infinite=mi.divergent_suspect,
        provenance="birkhoff-estimated",
    )


def _limit(integrals: MediumIntegrals, value: float) -> LimitValue:
    diverges = integrals.mean_infinite or integrals.inverse_infinite
    return LimitValue(
        value=value,
        provenance="divergent-flag" if diverges else integrals.provenance,
        mean=integrals.mean,
        mean_inverse=integrals.mean_inverse,
    )


def walk_limit(env: DiscreteEnvironment) -> LimitValue:
    it = medium_integrals(env)
    return _limit(it, variance_limit(it.mean, it.mean_inverse,
                                     it.mean_infinite, it.inverse_infinite))


def jump_process_limit(env: DiscreteEnvironment) -> LimitValue:
    it = medium_integrals(env)
    # only 1/c enters the jump-process limit
    it = MediumIntegrals(it.mean, it.mean_inverse, False, it.inverse_infinite, it.provenance)
    return _limit(it, ctmc_limit(it.mean_inverse, it.inverse_infinite))


def flow_limit(env: ContinuousEnvironment) -> LimitValue:
    it = medium_integrals(env)
    return _limit(it, diffusion_limit(it.mean, it.mean_inverse,
                                      it.mean_infinite, it.inverse_infinite))


# ---------------------------------------------------------------------------
# Ergodic averages
# ---------------------------------------------------------------------------

def _observable_values(env, observable: str, n: int) -> np.ndarray:
    if isinstance(env, DiscreteEnvironment):
        ks = np.arange(n, dtype=np.int64)
        if observable == "c":
            return env.conductances(ks)
        if observable == "1/c":
            return 1.0 / env.conductances(ks)
        if observable == "cbar":
            return env.cbars(ks)
        raise ValueError(f"observable {observable!r} needs one of {DISCRETE_OBSERVABLES}")
    xs = (np.arange(n, dtype=np.float64) + 0.5) * FLOW_SAMPLE_STEP
    if observable == "gamma":
        return env.gam_at(xs)
    if observable == "1/lambda":
        return 1.0 / env.lam_at(xs)
    raise ValueError(f"observable {observable!r} needs one of {CONTINUOUS_OBSERVABLES}")


def birkhoff_estimate(env, observable: str, n: int,
                      checkpoints: Sequence[int] | None = None) -> BirkhoffEstimate:
    """Partial ergodic averages of an observable along one realization.

    Discrete media average over sites ``0..N-1``; continuous media average the
    flow over ``[0, N * FLOW_SAMPLE_STEP]`` by the midpoint rule.  Checkpoints
    default to ``N/10, N/2, N``.
    """
    if n < 1:
        raise ValueError("N must be >= 1")
    if checkpoints is None:
        checkpoints = sorted({max(1, n // 10), max(1, n // 2), n})
    checkpoints = tuple(int(c) for c in checkpoints)
    if any(c < 1 or c > n for c in checkpoints) or list(checkpoints) != sorted(checkpoints):
        raise ValueError("checkpoints must be ascending within [1, N]")
    vals = _observable_values(env, observable, n)
    avgs = tuple(math.fsum(vals[:c]) / c for c in checkpoints)
    last = avgs[-1]
    prev = avgs[-2] if len(avgs) > 1 else last
    stabilized = abs(last - prev) <= 1e-2 * abs(last)
    growing = all(b > a for a, b in zip(avgs, avgs[1:]))
    divergent = len(avgs) > 1 and growing and last > 1.05 * avgs[0]
    return BirkhoffEstimate(observable, checkpoints, avgs, stabilized, divergent)


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

def convergence_report(times: Sequence[float], values: Sequence[float],
                       limit: float, tolerance: float,
                       stderr: Sequence[float] | None = None) -> Verdict:
    """Judge whether a curve of ``E(X^2)/t`` supports the predicted limit.

    Nonzero limit: PASS when the last value is within ``tolerance`` (relative)
    of the limit and the gap never grows beyond both its previous size and the
    tolerance band.  Zero limit: DEGENERATE-PASS when the curve strictly
    decreases.  INCONCLUSIVE when the standard errors cannot resolve the
    comparison.
    """
    times = [float(t) for t in times]
    values = [float(v) for v in values]
    se = [0.0] * len(values) if stderr is None else [float(s) for s in stderr]
    if len(values) < 3 or len(times) != len(values) or len(se) != len(values):
        raise ValueError("need at least 3 curve points with matching lengths")
    if min(times) <= 0 or max(times) / min(times) < 100:
        raise ValueError("curve must span at least two decades")

    final = values[-1]
    if limit == 0.0:
        for (v0, s0), (v1, s1) in zip(zip(values, se), zip(values[1:], se[1:])):
            noise = 2.0 * math.hypot(s0, s1)
            if v1 >= v0 and v1 - v0 > noise:
                return Verdict(FAIL, "curve increases while the limit is zero", final, limit)
            if v0 - v1 <= noise:
                return Verdict(INCONCLUSIVE, "decrease not resolved by the standard error",
                               final, limit)
        return Verdict(DEGENERATE_PASS, "strictly decreasing towards a null limit", final, limit)

    band = tolerance * abs(limit)
    if 2.0 * se[-1] > band:
        return Verdict(INCONCLUSIVE, "standard error exceeds the tolerance band", final, limit)
    gaps = [abs(v - limit) for v in values]
    for g0, g1, s1 in zip(gaps, gaps[1:], se[1:]):
        if g1 > max(g0, band) + 2.0 * s1:
            return Verdict(FAIL, "gap to the limit grows across decades", final, limit)
    if gaps[-1] > band:
        return Verdict(FAIL, f"final value outside {tolerance:.0%} of the limit", final, limit)
    return Verdict(PASS, f"within {tolerance:.0%} of the limit", final, limit)
