"""Discrete-time reversible walk on Z in a fixed conductance environment.

From site ``k`` the walk steps to ``k+1`` with probability ``c(k)/cbar(k)``
and to ``k-1`` otherwise, where ``cbar(k) = c(k) + c(k-1)``.  Two routes to
``E_w(X_n^2)`` are provided: exact evolution of the law on a finite window,
and Monte Carlo over independent counter-based streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba as nb
import numpy as np

from . import rng
from .analysis import MomentReport, walk_limit
from .environment import DiscreteEnvironment
from .errors import WindowTooSmall

EXACT_LIMIT = 10_000


@dataclass(frozen=True)
class TransitionKernel:
    """Right/left step probabilities on sites ``lo .. lo + len(right) - 1``."""

    lo: int
    right: np.ndarray
    left: np.ndarray

    @property
    def hi(self) -> int:
        return self.lo + len(self.right) - 1

    def index(self, k: int) -> int:
        return k - self.lo


def transition_kernel(env: DiscreteEnvironment, lo: int, hi: int) -> TransitionKernel:
    """Kernel over ``[lo, hi]``; built from unscaled conductances (ratios only)."""
    ks = np.arange(lo, hi + 1, dtype=np.int64)
    c_up = env.unit_conductances(ks)
    c_down = env.unit_conductances(ks - 1)
    right = c_up / (c_up + c_down)
    return TransitionKernel(lo, right, 1.0 - right)


@dataclass
class LatticeDistribution:
    """Law of ``X_n`` on ``[-W, W]`` plus the mass that has left the window."""

    window: int
    mass: np.ndarray
    escaped: float = 0.0
    steps: int = 0

    @classmethod
    def delta(cls, window: int) -> "LatticeDistribution":
        mass = np.zeros(2 * window + 1)
        mass[window] = 1.0
        return cls(window, mass)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.window, self.window + 1, dtype=np.int64)

    def at(self, k: int) -> float:
        return float(self.mass[k + self.window]) if abs(k) <= self.window else 0.0

    def total(self) -> float:
        return math.fsum(self.mass) + self.escaped

    def second_moment(self) -> float:
        k = self.sites.astype(np.float64)
        return math.fsum(k * k * self.mass)


def step_distribution(dist: LatticeDistribution, kernel: TransitionKernel) -> LatticeDistribution:
    """One step of the walk applied to a law; mass leaving the window escapes."""
    W = dist.window
    i0 = kernel.index(-W)
    if i0 < 0 or kernel.hi < W:
        raise ValueError("kernel does not cover the distribution window")
    right = kernel.right[i0:i0 + 2 * W + 1]
    left = kernel.left[i0:i0 + 2 * W + 1]
    m = dist.mass
    new = np.zeros_like(m)
    new[1:] += m[:-1] * right[:-1]
    new[:-1] += m[1:] * left[1:]
    escaped = dist.escaped + float(m[-1] * right[-1]) + float(m[0] * left[0])
    return LatticeDistribution(W, new, escaped, dist.steps + 1)


@dataclass(frozen=True)
class ExactMoment:
    """``E_w(X_n^2)`` with the certified interval ``[value, upper]``."""

    n: int
    value: float
    upper: float
    escaped: float
    window: int

    @property
    def exact(self) -> bool:
        return self.escaped == 0.0


@nb.njit(inline="always")
def _kahan_add(s, c, x):
    t = s + x
    if abs(s) >= abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    return t, c


@nb.njit(cache=True)
def _evolve(right, left, W, marks):
    """Evolve ``delta_0`` on ``[-W, W]``; second moment and escaped mass at ``marks``.

    ``E X_{n+1}^2 - E X_n^2 = sum_k m(k) (1 + 2 k (r(k) - l(k)))`` minus the
    mass leaving the window times ``(W+1)^2``.  Accumulating these increments
    (with compensation) keeps ``E X_n^2 = n`` exact in a homogeneous medium,
    where the drift term vanishes identically.
    """
    size = 2 * W + 1
    mass = np.zeros(size)
    new = np.zeros(size)
    mass[W] = 1.0
    nm = marks.shape[0]
    values = np.zeros(nm)
    escaped_at = np.zeros(nm)
    escaped = 0.0
    m2 = 0.0
    m2_c = 0.0
    edge2 = float(W + 1) ** 2
    ci = 0
    step = 0
    while ci < nm:
        while ci < nm and marks[ci] == step:
            values[ci] = m2 + m2_c
            escaped_at[ci] = escaped
            ci += 1
        if ci == nm:
            break
        r = min(step, W)
        a = W - r
        b = W + r + 1
        d = 0.0
        d_c = 0.0
        lost = 0.0
        for i in range(a, b):
            m = mass[i]
            if m == 0.0:
                continue
            d, d_c = _kahan_add(d, d_c, (i - W) * m * (right[i] - left[i]))
            if i > 0:
                new[i - 1] += m * left[i]
            else:
                lost += m * left[i]
            if i < size - 1:
                new[i + 1] += m * right[i]
            else:
                lost += m * right[i]
        inc = (1.0 - escaped) + 2.0 * (d + d_c) - lost * edge2
        m2, m2_c = _kahan_add(m2, m2_c, inc)
        escaped += lost
        lo = max(a - 1, 0)
        hi = min(b + 1, size)
        for i in range(lo, hi):
            mass[i] = new[i]
            new[i] = 0.0
        step += 1
    return values, escaped_at


def exact_second_moments(env: DiscreteEnvironment, checkpoints: Sequence[int],
                         window: int | None = None) -> list[ExactMoment]:
    """Evolve ``delta_0`` once and read ``E_w(X_n^2)`` at every checkpoint."""
    cps = [int(n) for n in checkpoints]
    if any(n < 0 for n in cps) or cps != sorted(cps):
        raise ValueError("checkpoints must be ascending and nonnegative")
    n_max = cps[-1] if cps else 0
    W = n_max if window is None else int(window)
    if W < 0:
        raise ValueError("window must be >= 0")
    kern = transition_kernel(env, -W, W)
    marks = np.asarray(cps, dtype=np.int64)
    values, escaped = _evolve(kern.right, kern.left, W, marks)
    return [
        ExactMoment(n, float(v), float(v) + float(e) * float(n) ** 2, float(e), W)
        for n, v, e in zip(cps, values, escaped)
    ]
    return out


def second_moment_exact(env: DiscreteEnvironment, n: int, window: int | None = None,
                        tolerance: float = math.inf) -> ExactMoment:
    """``E_w(X_n^2)``; exact when ``window >= n``, otherwise certified.

    Raises WindowTooSmall when the certified interval is wider than
    ``tolerance``.
    """
    res = exact_second_moments(env, [n], window)[0]
    if res.upper - res.value > tolerance:
        raise WindowTooSmall(
            f"escaped mass {res.escaped:.3g} leaves an interval of width "
            f"{res.upper - res.value:.3g} > {tolerance:g}; enlarge the window"
        )
    return res


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryEnsemble:
    """Endpoints of ``n_streams`` independent paths at each checkpoint.

    ``endpoints[i, s]`` is the position of stream ``s`` at ``checkpoints[i]``;
    stream ``s`` draws from ``rng.stream_keys(seed, s)``.
    """

    checkpoints: np.ndarray
    endpoints: np.ndarray
    seed: int
    n_streams: int
    events: np.ndarray | None = None

    def second_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean of ``X^2`` per checkpoint and its standard error."""
        return moment_stats(self.endpoints.astype(np.float64) ** 2)


def moment_stats(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise mean and standard error with exactly rounded sums.

    ``math.fsum`` makes the result independent of summation order, so any
    split of the streams reduces to the same bits.
    """
    samples = np.atleast_2d(samples)
    n = samples.shape[1]
    means = np.empty(samples.shape[0])
    ses = np.empty(samples.shape[0])
    for i, row in enumerate(samples):
        m = math.fsum(row) / n
        means[i] = m
        if n > 1:
            d = row - m
            ses[i] = math.sqrt(math.fsum(d * d) / (n - 1) / n)
        else:
            ses[i] = 0.0
    return means, ses


@nb.njit(nogil=True, cache=True)
def _walk_block(right, origin, checkpoints, base, start, count, out):
    ncp = checkpoints.shape[0]
    n_max = checkpoints[ncp - 1]
    for j in range(count):
        s = start + j
        key = rng.nb_stream_key(base, s)
        pos = 0
        ci = 0
        while ci < ncp and checkpoints[ci] == 0:
            out[ci, s] = 0
            ci += 1
        for step in range(1, n_max + 1):
            if rng.nb_uniform(key, step) < right[pos + origin]:
                pos += 1
            else:
                pos -= 1
            while ci < ncp and checkpoints[ci] == step:
                out[ci, s] = pos
                ci += 1


def sample_trajectories(env: DiscreteEnvironment, checkpoints: Sequence[int],
                        n_streams: int, seed: int, threads: int = 1) -> TrajectoryEnsemble:
    """Independent walks from 0, recorded at ascending checkpoints."""
    cps = np.asarray([int(n) for n in checkpoints], dtype=np.int64)
    if cps.size == 0 or (cps < 0).any() or (np.diff(cps) < 0).any():
        raise ValueError("checkpoints must be a nonempty ascending list of steps >= 0")
    if n_streams < 1:
        raise ValueError("need at least one stream")
    n_max = int(cps[-1])
    kern = transition_kernel(env, -n_max, n_max)
    out = np.zeros((cps.size, n_streams), dtype=np.int64)
    base = rng.derive_key(seed, rng.DOMAIN_STREAMS)

    def work(start, count):
        _walk_block(kern.right, n_max, cps, base, start, count, out)

    rng.run_chunked(work, n_streams, threads)
    return TrajectoryEnsemble(cps, out, seed, n_streams)


def variance_curve(env: DiscreteEnvironment, steps: Sequence[int], *,
                   exact_limit: int = EXACT_LIMIT, n_streams: int = 100_000,
                   seed: int = 0, threads: int = 1,
                   window: int | None = None) -> MomentReport:
    """``E_w(X_n^2)/n`` per ``n`` plus the predicted limit.

    Steps up to ``exact_limit`` are evolved exactly (window ``n`` unless
    given); larger steps are estimated by Monte Carlo.
    """
    ns = sorted({int(n) for n in steps})
    if not ns or ns[0] < 1:
        raise ValueError("steps must be >= 1")
    exact_ns = [n for n in ns if n <= exact_limit]
    mc_ns = [n for n in ns if n > exact_limit]
    rows: dict[int, tuple] = {}
    if exact_ns:
        for r in exact_second_moments(env, exact_ns, window):
            rows[r.n] = (r.value, 0.0 if r.exact else r.upper - r.value,
                         "exact" if r.exact else "exact-certified")
    if mc_ns:
        ens = sample_trajectories(env, mc_ns, n_streams, seed, threads)
        means, ses = ens.second_moments()
        for n, m, se in zip(mc_ns, means, ses):
            rows[n] = (float(m), float(se), "mc")
    lim = walk_limit(env)
    return MomentReport(
        times=ns,
        second_moment=[rows[n][0] for n in ns],
        values=[rows[n][0] / n for n in ns],
        stderr=[rows[n][1] / n for n in ns],
        methods=[rows[n][2] for n in ns],
        limit=lim.value,
        limit_provenance=lim.provenance,
        environment=env.describe(),
        extra={"mean_c": lim.mean, "mean_inverse_c": lim.mean_inverse,
               "n_streams": n_streams if mc_ns else 0, "seed": seed},
    )
