"""Diffusion in a periodic flow environment.

The process solves ``dX = sigma(X) dB + b(X) dt`` with
``sigma^2 = lambda/gamma`` and ``b = lambda' / (2 gamma)``, started at 0, and is
integrated by Euler-Maruyama.  Every run also integrates the same Brownian
path with step ``dt/2`` (on a subset of streams), which gives a direct
measurement of the discretisation bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba as nb
import numpy as np

from . import rng
from .analysis import FAIL, INCONCLUSIVE, PASS, LimitValue, MomentReport, flow_limit
from .corrector import CorrectorTable, build_continuous
from .environment import ContinuousEnvironment
from .errors import UnstableStep
from .walk import moment_stats

DEFAULT_GUARD = 1e6
DEFAULT_BIAS_STREAMS = 4096


@dataclass(frozen=True)
class DiffusionCoefficients:
    env: ContinuousEnvironment
    sigma0sq: float | None = None

    def sigma2(self, x):
        return self.env.lam_at(x) / self.env.gam_at(x)

    def drift(self, x):
        return self.env.lam_prime_at(x) / (2.0 * self.env.gam_at(x))

    def drift_fd(self, x, h: float = 1e-5):
        """Drift with ``lambda'`` replaced by a central difference."""
        x = np.asarray(x, dtype=np.float64)
        dl = (self.env.lam_at(x + h) - self.env.lam_at(x - h)) / (2.0 * h)
        return dl / (2.0 * self.env.gam_at(x))

    def sigma2_bounds(self) -> tuple[float, float]:
        """Bounds on ``sigma^2`` from the profile amplitudes (not sampled)."""
        lam, gam = self.env.lam, self.env.gam
        return lam.minimum_bound() / gam.maximum_bound(), lam.maximum_bound() / gam.minimum_bound()


@nb.njit(inline="always", cache=True)
def _profile(u, off, ca, sa):
    v = off
    d = 0.0
    if ca.shape[0] == 0:
        return v, d
    theta = 2.0 * np.pi * (u - math.floor(u))
    c1 = math.cos(theta)
    s1 = math.sin(theta)
    c = c1
    s = s1
    for j in range(ca.shape[0]):
        w = 2.0 * np.pi * (j + 1)
        v += ca[j] * c + sa[j] * s
        d += w * (sa[j] * c - ca[j] * s)
        c, s = c * c1 - s * s1, s * c1 + c * s1
    return v, d


@nb.njit(nogil=True, cache=True)
def _em_block(phase, lo, lc, ls, go, gc, gs, dt, levels, marks, base,
              start, count, bias_streams, guard, out, fine):
    """Coupled Euler-Maruyama paths; returns the first unstable stream or -1.

    Level ``l`` uses step ``dt / 2**l`` driven by sums of the finest normals,
    so all levels follow the same Brownian path.  Streams below
    ``bias_streams`` integrate every level; the rest integrate level 0 only.
    """
    n_fine = 1 << levels
    n_pairs = max(1, n_fine // 2)
    nh = marks.shape[0]
    n_steps = marks[nh - 1]
    z = np.empty(2 * n_pairs)
    x = np.zeros(levels + 1)
    sq0 = math.sqrt(dt / n_fine)
    for j in range(count):
        s = start + j
        key = rng.nb_stream_key(base, s)
        n_lev = levels + 1 if s < bias_streams else 1
        for lev in range(levels + 1):
            x[lev] = 0.0
        h = 0
        ctr = 0
        while h < nh and marks[h] == 0:
            out[h, s] = 0.0
            if s < bias_streams:
                for lev in range(1, levels + 1):
                    fine[lev - 1, h, s] = 0.0
            h += 1
        x0 = 0.0
        for step in range(1, n_steps + 1):
            total = 0.0
            for q in range(n_pairs):
                z0, z1, ctr = rng.nb_normal_pair(key, ctr)
                z[2 * q] = z0
                z[2 * q + 1] = z1
                total += z0 + z1
            lam, dlam = _profile(x0 + phase, lo, lc, ls)
            gam, _ = _profile(x0 + phase, go, gc, gs)
            x0 = x0 + math.sqrt(lam / gam) * sq0 * total + dlam / (2.0 * gam) * dt
            if not abs(x0) <= guard:
                return s
            for lev in range(1, n_lev):
                m = 1 << lev
                g = n_fine // m
                sub = dt / m
                scale = math.sqrt(sub / g)
                xi = x[lev]
                for k in range(m):
                    acc = 0.0
                    for r in range(g):
                        acc += z[k * g + r]
                    lam, dlam = _profile(xi + phase, lo, lc, ls)
                    gam, _ = _profile(xi + phase, go, gc, gs)
                    xi = xi + math.sqrt(lam / gam) * scale * acc + dlam / (2.0 * gam) * sub
                if not abs(xi) <= guard:
                    return s
                x[lev] = xi
            x[0] = x0
            while h < nh and marks[h] == step:
                out[h, s] = x[0]
                if s < bias_streams:
                    for lev in range(1, levels + 1):
                        fine[lev - 1, h, s] = x[lev]
                h += 1
    return -1


@dataclass
class EulerRun:
    """Endpoints of an Euler-Maruyama ensemble.

    ``endpoints[h, s]``: stream ``s`` at ``horizons[h]`` with step ``dt``.
    ``fine[l-1, h, s]``: the same Brownian path integrated with ``dt / 2**l``
    for the first ``bias_streams`` streams.
    """

    env: ContinuousEnvironment
    dt: float
    horizons: np.ndarray
    steps: np.ndarray
    n_streams: int
    seed: int
    endpoints: np.ndarray
    fine: np.ndarray
    bias_streams: int
    levels: int

    def second_moments(self) -> tuple[np.ndarray, np.ndarray]:
        return moment_stats(self.endpoints ** 2)

    def level_moments(self, fn=np.square) -> np.ndarray:
        """Mean of ``fn(X_t)`` per level on the coupled streams, shape (levels+1, nh)."""
        B = self.bias_streams
        rows = [moment_stats(fn(self.endpoints[:, :B]))[0]]
        rows += [moment_stats(fn(self.fine[l]))[0] for l in range(self.levels)]
        return np.array(rows)

    def em_bias(self, fn=np.square) -> tuple[np.ndarray, np.ndarray]:
        """``E fn(X^dt) - E fn(X^(dt/2))`` on coupled streams, with its standard error."""
        B = self.bias_streams
        diff = fn(self.endpoints[:, :B]) - fn(self.fine[0])
        return moment_stats(diff)


def integrate(env: ContinuousEnvironment, dt: float, horizons: Sequence[float],
              n_streams: int, seed: int, threads: int = 1,
              bias_streams: int | None = DEFAULT_BIAS_STREAMS, levels: int = 1,
              guard: float = DEFAULT_GUARD) -> EulerRun:
    """Euler-Maruyama ensemble from ``X_0 = 0``; horizons must be multiples of ``dt``.

    Raises UnstableStep if a path leaves ``[-guard, guard]``.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if levels < 1:
        raise ValueError("levels must be >= 1 (the half-step diagnostic is mandatory)")
    if n_streams < 1:
        raise ValueError("need at least one stream")
    hs = np.asarray([float(t) for t in horizons], dtype=np.float64)
    if hs.size == 0 or (hs < 0).any() or (np.diff(hs) < 0).any():
        raise ValueError("horizons must be a nonempty ascending list of times >= 0")
    steps = np.rint(hs / dt).astype(np.int64)
    if np.any(np.abs(steps * dt - hs) > 1e-9 * np.maximum(1.0, hs)):
        raise ValueError("every horizon must be an integer multiple of dt")
    B = n_streams if bias_streams is None else min(int(bias_streams), n_streams)
    if B < 2:
        raise ValueError("the bias diagnostic needs at least 2 coupled streams")
    phase, lo, lc, ls, go, gc, gs = env.kernel_arrays()
    base = rng.derive_key(seed, rng.DOMAIN_STREAMS)
    out = np.zeros((hs.size, n_streams))
    fine = np.zeros((levels, hs.size, B))

    def work(start, count):
        return _em_block(phase, lo, lc, ls, go, gc, gs, float(dt), levels, steps, base,
                         start, count, B, float(guard), out, fine)

    bad = [s for s in rng.run_chunked(work, n_streams, threads) if s >= 0]
    if bad:
        raise UnstableStep(
            f"stream {bad[0]} left [-{guard:g}, {guard:g}]; reduce dt (now {dt:g})"
        )
    return EulerRun(env, float(dt), hs, steps, n_streams, seed, out, fine, B, levels)


def variance_limit_diffusion(env: ContinuousEnvironment) -> LimitValue:
    """``[(int gamma)(int 1/lambda)]^-1``."""
    return flow_limit(env)


def variance_curve_diffusion(run: EulerRun) -> MomentReport:
    ts = [float(t) for t in run.horizons]
    if ts[0] <= 0:
        raise ValueError("curve horizons must be > 0")
    means, ses = run.second_moments()
    bias, _ = run.em_bias()
    lim = variance_limit_diffusion(run.env)
    return MomentReport(
        times=ts,
        second_moment=[float(m) for m in means],
        values=[float(m / t) for m, t in zip(means, ts)],
        stderr=[float(s / t) for s, t in zip(ses, ts)],
        methods=["euler-maruyama"] * len(ts),
        limit=lim.value,
        limit_provenance=lim.provenance,
        environment=run.env.describe(),
        extra={
            "em_bias": [float(b / t) for b, t in zip(bias, ts)],
            "dt": run.dt,
            "n_streams": run.n_streams,
            "bias_streams": run.bias_streams,
            "seed": run.seed,
        },
    )


@dataclass(frozen=True)
class HorizonVerdict:
    t: float
    estimate: float
    stderr: float
    target: float
    em_bias: float
    verdict: str


def _has_unit_capacity(env: ContinuousEnvironment) -> bool:
    return env.gam.is_constant and env.gam.offset == 1.0


def check_quadratic_bound(run: EulerRun, sigma0sq: float,
                          direction: str = "upper") -> list[HorizonVerdict]:
    """Compare ``E X_t^2`` with ``sigma0sq * t`` per horizon.

    ``upper``: PASS when mean <= bound + 3 SE.  ``lower``: mean >= bound - 3 SE.
    ``equal``: |mean - bound| <= 4 SE.  INCONCLUSIVE when the standard error
    or the measured half-step bias exceeds 10% of the bound.
    """
    if direction not in ("upper", "lower", "equal"):
        raise ValueError("direction must be upper, lower or equal")
    if not _has_unit_capacity(run.env):
        raise ValueError("the quadratic bound is stated for gamma == 1")
    if not sigma0sq > 0:
        raise ValueError("sigma0sq must be > 0")
    means, ses = run.second_moments()
    bias, _ = run.em_bias()
    out = []
    for t, m, se, b in zip(run.horizons, means, ses, bias):
        bound = sigma0sq * float(t)
        if bound > 0 and (se > 0.1 * bound or abs(b) > 0.1 * bound):
            verdict = INCONCLUSIVE
        elif direction == "upper":
            verdict = PASS if m <= bound + 3.0 * se else FAIL
        elif direction == "lower":
            verdict = PASS if m >= bound - 3.0 * se else FAIL
        else:
            verdict = PASS if abs(m - bound) <= 4.0 * se else FAIL
        out.append(HorizonVerdict(float(t), float(m), float(se), bound, float(b), verdict))
    return out


def corrector_for_run(run: EulerRun, h: float = 1e-3) -> CorrectorTable:
    reach = float(np.max(np.abs(run.endpoints))) if run.endpoints.size else 0.0
    if run.fine.size:
        reach = max(reach, float(np.max(np.abs(run.fine))))
    return build_continuous(run.env, max(1.0, math.ceil(1.05 * reach + 1.0)), h)


def check_constant_drift_of_Y(run: EulerRun, table: CorrectorTable | None = None
                              ) -> list[HorizonVerdict]:
    """``E f(X_t)`` against ``t`` for the continuous corrector ``f``.

    PASS when ``|mean - t| <= 4 SE + |bias|``; INCONCLUSIVE when the standard
    error or the half-step bias exceeds 10% of ``t``.
    """
    if table is None:
        table = corrector_for_run(run)
    reach = max(float(np.max(np.abs(run.endpoints))), float(np.max(np.abs(run.fine))))
    if reach > table.extent:
        raise ValueError(f"corrector table covers |x| <= {table.extent:g} but paths reach {reach:g}")
    means, ses = moment_stats(table.at(run.endpoints))
    bias, _ = run.em_bias(table.at)
    out = []
    for t, m, se, b in zip(run.horizons, means, ses, bias):
        t = float(t)
        if t == 0.0:
            verdict = PASS if m == 0.0 else FAIL
        elif se > 0.1 * t or abs(b) > 0.1 * t:
            verdict = INCONCLUSIVE
        else:
            verdict = PASS if abs(m - t) <= 4.0 * se + abs(b) else FAIL
        out.append(HorizonVerdict(t, float(m), float(se), t, float(b), verdict))
    return out
