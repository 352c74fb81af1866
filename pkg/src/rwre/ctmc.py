"""Continuous-time walk on Z with generator

    L f(k) = c(k-1) f(k-1) + c(k) f(k+1) - cbar(k) f(k).

Simulated event by event: the holding time at ``k`` is exponential with rate
``cbar(k)`` and the jump goes right with probability ``c(k)/cbar(k)``, the same
split as the discrete-time walk.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numba as nb
import numpy as np

from . import rng
from .analysis import LimitValue, MomentReport, jump_process_limit
from .environment import DiscreteEnvironment
from .errors import RateOverflow
from .walk import TrajectoryEnsemble, moment_stats, transition_kernel

log = logging.getLogger(__name__)

DEFAULT_RATE_CAP = 1e6


@dataclass(frozen=True)
class JumpProcessState:
    position: int = 0
    clock: float = 0.0


@nb.njit(nogil=True, cache=True)
def _jump_block(right, cbar, origin, horizons, base, start, count, out, events):
    """Returns the first stream that left the site window, or -1."""
    nh = horizons.shape[0]
    width = right.shape[0]
    for j in range(count):
        s = start + j
        key = rng.nb_stream_key(base, s)
        pos = 0
        t = 0.0
        n_ev = 0
        h = 0
        while h < nh:
            i = pos + origin
            t_next = t - math.log(rng.nb_uniform(key, 2 * n_ev)) / cbar[i]
            while h < nh and horizons[h] < t_next:
                out[h, s] = pos
                events[h, s] = n_ev
                h += 1
            if h == nh:
                break
            if rng.nb_uniform(key, 2 * n_ev + 1) < right[i]:
                pos += 1
            else:
                pos -= 1
            n_ev += 1
            t = t_next
            if pos + origin <= 0 or pos + origin >= width - 1:
                return s
    return -1


def _initial_window(env: DiscreteEnvironment, t_max: float) -> int:
    probe = env.cbars(np.arange(-64, 65))
    rate = float(np.max(probe))
    return int(8.0 * math.sqrt(rate * t_max) + 64)


def simulate_jump_process(env: DiscreteEnvironment, horizons: Sequence[float],
                          n_streams: int, seed: int, threads: int = 1,
                          rate_cap: float = DEFAULT_RATE_CAP) -> TrajectoryEnsemble:
    """Positions of independent jump processes at ascending horizon times.

    The site window grows (and the run is replayed, which the counter-based
    streams make exact) whenever a path reaches its edge.  Raises RateOverflow
    if a holding rate in the window exceeds ``rate_cap``.
    """
    hs = np.asarray([float(t) for t in horizons], dtype=np.float64)
    if hs.size == 0 or (hs < 0).any() or (np.diff(hs) < 0).any():
        raise ValueError("horizons must be a nonempty ascending list of times >= 0")
    if n_streams < 1:
        raise ValueError("need at least one stream")
    base = rng.derive_key(seed, rng.DOMAIN_STREAMS)
    W = _initial_window(env, float(hs[-1]))
    while True:
        kern = transition_kernel(env, -W, W)
        cbar = env.cbars(np.arange(-W, W + 1, dtype=np.int64))
        peak = float(cbar.max())
        if peak > rate_cap:
            raise RateOverflow(
                f"holding rate {peak:.3g} exceeds the cap {rate_cap:.3g}; "
                "raise --rate-cap or shorten the horizon"
            )
        out = np.zeros((hs.size, n_streams), dtype=np.int64)
        events = np.zeros((hs.size, n_streams), dtype=np.int64)

        def work(start, count):
            return _jump_block(kern.right, cbar, W, hs, base, start, count, out, events)

        escaped = [s for s in rng.run_chunked(work, n_streams, threads) if s >= 0]
        if not escaped:
            return TrajectoryEnsemble(hs, out, seed, n_streams, events)
        log.debug("stream %d reached the window edge at W=%d; doubling", escaped[0], W)
        W *= 2


def variance_limit_ctmc(env: DiscreteEnvironment) -> LimitValue:
    """``2 / int c^-1 dmu``, zero (flagged) when the integral diverges."""
    return jump_process_limit(env)


def variance_curve_ctmc(env: DiscreteEnvironment, horizons: Sequence[float],
                        n_streams: int, seed: int, threads: int = 1,
                        rate_cap: float = DEFAULT_RATE_CAP) -> MomentReport:
    ts = sorted({float(t) for t in horizons})
    if not ts or ts[0] <= 0:
        raise ValueError("horizons must be > 0")
    ens = simulate_jump_process(env, ts, n_streams, seed, threads, rate_cap)
    means, ses = ens.second_moments()
    ev_means, _ = moment_stats(ens.events.astype(np.float64))
    lim = variance_limit_ctmc(env)
    return MomentReport(
        times=ts,
        second_moment=[float(m) for m in means],
        values=[float(m / t) for m, t in zip(means, ts)],
        stderr=[float(s / t) for s, t in zip(ses, ts)],
        methods=["mc"] * len(ts),
        limit=lim.value,
        limit_provenance=lim.provenance,
        environment=env.describe(),
        extra={
            "events_per_t": [float(e / t) for e, t in zip(ev_means, ts)],
            "mean_inverse_c": lim.mean_inverse,
            "n_streams": n_streams,
            "seed": seed,
        },
    )
