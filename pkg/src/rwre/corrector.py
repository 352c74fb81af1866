"""Explicit correctors: ``(P - I) f = 1``, ``L f = 1`` and the continuous ``L f = 1``.

Discrete variant ``P``: with ``f(0) = f(1) = 0``

    f(m)  = sum_{l=0}^{m-1} 1/c(l)  * sum_{k=1}^{l}   cbar(k)     (m >= 1)
    f(-m) = sum_{l=1}^{m}   1/c(-l) * sum_{k=0}^{l-1} cbar(-k)    (m >= 1)

Discrete variant ``L`` (jump-process generator) has unit inner weights, and
the continuous variant replaces the sums by integrals of ``2 gamma`` (inner)
and ``1/lambda`` (outer).  Both sums are accumulated incrementally with
Neumaier compensation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .analysis import medium_integrals
from .environment import ContinuousEnvironment, DiscreteEnvironment

DISCRETE_P = "discrete-P"
DISCRETE_L = "discrete-L"
CONTINUOUS = "continuous"
VARIANTS = (DISCRETE_P, DISCRETE_L, CONTINUOUS)

DEFAULT_GRID = 1e-3


@nb.njit(cache=True)
def _nested_prefix(inner, denom):
    """``out[i+1] = out[i] + (inner[0] + ... + inner[i]) / denom[i]``, compensated."""
    n = inner.shape[0]
    out = np.zeros(n + 1)
    s = 0.0
    s_c = 0.0
    f = 0.0
    f_c = 0.0
    for i in range(n):
        x = inner[i]
        t = s + x
        if abs(s) >= abs(x):
            s_c += (s - t) + x
        else:
            s_c += (x - t) + s
        s = t
        y = (s + s_c) / denom[i]
        t = f + y
        if abs(f) >= abs(y):
            f_c += (f - t) + y
        else:
            f_c += (y - t) + f
        f = t
        out[i + 1] = f + f_c
    return out


@nb.njit(cache=True)
def _compensated_cumsum(x):
    out = np.empty(x.shape[0] + 1)
    out[0] = 0.0
    s = 0.0
    c = 0.0
    for i in range(x.shape[0]):
        t = s + x[i]
        if abs(s) >= abs(x[i]):
            c += (s - t) + x[i]
        else:
            c += (x[i] - t) + s
        s = t
        out[i + 1] = s + c
    return out


@dataclass(frozen=True)
class CorrectorTable:
    """Values of a corrector on ``points`` (integers ``-M..M`` or an x-grid)."""

    variant: str
    points: np.ndarray
    values: np.ndarray
    env: object
    grid: float | None = None

    @property
    def extent(self):
        return self.points[-1]

    def at(self, m):
        """Corrector at integer sites (discrete) or arbitrary x (interpolated)."""
        if self.variant == CONTINUOUS:
            return np.interp(m, self.points, self.values)
        m = np.asarray(m, dtype=np.int64)
        M = int(self.points[-1])
        if np.any(np.abs(m) > M):
            raise IndexError(f"site outside the table range [-{M}, {M}]")
        return self.values[m + M]

    def ratio(self, m):
        m = np.asarray(m, dtype=np.float64)
        return self.at(m if self.variant == CONTINUOUS else m.astype(np.int64)) / (m * m)


def _build_discrete_variant(env: DiscreteEnvironment, M: int, variant: str) -> CorrectorTable:
    if M < 1:
        raise ValueError("range M must be >= 1")
    pos_l = np.arange(0, M, dtype=np.int64)           # l = 0 .. M-1
    neg_l = np.arange(1, M + 1, dtype=np.int64)       # l = 1 .. M
    c_pos = env.conductances(pos_l)
    c_neg = env.conductances(-neg_l)
    if variant == DISCRETE_P:
        inner_pos = env.cbars(pos_l)
        inner_pos[0] = 0.0                            # inner sum starts at k = 1
        inner_neg = env.cbars(-(neg_l - 1))           # cbar(0), cbar(-1), ...
    else:
        inner_pos = np.ones(M)
        inner_pos[0] = 0.0
        inner_neg = np.ones(M)
    f_pos = _nested_prefix(inner_pos, c_pos)          # f(0), ..., f(M)
    f_neg = _nested_prefix(inner_neg, c_neg)          # f(0), f(-1), ..., f(-M)
    values = np.concatenate([f_neg[:0:-1], f_pos])
    points = np.arange(-M, M + 1, dtype=np.int64)
    return CorrectorTable(variant, points, values, env)


def build_discrete(env: DiscreteEnvironment, M: int) -> CorrectorTable:
    """Solution of ``(P - I) f = 1`` with ``f(0) = f(1) = 0`` on ``[-M, M]``."""
    return _build_discrete_variant(env, M, DISCRETE_P)


def build_discrete_L(env: DiscreteEnvironment, M: int) -> CorrectorTable:
    """Solution of ``L f = 1`` for the jump-process generator.

    ``c(k) (f(k+1) - f(k)) = k`` gives ``f(m) = sum_{l<m} l/c(l)`` and
    ``f(-m) = sum_{l<=m} l/c(-l)``; ``f(0) = f(1) = 0``.
    """
    return _build_discrete_variant(env, M, DISCRETE_L)


def _continuous_side(lam, gam, n: int, h: float) -> np.ndarray:
    """``f`` at ``0, h, ..., n h`` for profiles given as callables of ``x >= 0``."""
    q = np.arange(4 * n + 1, dtype=np.float64) * (h / 4.0)
    g = 2.0 * gam(q)
    inner_cells = (h / 6.0) * (g[0:-1:4] + 4.0 * g[2::4] + g[4::4])
    inner = _compensated_cumsum(inner_cells)
    inner_mid = inner[:-1] + (h / 12.0) * (g[0:-1:4] + 4.0 * g[1::4] + g[2::4])
    lam_full = lam(q[0::4])
    lam_mid = lam(q[2::4])
    y_full = inner / lam_full
    y_mid = inner_mid / lam_mid
    cells = (h / 6.0) * (y_full[:-1] + 4.0 * y_mid + y_full[1:])
    return _compensated_cumsum(cells)


def build_continuous(env: ContinuousEnvironment, X: float, h: float = DEFAULT_GRID) -> CorrectorTable:
    """Double integral ``int_0^x 1/lambda(v) int_0^v 2 gamma(u) du dv`` on ``[-X, X]``.

    Composite Simpson on both integrals; the inner integral at midpoints uses
    quarter-step Simpson so both levels are fourth-order accurate.
    """
    if h <= 0 or X <= 0:
        raise ValueError("need X > 0 and grid step h > 0")
    n = int(math.ceil(X / h - 1e-9))
    f_pos = _continuous_side(env.lam_at, env.gam_at, n, h)
    f_neg = _continuous_side(lambda x: env.lam_at(-x), lambda x: env.gam_at(-x), n, h)
    points = np.arange(-n, n + 1, dtype=np.float64) * h
    values = np.concatenate([f_neg[:0:-1], f_pos])
    return CorrectorTable(CONTINUOUS, points, values, env, grid=h)


def richardson_change(env: ContinuousEnvironment, X: float, h: float = DEFAULT_GRID) -> float:
    """Relative change of ``f(+-X)`` when the grid step is halved."""
    a = build_continuous(env, X, h)
    b = build_continuous(env, X, h / 2.0)
    ends = np.array([-a.points[-1], a.points[-1]])
    fa, fb = a.at(ends), b.at(ends)
    return float(np.max(np.abs(fa - fb) / np.abs(fb)))


# ---------------------------------------------------------------------------
# Validity checks
# ---------------------------------------------------------------------------

def poisson_residuals(table: CorrectorTable, env: DiscreteEnvironment,
                      lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
    """Relative residuals of the defining equation at sites ``lo..hi``.

    ``discrete-P``: ``|P f - f - 1| / (1 + max|f|)`` over the three sites.
    ``discrete-L``: ``|L f - 1| / (cbar (1 + max|f|))``, the same quantity
    after dividing the generator by the holding rate.
    """
    M = int(table.points[-1])
    if lo > hi or lo <= -M or hi >= M:
        raise ValueError(f"range must lie strictly inside [-{M}, {M}]")
    ks = np.arange(lo, hi + 1, dtype=np.int64)
    f0 = table.at(ks)
    fm = table.at(ks - 1)
    fp = table.at(ks + 1)
    c_up = env.conductances(ks)
    c_down = env.conductances(ks - 1)
    cbar = c_up + c_down
    scale = 1.0 + np.maximum(np.maximum(np.abs(fm), np.abs(f0)), np.abs(fp))
    if table.variant == DISCRETE_P:
        pf = (c_down * fm + c_up * fp) / cbar
        res = np.abs(pf - f0 - 1.0) / scale
    elif table.variant == DISCRETE_L:
        lf = c_down * fm + c_up * fp - cbar * f0
        res = np.abs(lf - 1.0) / (cbar * scale)
    else:
        raise ValueError("poisson residuals apply to discrete tables")
    return ks, res


def check_poisson(table: CorrectorTable, env: DiscreteEnvironment, lo: int, hi: int) -> float:
    """Maximum relative residual over ``lo..hi``."""
    _, res = poisson_residuals(table, env, lo, hi)
    return float(res.max())


def continuous_residuals(table: CorrectorTable, extent: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    """``|(1/2gamma) (lambda f')' - 1|`` by central differences on ``|x| <= extent``.

    Second differences lose about ``eps |f| / h^2`` to rounding, so the check
    is confined to a window where ``f`` is moderate.
    """
    env = table.env
    h = table.grid
    keep = np.abs(table.points) <= extent + 0.5 * h
    x = table.points[keep]
    f = table.values[keep]
    xm = 0.5 * (x[:-1] + x[1:])
    flux = env.lam_at(xm) * np.diff(f) / h
    lf = np.diff(flux) / h / (2.0 * env.gam_at(x[1:-1]))
    return x[1:-1], np.abs(lf - 1.0)


@dataclass(frozen=True)
class AsymptoticRatio:
    """``f(m)/m^2`` at ``+-M`` and ``+-M/2`` against the predicted limit."""

    M: int
    plus: float
    minus: float
    half_plus: float
    half_minus: float
    expected: float           # math.inf when an integral diverges
    divergent: bool

    @property
    def relative_error(self) -> float:
        if math.isinf(self.expected):
            return math.inf
        return max(abs(self.plus - self.expected), abs(self.minus - self.expected)) / self.expected

    @property
    def growing(self) -> bool:
        return self.plus > self.half_plus and self.minus > self.half_minus


def expected_ratio(table: CorrectorTable) -> float:
    """Predicted ``lim f(m)/m^2``; ``inf`` when an integral diverges."""
    it = medium_integrals(table.env)
    if table.variant == DISCRETE_L:
        return math.inf if it.inverse_infinite else 0.5 * it.mean_inverse
    if it.mean_infinite or it.inverse_infinite:
        return math.inf
    if table.variant == DISCRETE_P:
        # int cbar = 2 int c
        return 0.5 * it.mean_inverse * (2.0 * it.mean)
    return it.mean_inverse * it.mean


def asymptotic_ratio(table: CorrectorTable) -> AsymptoticRatio:
    ext = table.points[-1]
    if table.variant == CONTINUOUS:
        M, half = float(ext), float(ext) / 2.0
    else:
        M, half = int(ext), int(ext) // 2
    r = table.ratio(np.array([M, -M, half, -half]))
    expected = expected_ratio(table)
    return AsymptoticRatio(
        M=M,
        plus=float(r[0]),
        minus=float(r[1]),
        half_plus=float(r[2]),
        half_minus=float(r[3]),
        expected=expected,
        divergent=math.isinf(expected),
    )
