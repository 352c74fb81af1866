"""Stationary ergodic media on Z (edge conductances) and on R (lambda, gamma).

A discrete environment assigns the conductance ``c(T^k w)`` to the edge
``[k, k+1]``.  Values are pure functions of the construction parameters and
the site index: iid draws are keyed by ``(seed, k)``, the rotation family
evaluates a periodic profile along an exact rational orbit, and the Markov
family replays a chain that is sampled outward from site 0.

Conductances are stored in factored form ``scale * unit(k)``.  Quantities that
are homogeneous of degree zero in the conductances (the walk kernel) are
computed from ``unit`` so they are exactly invariant under rescaling.
"""

from __future__ import annotations

import math
import re
import threading
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Union

import numba as nb
import numpy as np

from . import rng
from .errors import EstimateOnly, InvalidEnvironment

ROTATION_MAX_DENOMINATOR = 10**9


# ---------------------------------------------------------------------------
# Periodic profiles
# ---------------------------------------------------------------------------

_TERM_RE = re.compile(
    r"([+-]?)\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)?\s*\*?\s*(sin|cos)(\d*)"
)


@dataclass(frozen=True)
class FourierProfile:
    """``g(u) = offset + sum_j cos[j-1] cos(2 pi j u) + sin[j-1] sin(2 pi j u)``.

    Period 1.  Construction requires ``offset > sum_j |(cos_j, sin_j)|`` which
    makes ``g`` strictly positive everywhere.
    """

    offset: float
    cos: tuple[float, ...] = ()
    sin: tuple[float, ...] = ()

    def __post_init__(self):
        n = max(len(self.cos), len(self.sin))
        cos = tuple(float(a) for a in self.cos) + (0.0,) * (n - len(self.cos))
        sin = tuple(float(b) for b in self.sin) + (0.0,) * (n - len(self.sin))
        while cos and cos[-1] == 0.0 and sin[-1] == 0.0:
            cos, sin = cos[:-1], sin[:-1]
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "cos", cos)
        object.__setattr__(self, "sin", sin)
        amp = sum(math.hypot(a, b) for a, b in zip(cos, sin))
        if not self.offset > amp:
            raise InvalidEnvironment(
                f"profile {self.expr()!r} is not strictly positive: offset must "
                f"exceed the sum of harmonic amplitudes ({amp:g})"
            )

    @classmethod
    def parse(cls, text: Union[str, float, int]) -> "FourierProfile":
        """Parse ``"2+sin"``, ``"1+0.5sin"``, ``"3+cos2-0.5sin"`` or a number."""
        if isinstance(text, (int, float)):
            return cls(float(text))
        s = str(text).replace(" ", "")
        offset = 0.0
        cos: dict[int, float] = {}
        sin: dict[int, float] = {}
        pos = 0
        while pos < len(s):
            m = _TERM_RE.match(s, pos)
            if m and m.group(3):
                sign = -1.0 if m.group(1) == "-" else 1.0
                coef = float(m.group(2)) if m.group(2) else 1.0
                j = int(m.group(4)) if m.group(4) else 1
                if j < 1:
                    raise InvalidEnvironment(f"harmonic index must be >= 1 in {text!r}")
                target = cos if m.group(3) == "cos" else sin
                target[j] = target.get(j, 0.0) + sign * coef
                pos = m.end()
                continue
            m = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?").match(s, pos)
            if not m or m.end() == pos:
                raise InvalidEnvironment(f"cannot parse profile {text!r} at {s[pos:]!r}")
            offset += float(m.group(0))
            pos = m.end()
        n = max([0, *cos, *sin])
        return cls(
            offset,
            tuple(cos.get(j, 0.0) for j in range(1, n + 1)),
            tuple(sin.get(j, 0.0) for j in range(1, n + 1)),
        )

    def expr(self) -> str:
        parts = [repr(self.offset)]
        for j, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
            h = "" if j == 1 else str(j)
            for coef, fn in ((a, "cos"), (b, "sin")):
                if coef:
                    parts.append(f"{'-' if coef < 0 else '+'}{abs(coef)!r}{fn}{h}")
        return "".join(parts)

    @property
    def is_constant(self) -> bool:
        return not self.cos

    def __call__(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = np.full(u.shape, self.offset)
        for j, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
            arg = 2.0 * np.pi * j * u
            if a:
                out = out + a * np.cos(arg)
            if b:
                out = out + b * np.sin(arg)
        return out

    def derivative(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = np.zeros(u.shape)
        for j, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
            w = 2.0 * np.pi * j
            arg = w * u
            if a:
                out = out - a * w * np.sin(arg)
            if b:
                out = out + b * w * np.cos(arg)
        return out

    def minimum_bound(self) -> float:
        return self.offset - sum(math.hypot(a, b) for a, b in zip(self.cos, self.sin))

    def maximum_bound(self) -> float:
        return self.offset + sum(math.hypot(a, b) for a, b in zip(self.cos, self.sin))

    def mean(self) -> float:
        return self.offset

    def mean_reciprocal(self) -> float:
        """``int_0^1 du / g(u)``; closed form only for a single harmonic."""
        active = [(a, b) for a, b in zip(self.cos, self.sin) if a or b]
        if not active:
            return 1.0 / self.offset
        if len(active) == 1:
            r = math.hypot(*active[0])
            return 1.0 / math.sqrt((self.offset - r) * (self.offset + r))
        raise EstimateOnly(f"no closed form for the mean of 1/({self.expr()})")

    def arrays(self) -> tuple[float, np.ndarray, np.ndarray]:
        return (
            self.offset,
            np.array(self.cos, dtype=np.float64),
            np.array(self.sin, dtype=np.float64),
        )


# ---------------------------------------------------------------------------
# Single-site laws for iid families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoPoint:
    """``c = a`` with probability ``p``, else ``b``."""

    a: float
    b: float
    p: float
    name = "two-point"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise InvalidEnvironment("two-point values must be > 0")
        if not 0.0 <= self.p <= 1.0:
            raise InvalidEnvironment("two-point probability must lie in [0, 1]")

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        return np.where(u < self.p, float(self.a), float(self.b))

    def moments(self) -> tuple[float, float]:
        p, a, b = self.p, self.a, self.b
        return p * a + (1 - p) * b, p / a + (1 - p) / b

    def params(self) -> dict:
        return {"a": self.a, "b": self.b, "p": self.p}


@dataclass(frozen=True)
class Uniform:
    """Uniform on ``(lo, hi)``; ``lo = 0`` gives non-integrable resistances."""

    lo: float
    hi: float
    name = "uniform"

    def __post_init__(self):
        if not (self.lo >= 0 and self.hi > self.lo):
            raise InvalidEnvironment("uniform conductances need 0 <= lo < hi")

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * u

    def moments(self) -> tuple[float, float]:
        lo, hi = self.lo, self.hi
        inv = math.inf if lo == 0 else math.log(hi / lo) / (hi - lo)
        return 0.5 * (lo + hi), inv

    def params(self) -> dict:
        return {"lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class ParetoLike:
    """``c = U^(1/exponent)`` so resistances satisfy ``P(1/c > x) = x^-exponent``."""

    exponent: float
    name = "pareto"

    def __post_init__(self):
        if not self.exponent > 0:
            raise InvalidEnvironment("pareto exponent must be > 0")

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        return u ** (1.0 / self.exponent)

    def moments(self) -> tuple[float, float]:
        a = self.exponent
        return a / (a + 1.0), (a / (a - 1.0) if a > 1.0 else math.inf)

    def params(self) -> dict:
        return {"exponent": self.exponent}


Distribution = Union[TwoPoint, Uniform, ParetoLike]


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    value: float = 1.0
    name = "constant"

    def __post_init__(self):
        if not self.value > 0:
            raise InvalidEnvironment("constant conductance must be > 0")


@dataclass(frozen=True)
class IID:
    law: Distribution
    name = "iid"


@dataclass(frozen=True)
class Rotation:
    """``c(k) = g(phase + k*alpha mod 1)`` with ``alpha`` replaced by ``p/q``."""

    alpha: float
    profile: FourierProfile
    phase: float | None = None
    name = "rotation"

    def __post_init__(self):
        frac = Fraction(float(self.alpha) % 1.0).limit_denominator(ROTATION_MAX_DENOMINATOR)
        if frac.denominator < 2 or frac.numerator == 0:
            raise InvalidEnvironment("rotation angle must be a non-integer")
        if self.phase is not None and not 0.0 <= self.phase < 1.0:
            raise InvalidEnvironment("rotation phase must lie in [0, 1)")

    @property
    def surrogate(self) -> Fraction:
        return Fraction(float(self.alpha) % 1.0).limit_denominator(ROTATION_MAX_DENOMINATOR)


@dataclass(frozen=True)
class Markov:
    """Stationary finite-state chain ``s_k`` with ``c(k) = values[s_k]``."""

    values: tuple[float, ...]
    matrix: tuple[tuple[float, ...], ...]
    name = "markov"

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        matrix = tuple(tuple(float(x) for x in row) for row in self.matrix)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "matrix", matrix)
        n = len(values)
        if n < 1 or any(v <= 0 for v in values):
            raise InvalidEnvironment("markov values must be positive")
        P = np.array(matrix)
        if P.shape != (n, n) or (P < 0).any() or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
            raise InvalidEnvironment("markov matrix must be square, nonnegative and row-stochastic")

    def stationary(self) -> np.ndarray:
        P = np.array(self.matrix)
        n = P.shape[0]
        A = np.vstack([P.T - np.eye(n), np.ones(n)])
        rhs = np.zeros(n + 1)
        rhs[-1] = 1.0
        pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()

    def reversed_matrix(self) -> np.ndarray:
        P = np.array(self.matrix)
        pi = self.stationary()
        with np.errstate(divide="ignore", invalid="ignore"):
            R = (P.T * pi[None, :]) / pi[:, None]
        R[~np.isfinite(R)] = 0.0
        for i in range(R.shape[0]):
            if R[i].sum() == 0:
                R[i, i] = 1.0
        return R / R.sum(axis=1, keepdims=True)


Family = Union[Constant, IID, Rotation, Markov]


@nb.njit(cache=True)
def _chain(start, cum, uniforms):
    out = np.empty(uniforms.shape[0], dtype=np.int64)
    s = start
    n = cum.shape[1]
    for i in range(uniforms.shape[0]):
        row = cum[s]
        j = 0
        while j < n - 1 and uniforms[i] >= row[j]:
            j += 1
        s = j
        out[i] = s
    return out


class _MarkovPath:
    """Lazily grown state path on both sides of the origin (thread safe)."""

    def __init__(self, fam: Markov, seed: int):
        self._fwd_key = rng.derive_key(seed, rng.DOMAIN_MARKOV_FORWARD)
        self._bwd_key = rng.derive_key(seed, rng.DOMAIN_MARKOV_BACKWARD)
        self._cum_f = np.cumsum(np.array(fam.matrix), axis=1)
        self._cum_b = np.cumsum(fam.reversed_matrix(), axis=1)
        pi_cum = np.cumsum(fam.stationary())
        u0 = rng.hash_uniform(self._fwd_key, np.array([0]))[0]
        s0 = int(min(np.searchsorted(pi_cum, u0, side="right"), len(pi_cum) - 1))
        self._fwd = np.array([s0], dtype=np.int64)  # sites 0, 1, 2, ...
        self._bwd = np.empty(0, dtype=np.int64)  # sites -1, -2, ...
        self._lock = threading.Lock()

    def _grow(self, n_fwd: int, n_bwd: int):
        with self._lock:
            if n_fwd > len(self._fwd):
                n = max(n_fwd, 2 * len(self._fwd))
                idx = np.arange(len(self._fwd), n)
                u = rng.hash_uniform(self._fwd_key, idx)
                ext = _chain(self._fwd[-1], self._cum_f, u)
                self._fwd = np.concatenate([self._fwd, ext])
            if n_bwd > len(self._bwd):
                n = max(n_bwd, 2 * len(self._bwd), 16)
                idx = np.arange(len(self._bwd) + 1, n + 1)
                u = rng.hash_uniform(self._bwd_key, -idx)
                start = self._bwd[-1] if len(self._bwd) else self._fwd[0]
                ext = _chain(start, self._cum_b, u)
                self._bwd = np.concatenate([self._bwd, ext])

    def states(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        if ks.size == 0:
            return np.empty(0, dtype=np.int64)
        hi = int(ks.max())
        lo = int(ks.min())
        self._grow(hi + 1 if hi >= 0 else 0, -lo if lo < 0 else 0)
        fwd, bwd = self._fwd, self._bwd
        out = np.empty(ks.shape, dtype=np.int64)
        pos = ks >= 0
        out[pos] = fwd[ks[pos]]
        out[~pos] = bwd[-ks[~pos] - 1]
        return out


@dataclass(frozen=True)
class MediumIntegrals:
    """Means of ``c`` and ``1/c`` (or of ``gamma`` and ``1/lambda``)."""

    mean: float
    mean_inverse: float
    mean_infinite: bool
    inverse_infinite: bool
    provenance: str = "closed-form"


@dataclass(frozen=True)
class DiscreteEnvironment:
    """Edge conductances ``k -> c(T^k w)`` on Z."""

    family: Family
    seed: int = 0
    scale: float = 1.0
    offset: int = 0
    _markov: _MarkovPath | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InvalidEnvironment("scale must be a positive finite number")
        if isinstance(self.family, Markov):
            object.__setattr__(self, "_markov", _MarkovPath(self.family, self.seed))

    # -- queries ----------------------------------------------------------
    def unit_conductances(self, ks) -> np.ndarray:
        """Conductances before the global ``scale`` factor is applied."""
        ks = np.asarray(ks, dtype=np.int64) + np.int64(self.offset)
        fam = self.family
        if isinstance(fam, Constant):
            return np.full(ks.shape, float(fam.value))
        if isinstance(fam, IID):
            key = rng.derive_key(self.seed, rng.DOMAIN_ENVIRONMENT)
            return fam.law.from_uniform(rng.hash_uniform(key, ks))
        if isinstance(fam, Rotation):
            frac = fam.surrogate
            p, q = frac.numerator, frac.denominator
            r = (ks * np.int64(p)) % np.int64(q)
            theta = self.phase + r.astype(np.float64) / q
            theta = np.where(theta >= 1.0, theta - 1.0, theta)
            return fam.profile(theta)
        if isinstance(fam, Markov):
            return np.asarray(fam.values)[self._markov.states(ks)]
        raise TypeError(f"unknown family {fam!r}")

    def conductances(self, ks) -> np.ndarray:
        c = self.unit_conductances(ks)
        return c if self.scale == 1.0 else self.scale * c

    def conductance(self, k: int) -> float:
        return float(self.conductances(np.array([k]))[0])

    def cbars(self, ks) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        return self.conductances(ks) + self.conductances(ks - 1)

    def cbar(self, k: int) -> float:
        return float(self.cbars(np.array([k]))[0])

    @property
    def phase(self) -> float:
        fam = self.family
        if not isinstance(fam, Rotation):
            raise AttributeError("only rotation environments have a phase")
        if fam.phase is not None:
            return float(fam.phase)
        key = rng.derive_key(self.seed, rng.DOMAIN_PHASE)
        return float(rng.hash_uniform(key, np.array([0]))[0]) % 1.0

    # -- transformations --------------------------------------------------
    def shifted(self, j: int) -> "DiscreteEnvironment":
        """The environment seen from site ``j`` (``T^j w``)."""
        env = replace(self, offset=self.offset + int(j))
        if self._markov is not None:
            object.__setattr__(env, "_markov", self._markov)
        return env

    def scaled(self, s: float) -> "DiscreteEnvironment":
        env = replace(self, scale=self.scale * float(s))
        if self._markov is not None:
            object.__setattr__(env, "_markov", self._markov)
        return env

    # -- integrals --------------------------------------------------------
    def integrals(self) -> MediumIntegrals:
        """Closed-form ``(int c dmu, int 1/c dmu)``; raises EstimateOnly otherwise."""
        fam = self.family
        if isinstance(fam, Constant):
            m, mi = fam.value, 1.0 / fam.value
        elif isinstance(fam, IID):
            m, mi = fam.law.moments()
        elif isinstance(fam, Rotation):
            m, mi = fam.profile.mean(), fam.profile.mean_reciprocal()
        elif isinstance(fam, Markov):
            pi = fam.stationary()
            v = np.asarray(fam.values)
            m, mi = float(pi @ v), float(pi @ (1.0 / v))
        else:
            raise TypeError(f"unknown family {fam!r}")
        return MediumIntegrals(
            mean=m * self.scale,
            mean_inverse=mi / self.scale,
            mean_infinite=math.isinf(m),
            inverse_infinite=math.isinf(mi),
        )

    def describe(self) -> dict:
        fam = self.family
        d: dict = {"family": _family_tag(fam), "seed": int(self.seed)}
        if isinstance(fam, Constant):
            d["value"] = fam.value
        elif isinstance(fam, IID):
            d.update(fam.law.params())
        elif isinstance(fam, Rotation):
            frac = fam.surrogate
            d["alpha"] = float(fam.alpha)
            d["alpha_surrogate"] = f"{frac.numerator}/{frac.denominator}"
            d["profile"] = fam.profile.expr()
            if fam.phase is not None:
                d["phase"] = fam.phase
        elif isinstance(fam, Markov):
            d["values"] = list(fam.values)
            d["matrix"] = [list(r) for r in fam.matrix]
        if self.scale != 1.0:
            d["scale"] = self.scale
        if self.offset:
            d["offset"] = self.offset
        return d


def _family_tag(fam: Family) -> str:
    if isinstance(fam, IID):
        return f"iid-{fam.law.name}"
    return fam.name


@dataclass(frozen=True)
class ContinuousEnvironment:
    """Periodic flow ``x -> (lambda(T_x w), gamma(T_x w))`` with ``T_x w = w + x``."""

    lam: FourierProfile
    gam: FourierProfile = FourierProfile(1.0)
    seed: int = 0
    phase: float | None = None

    def __post_init__(self):
        if self.phase is not None and not 0.0 <= self.phase < 1.0:
            raise InvalidEnvironment("flow phase must lie in [0, 1)")

    @property
    def family(self) -> str:
        return "constant" if self.lam.is_constant and self.gam.is_constant else "rotation-flow"

    @property
    def omega(self) -> float:
        if self.phase is not None:
            return float(self.phase)
        key = rng.derive_key(self.seed, rng.DOMAIN_PHASE)
        return float(rng.hash_uniform(key, np.array([0]))[0]) % 1.0

    def lam_at(self, x):
        return self.lam(np.asarray(x, dtype=np.float64) + self.omega)

    def lam_prime_at(self, x):
        return self.lam.derivative(np.asarray(x, dtype=np.float64) + self.omega)

    def gam_at(self, x):
        return self.gam(np.asarray(x, dtype=np.float64) + self.omega)

    def integrals(self) -> MediumIntegrals:
        """``(int gamma dmu, int 1/lambda dmu)``."""
        return MediumIntegrals(
            mean=self.gam.mean(),
            mean_inverse=self.lam.mean_reciprocal(),
            mean_infinite=False,
            inverse_infinite=False,
        )

    def kernel_arrays(self) -> tuple:
        """Flat coefficient arrays for the compiled integrators."""
        lo, lc, ls = self.lam.arrays()
        go, gc, gs = self.gam.arrays()
        return self.omega, lo, lc, ls, go, gc, gs

    def describe(self) -> dict:
        d = {
            "family": self.family,
            "seed": int(self.seed),
            "lambda": self.lam.expr(),
            "gamma": self.gam.expr(),
        }
        if self.phase is not None:
            d["phase"] = self.phase
        return d


Environment = Union[DiscreteEnvironment, ContinuousEnvironment]
