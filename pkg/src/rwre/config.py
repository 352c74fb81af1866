"""Environment specifications and run configurations.

An environment can be given in three equivalent forms:

* shorthand: ``constant:1``, ``iid-two-point:1,2,0.5``, ``iid-uniform:0,1``,
  ``iid-pareto:1.5``, ``rotation:alpha=0.41421356,profile=2+cos,phase=0``,
  ``flow:lambda=2+sin,gamma=1``;
* a JSON object, e.g. the ``environment`` block of any report;
* ``@path`` naming a JSON file holding such an object.

``environment_from_dict(env.describe())`` rebuilds an equal environment.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .environment import (
    IID,
    Constant,
    ContinuousEnvironment,
    DiscreteEnvironment,
    FourierProfile,
    Markov,
    ParetoLike,
    Rotation,
    TwoPoint,
    Uniform,
)
from .errors import InvalidEnvironment

SHORTHAND_HELP = (
    "expected one of constant:VALUE, iid-two-point:A,B,P, iid-uniform:LO,HI, "
    "iid-pareto:EXPONENT, rotation:alpha=A,profile=EXPR[,phase=U], "
    "flow:lambda=EXPR[,gamma=EXPR][,phase=U], a JSON object or @file.json"
)


def _numbers(body: str, n: int, family: str) -> list[float]:
    parts = [p for p in body.split(",") if p.strip()]
    if len(parts) != n:
        raise InvalidEnvironment(f"{family} takes {n} comma-separated numbers, got {body!r}; {SHORTHAND_HELP}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise InvalidEnvironment(f"non-numeric parameter in {family}:{body}") from None


def _keywords(body: str, family: str, allowed: set[str]) -> dict[str, str]:
    out = {}
    for item in filter(None, (p.strip() for p in body.split(","))):
        if "=" not in item:
            raise InvalidEnvironment(f"{family} parameters are key=value pairs, got {item!r}")
        k, v = item.split("=", 1)
        k = k.strip()
        if k not in allowed:
            raise InvalidEnvironment(f"unknown {family} parameter {k!r}; allowed: {sorted(allowed)}")
        out[k] = v.strip()
    return out


def parse_shorthand(text: str) -> dict:
    """Turn a shorthand string into the dictionary form."""
    name, _, body = text.strip().partition(":")
    name = name.strip().lower()
    if name == "constant":
        return {"family": "constant", "value": _numbers(body or "1", 1, name)[0]}
    if name == "iid-two-point":
        a, b, p = _numbers(body, 3, name)
        return {"family": name, "a": a, "b": b, "p": p}
    if name == "iid-uniform":
        lo, hi = _numbers(body, 2, name)
        return {"family": name, "lo": lo, "hi": hi}
    if name == "iid-pareto":
        return {"family": name, "exponent": _numbers(body, 1, name)[0]}
    if name == "rotation":
        kw = _keywords(body, name, {"alpha", "profile", "phase"})
        if "alpha" not in kw or "profile" not in kw:
            raise InvalidEnvironment("rotation needs alpha=... and profile=...")
        d: dict = {"family": name, "alpha": float(kw["alpha"]), "profile": kw["profile"]}
        if "phase" in kw:
            d["phase"] = float(kw["phase"])
        return d
    if name == "flow":
        kw = _keywords(body, name, {"lambda", "gamma", "phase"})
        if "lambda" not in kw:
            raise InvalidEnvironment("flow needs lambda=... (and optionally gamma=..., phase=...)")
        d = {"family": name, "lambda": kw["lambda"], "gamma": kw.get("gamma", "1")}
        if "phase" in kw:
            d["phase"] = float(kw["phase"])
        return d
    if name == "markov":
        raise InvalidEnvironment("markov environments are given as JSON: "
                                 '{"family": "markov", "values": [...], "matrix": [[...], ...]}')
    raise InvalidEnvironment(f"unknown environment {text!r}; {SHORTHAND_HELP}")


def parse_environment_spec(spec: str | dict) -> dict:
    """Normalise a shorthand string, JSON text, ``@file`` or dict to a dict."""
    if isinstance(spec, dict):
        return dict(spec)
    text = spec.strip()
    if text.startswith("@"):
        path = Path(text[1:])
        try:
            text = path.read_text(encoding="utf-8").strip()
        except OSError as exc:
            raise InvalidEnvironment(f"cannot read environment file {path}: {exc.strerror}") from None
    if text.startswith("{"):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidEnvironment(f"environment JSON is malformed: {exc.msg}") from None
        if not isinstance(d, dict) or "family" not in d:
            raise InvalidEnvironment("environment JSON must be an object with a 'family' key")
        return d
    return parse_shorthand(text)


def environment_from_dict(d: dict, seed: int | None = None):
    """Build an environment; ``seed`` (if given) overrides the one in ``d``."""
    d = dict(d)
    fam = str(d.get("family", "")).lower()
    s = int(seed if seed is not None else d.get("seed", 0))
    try:
        if "lambda" in d or fam in ("flow", "rotation-flow"):
            return ContinuousEnvironment(
                FourierProfile.parse(d["lambda"]),
                FourierProfile.parse(d.get("gamma", "1")),
                seed=s,
                phase=None if d.get("phase") is None else float(d["phase"]),
            )
        if fam == "constant":
            family: Any = Constant(float(d.get("value", 1.0)))
        elif fam == "iid-two-point":
            family = IID(TwoPoint(float(d["a"]), float(d["b"]), float(d["p"])))
        elif fam == "iid-uniform":
            family = IID(Uniform(float(d["lo"]), float(d["hi"])))
        elif fam == "iid-pareto":
            family = IID(ParetoLike(float(d["exponent"])))
        elif fam == "rotation":
            family = Rotation(
                float(d["alpha"]),
                FourierProfile.parse(d["profile"]),
                None if d.get("phase") is None else float(d["phase"]),
            )
        elif fam == "markov":
            family = Markov(tuple(d["values"]), tuple(tuple(r) for r in d["matrix"]))
        else:
            raise InvalidEnvironment(f"unknown environment family {fam!r}; {SHORTHAND_HELP}")
    except KeyError as exc:
        raise InvalidEnvironment(f"environment {fam!r} is missing parameter {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidEnvironment):
            raise
        raise InvalidEnvironment(f"bad parameter for environment {fam!r}: {exc}") from None
    return DiscreteEnvironment(
        family,
        seed=s,
        scale=float(d.get("scale", 1.0)),
        offset=int(d.get("offset", 0)),
    )


def load_environment(spec: str | dict, seed: int | None = None):
    return environment_from_dict(parse_environment_spec(spec), seed)


def json_safe(obj):
    """Replace non-finite floats by strings so reports stay valid JSON."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return json_safe(obj.item())
    return obj


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(json_safe(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


@dataclass
class RunConfig:
    """Everything that determines a run's output.

    ``threads`` and ``out`` are part of the configuration but are left out of
    :meth:`echo`, the copy written into reports, because they do not affect
    the numbers and reports must not depend on them.
    """

    subcommand: str
    environment: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    out: str | None = None
    tolerances: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {"subcommand", "environment", "params", "seed", "threads", "out", "tolerances"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def echo(self) -> dict:
        d = self.to_dict()
        d.pop("threads")
        d.pop("out")
        return d
