import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rwre.checks import catalogue
from rwre.config import RunConfig, dumps, environment_from_dict, load_environment, parse_shorthand
from rwre.environment import ContinuousEnvironment, DiscreteEnvironment
from rwre.errors import InvalidEnvironment


def test_shorthand():
    assert parse_shorthand("constant:1") == {"family": "constant", "value": 1.0}
    assert parse_shorthand("iid-two-point:1,2,0.5") == {"family": "iid-two-point", "a": 1.0, "b": 2.0, "p": 0.5}
    assert parse_shorthand("iid-pareto:1.5")["exponent"] == 1.5
    d = parse_shorthand("rotation:alpha=0.25,profile=2+cos,phase=0.1")
    assert d == {"family": "rotation", "alpha": 0.25, "profile": "2+cos", "phase": 0.1}
    assert parse_shorthand("flow:lambda=2+sin")["gamma"] == "1"


@pytest.mark.parametrize("bad", ["gaussian:1", "iid-two-point:1,2", "rotation:alpha=0.3",
                                 "iid-uniform:a,b", "flow:gamma=2", "constant:-1", "markov"])
def test_bad_specs(bad):
    with pytest.raises(InvalidEnvironment):
        load_environment(bad)


@pytest.mark.parametrize("name", list(catalogue()))
def test_describe_round_trip(name):
    env = catalogue(7)[name]
    back = environment_from_dict(json.loads(dumps(env.describe())))
    ks = np.arange(-200, 200)
    assert back.describe() == env.describe()
    assert np.array_equal(back.conductances(ks), env.conductances(ks))


def test_flow_round_trip_and_files(tmp_path):
    env = load_environment("flow:lambda=2+sin,gamma=1+0.5cos,phase=0.3", seed=4)
    assert isinstance(env, ContinuousEnvironment)
    path = tmp_path / "env.json"
    path.write_text(dumps(env.describe()))
    back = load_environment(f"@{path}")
    assert back == env


def test_markov_json():
    env = load_environment('{"family": "markov", "values": [1, 2], "matrix": [[0.5, 0.5], [0.5, 0.5]]}', seed=2)
    assert isinstance(env, DiscreteEnvironment) and env.seed == 2


@given(st.integers(0, 2**40), st.floats(1e-3, 1e3), st.sampled_from(["walk", "ctmc"]))
def test_runconfig_round_trip(seed, tol, proc):
    cfg = RunConfig("estimate-limit", {"family": "constant", "value": 1.0},
                    {"process": proc, "steps": [1, 10]}, seed, 3, "out", {"relative": tol})
    assert RunConfig.from_json(cfg.to_json()) == cfg
    assert "threads" not in cfg.echo() and "out" not in cfg.echo()


def test_dumps_handles_infinity():
    text = dumps({"x": float("inf"), "y": [1.0, float("nan")]})
    assert json.loads(text) == {"x": "inf", "y": [1.0, "nan"]}
