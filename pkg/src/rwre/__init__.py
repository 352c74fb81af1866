"""Reversible random walks and diffusions in one-dimensional random media."""

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

__version__ = "0.1.0"
