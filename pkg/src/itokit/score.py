"""Score functions and network-output parameterizations.

The reverse SDE needs the conditional score grad_x log p_t(x | y).  A model
(or oracle) may instead supply an x0 estimate or a noise estimate; all three
representations are affinely related through the kernel coefficients
(a, b, var) and the conversions below are mutual inverses wherever var > 0
and a != 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DegenerateKernelError
from .processes import ProcessSpec

__all__ = [
    "Parameterization",
    "ScoreField",
    "kernel_score",
    "x0_from_score",
    "score_from_x0",
    "eps_from_score",
    "score_from_eps",
    "training_target",
    "kernel_score_field",
    "learned_score_field",
]


class Parameterization(str, Enum):
    SCORE = "Score"
    X0PRED = "X0Pred"
    EPSPRED = "EpsPred"

    @classmethod
    def parse(cls, name: str) -> "Parameterization":
        for p in cls:
            if p.value == name:
                return p
        raise ValueError(f"unknown parameterization {name!r}")


def _positive_var(spec: ProcessSpec, t):
    k = spec.kernel(t)
    if np.any(np.asarray(k.var) <= 0.0):
        raise DegenerateKernelError(f"kernel variance is zero at t={t}")
    return k


def kernel_score(spec: ProcessSpec, x, x0, y, t):
    """Score of the Gaussian transition kernel, grad_x log p(x_t | x0, y)."""
    k = _positive_var(spec, t)
    return (k.a * np.asarray(x0, float) + k.b * np.asarray(y, float) - np.asarray(x, float)) / k.var


def score_from_x0(spec: ProcessSpec, x, x0_hat, y, t):
    """Score implied by an x0 estimate (same algebra as ``kernel_score``)."""
    return kernel_score(spec, x, x0_hat, y, t)


def x0_from_score(spec: ProcessSpec, x, score, y, t):
    """Invert the kernel mean: x0_hat = (x + var*score - b*y) / a."""
    k = spec.kernel(t)
    if np.any(np.asarray(k.a) == 0.0):
        raise DegenerateKernelError(f"kernel data coefficient is zero at t={t}")
    return (np.asarray(x, float) + k.var * np.asarray(score, float) - k.b * np.asarray(y, float)) / k.a


def eps_from_score(spec: ProcessSpec, score, t):
    """Noise estimate from the score: eps = -sigma * score."""
    k = _positive_var(spec, t)
    return -np.sqrt(k.var) * np.asarray(score, float)


def score_from_eps(spec: ProcessSpec, eps, t):
    """Score from a noise estimate: score = -eps / sigma."""
    k = _positive_var(spec, t)
    return -np.asarray(eps, float) / np.sqrt(k.var)


def training_target(spec: ProcessSpec, x0, y, t, param: Parameterization, xt):
    """Regression target for a network evaluated at (xt, t, y)."""
    if param is Parameterization.X0PRED:
        return np.asarray(x0, float) + np.zeros_like(np.asarray(xt, float))
    if param is Parameterization.SCORE:
        return kernel_score(spec, xt, x0, y, t)
    k = _positive_var(spec, t)
    mu = k.a * np.asarray(x0, float) + k.b * np.asarray(y, float)
    return (np.asarray(xt, float) - mu) / np.sqrt(k.var)


@dataclass(frozen=True)
class ScoreField:
    """A conditional score estimate s(x, t, y), tagged with where it came from."""

    fn: Callable = field(repr=False)
    provenance: str = "Analytic"

    def __call__(self, x, t, y):
        return self.fn(x, t, y)

    # eval() kept as an alias so fields read naturally at call sites.
    eval = __call__


def kernel_score_field(spec: ProcessSpec, x0) -> ScoreField:
    """Field whose implied x0 estimate is exactly ``x0`` (oracle for tests)."""
    x0 = np.asarray(x0, dtype=float)
    return ScoreField(lambda x, t, y: kernel_score(spec, x, x0, y, t), "KernelConditional")


def learned_score_field(net, spec: ProcessSpec) -> ScoreField:
    """Field backed by a trained x0-prediction network.

    Accepts states shaped (), (n,), or (n, d) and returns a score of the
    same shape.
    """

    def fn(x, t, y):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            batch = x.reshape(1, 1)
        elif x.ndim == 1:
            batch = x[:, None]
        else:
            batch = x
        yb = np.broadcast_to(np.asarray(y, dtype=float), batch.shape)
        x0_hat = net.forward(batch, t, yb).reshape(x.shape)
        return score_from_x0(spec, x, x0_hat, y, t)

    return ScoreField(fn, "Learned")
