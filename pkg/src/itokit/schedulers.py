"""Closed-form noise schedulers.

A scheduler is a positive rate function ``beta(t)`` on [0, 1] together with
its exact integral ``alpha(s, t) = int_s^t beta(z) dz`` and the induced decay
factor ``phi(s, t) = exp(-alpha(s, t))``.  All three are evaluated in closed
form; no discrete lookup tables are built, so any time point (and any number
of sampling steps) is admissible without recomputing anything.

Implemented families:

* ``Linear(beta_min, beta_max)``      beta rises linearly between the bounds.
* ``Cosine(eps, delta)``              squared-cosine profile; the integral has
                                      an analytic antiderivative, and
                                      ``alpha(0, 1) = -log(delta)`` exactly.
* ``Exponential(eta_min, eta_max, p)``  controls the decay range through
                                      ``eta``; ``beta`` is obtained by
                                      differentiating the closed-form integral.
* ``Inversed()``                      ``beta = 1/(1-t)`` so that
                                      ``phi(0, t) = 1 - t``; domain [0, 1).
* ``QuadraticSymmetric(beta_min, beta_max)``  rate symmetric about t = 1/2.
* ``Constant(beta)``                  fixed rate.

Functions accept scalar or ndarray time arguments and are pure, so instances
are safe to share across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np

from .errors import SchedulerDomainError, TimeOrderError

__all__ = [
    "Scheduler",
    "LinearScheduler",
    "CosineScheduler",
    "ExponentialScheduler",
    "InversedScheduler",
    "QuadraticSymmetricScheduler",
    "ConstantScheduler",
    "make_scheduler",
    "SCHEDULER_KINDS",
]


@dataclass(frozen=True)
class Scheduler:
    """Base class; concrete families implement ``beta`` and ``alpha``."""

    #: True when the domain excludes t = 1 (Inversed only).
    open_end = False

    @property
    def kind(self) -> str:
        return type(self).__name__.removesuffix("Scheduler")

    def config(self) -> dict:
        out = {"kind": self.kind}
        out.update({f.name: float(getattr(self, f.name)) for f in fields(self)})
        return out

    # -- domain checks -------------------------------------------------

    def _check_time(self, t, name: str = "t") -> None:
        t = np.asarray(t)
        hi_ok = np.all(t < 1.0) if self.open_end else np.all(t <= 1.0)
        if not (np.all(t >= 0.0) and hi_ok):
            domain = "[0, 1)" if self.open_end else "[0, 1]"
            raise SchedulerDomainError(f"{name}={t} outside scheduler domain {domain}")

    def _check_pair(self, s, t) -> None:
        self._check_time(s, "s")
        self._check_time(t, "t")
        if np.any(np.asarray(s) > np.asarray(t)):
            raise TimeOrderError(f"need s <= t, got s={s}, t={t}")

    # -- interface -----------------------------------------------------

    def beta(self, t):
        raise NotImplementedError

    def alpha(self, s, t):
        raise NotImplementedError

    def phi(self, s, t):
        """Decay factor exp(-alpha(s, t)); lies in (0, 1] for s <= t."""
        return np.exp(-self.alpha(s, t))


@dataclass(frozen=True)
class LinearScheduler(Scheduler):
    beta_min: float = 0.1
    beta_max: float = 20.0

    def __post_init__(self):
        if not (self.beta_min > 0 and self.beta_max >= self.beta_min):
            raise ValueError("need 0 < beta_min <= beta_max")

    def beta(self, t):
        self._check_time(t)
        return (self.beta_max - self.beta_min) * np.asarray(t, dtype=float) + self.beta_min

    def alpha(self, s, t):
        self._check_pair(s, t)
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return 0.5 * (self.beta_max - self.beta_min) * (t * t - s * s) + self.beta_min * (t - s)


@dataclass(frozen=True)
class CosineScheduler(Scheduler):
    """Squared-cosine rate profile.

    ``eps`` shifts the cosine argument away from the axis endpoints and
    ``delta`` fixes the total decay: phi(0, 1) = delta exactly.
    """

    eps: float = 0.008
    delta: float = 0.005

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("need eps > 0")
        if not 0 < self.delta < 1:
            raise ValueError("need delta in (0, 1)")
        object.__setattr__(self, "_g0", self._g(0.0))
        object.__setattr__(self, "_F01", self._F(0.0, 1.0))
        object.__setattr__(self, "_scale", -math.log(self.delta))

    def _g(self, t):
        return np.cos((np.asarray(t, dtype=float) + self.eps) / (1 + self.eps) * (np.pi / 2)) ** 2

    def _h(self, t):
        return np.sin((np.asarray(t, dtype=float) + self.eps) / (1 + self.eps) * np.pi)

    def _f(self, t):
        return 1.0 - self._g(t) / self._g0

    def _F(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return (t - s) + ((s - t) * np.pi + (1 + self.eps) * (self._h(s) - self._h(t))) / (
            2 * np.pi * self._g0
        )

    def internals(self) -> dict[str, Callable]:
        """Diagnostics accessor for the intermediate functions (tests only)."""
        return {"g": self._g, "h": self._h, "f": self._f, "F": self._F}

    def beta(self, t):
        self._check_time(t)
        return self._scale * self._f(t) / self._F01

    def alpha(self, s, t):
        self._check_pair(s, t)
        return self._scale * self._F(s, t) / self._F01


@dataclass(frozen=True)
class ExponentialScheduler(Scheduler):
    """Decay-range scheduler.

    The integral is the primary closed form here,

        alpha(s, t) = log((1 - E(s)) / (1 - E(t))),
        E(t) = eta_min^2 * (eta_max / eta_min)^(2 t^p),

    and beta is its exact time derivative, beta(t) = E'(t) / (1 - E(t)).
    ``p`` controls how fast E sweeps from eta_min^2 to eta_max^2.
    """

    eta_min: float = 0.1
    eta_max: float = 0.9
    p: float = 1.0

    def __post_init__(self):
        if not (0 < self.eta_min < self.eta_max < 1):
            raise ValueError("need 0 < eta_min < eta_max < 1")
        if not self.p > 0:
            raise ValueError("need p > 0")
        object.__setattr__(self, "_log_ratio", math.log(self.eta_max / self.eta_min))

    def _E(self, t):
        t = np.asarray(t, dtype=float)
        return self.eta_min**2 * np.exp(2.0 * self._log_ratio * t**self.p)

    def beta(self, t):
        self._check_time(t)
        t = np.asarray(t, dtype=float)
        E = self._E(t)
        dE = 2.0 * self.p * self._log_ratio * t ** (self.p - 1.0) * E
        return dE / (1.0 - E)

    def alpha(self, s, t):
        self._check_pair(s, t)
        return np.log((1.0 - self._E(s)) / (1.0 - self._E(t)))


@dataclass(frozen=True)
class InversedScheduler(Scheduler):
    """beta = 1/(1-t), so phi(0, t) = 1 - t: the linear-interpolation schedule.

    The rate diverges at t = 1; the domain is [0, 1) and callers are expected
    to clamp their queries (the convention elsewhere in the toolkit is
    t <= 1 - 1e-4).
    """

    open_end = True

    def beta(self, t):
        self._check_time(t)
        return 1.0 / (1.0 - np.asarray(t, dtype=float))

    def alpha(self, s, t):
        self._check_pair(s, t)
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.log((1.0 - s) / (1.0 - t))

    def phi(self, s, t):
        self._check_pair(s, t)
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return (1.0 - t) / (1.0 - s)


@dataclass(frozen=True)
class QuadraticSymmetricScheduler(Scheduler):
    """Rate symmetric about t = 1/2; beta = ((a)(1/2 - |1/2 - t|) + b)^2
    with a = sqrt(beta_max) - sqrt(beta_min), b = sqrt(beta_min)."""

    beta_min: float = 0.1
    beta_max: float = 20.0

    def __post_init__(self):
        if not (self.beta_min > 0 and self.beta_max >= self.beta_min):
            raise ValueError("need 0 < beta_min <= beta_max")
        a = math.sqrt(self.beta_max) - math.sqrt(self.beta_min)
        b = math.sqrt(self.beta_min)
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_b", b)
        # Continuity constant so the two antiderivative pieces join at 1/2.
        object.__setattr__(self, "_join", self._piece1(0.5) - self._piece2(0.5))

    def _piece1(self, t):
        a, b = self._a, self._b
        t = np.asarray(t, dtype=float)
        return a * a * t**3 / 3.0 + a * b * t**2 + b * b * t

    def _piece2(self, t):
        a, b = self._a, self._b
        t = np.asarray(t, dtype=float)
        return a * a * (t - t**2 + t**3 / 3.0) + a * b * (2.0 * t - t**2) + b * b * t

    def _antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0.5, self._piece1(t), self._piece2(t) + self._join)

    def beta(self, t):
        self._check_time(t)
        t = np.asarray(t, dtype=float)
        return (self._a * (0.5 - np.abs(0.5 - t)) + self._b) ** 2

    def alpha(self, s, t):
        self._check_pair(s, t)
        return self._antiderivative(t) - self._antiderivative(s)


@dataclass(frozen=True)
class ConstantScheduler(Scheduler):
    beta_const: float = 1.0

    def __post_init__(self):
        if not self.beta_const > 0:
            raise ValueError("need beta > 0")

    def config(self) -> dict:
        return {"kind": self.kind, "beta": float(self.beta_const)}

    def beta(self, t):
        self._check_time(t)
        return np.full_like(np.asarray(t, dtype=float), self.beta_const)[()]

    def alpha(self, s, t):
        self._check_pair(s, t)
        return self.beta_const * (np.asarray(t, dtype=float) - np.asarray(s, dtype=float))


SCHEDULER_KINDS = {
    "Linear": LinearScheduler,
    "Cosine": CosineScheduler,
    "Exponential": ExponentialScheduler,
    "Inversed": InversedScheduler,
    "QuadraticSymmetric": QuadraticSymmetricScheduler,
    "Constant": ConstantScheduler,
}

_PARAM_ALIASES = {"beta": "beta_const"}


def make_scheduler(kind: str, **params) -> Scheduler:
    """Construct a scheduler from its serialized name and parameters."""
    if kind not in SCHEDULER_KINDS:
        raise ValueError(f"unknown scheduler kind {kind!r}; expected one of {sorted(SCHEDULER_KINDS)}")
    params = {_PARAM_ALIASES.get(k, k): v for k, v in params.items()}
    return SCHEDULER_KINDS[kind](**params)
