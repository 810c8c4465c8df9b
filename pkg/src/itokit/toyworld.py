"""Analytic desk-scale data model.

The data distribution is a 1-D Gaussian mixture and the degradation is
linear-Gaussian, ``y = c * x0 + s_y * zeta``.  Everything downstream is then
available in closed form:

* the restoration posterior p(x0 | y) is again a Gaussian mixture,
* the conditional forward marginal p_t(x_t | y) is a Gaussian mixture, so
  its score is exact, and
* the posterior p(x0 | x_t, y) has closed-form mean and variance, giving the
  Bayes-optimal x0 predictor any learned model can be measured against.

This replaces image datasets and trained backbones for verification: a
sampler run conditioned on y can be compared against exact posterior samples.

All functions broadcast elementwise, so a d-dimensional state with a
d-dimensional observation behaves as d independent copies of the same world
(the kernels are isotropic, so coordinates never mix).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .processes import ProcessSpec

__all__ = ["MixtureModel", "Degradation", "ToyWorld", "PosteriorMixture", "default_world"]

_LOG2PI = np.log(2.0 * np.pi)


def _log_normal(x, mean, var):
    return -0.5 * ((np.asarray(x) - mean) ** 2 / var + np.log(var) + _LOG2PI)


@dataclass(frozen=True)
class MixtureModel:
    """Gaussian mixture prior over clean data."""

    weights: tuple[float, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.size < 1 or len(self.means) != w.size or len(self.stds) != w.size:
            raise ValueError("weights, means and stds must have equal nonzero length")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(np.asarray(self.stds, dtype=float) <= 0):
            raise ValueError("component stds must be positive")

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.means))

    @property
    def var(self) -> float:
        w = np.asarray(self.weights)
        m = np.asarray(self.means)
        s = np.asarray(self.stds)
        return float(np.dot(w, s**2 + m**2) - self.mean**2)


@dataclass(frozen=True)
class Degradation:
    """Linear-Gaussian observation model y = scale * x0 + noise_std * zeta."""

    scale: float = 1.0
    noise_std: float = 0.8

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.noise_std == 0 and self.scale == 0:
            raise ValueError("noise-free degradation needs a nonzero scale")


@dataclass(frozen=True)
class PosteriorMixture:
    """Exact p(x0 | y): a Gaussian mixture (variances may be zero when y is noise-free)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.means))

    @property
    def var(self) -> float:
        second = np.dot(self.weights, self.variances + self.means**2)
        return float(second - self.mean**2)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(self.weights.size, size=n, p=self.weights)
        return self.means[comp] + np.sqrt(self.variances[comp]) * rng.standard_normal(n)


@dataclass(frozen=True)
class ToyWorld:
    mixture: MixtureModel
    degradation: Degradation

    # -- sampling ---------------------------------------------------------

    def sample_pair(self, rng: np.random.Generator, n: int | None = None):
        """Draw (x0, y) from the joint; scalars when n is None."""
        size = 1 if n is None else n
        mix = self.mixture
        comp = rng.choice(len(mix.weights), size=size, p=np.asarray(mix.weights))
        x0 = np.asarray(mix.means)[comp] + np.asarray(mix.stds)[comp] * rng.standard_normal(size)
        deg = self.degradation
        y = deg.scale * x0 + deg.noise_std * rng.standard_normal(size)
        if n is None:
            return float(x0[0]), float(y[0])
        return x0, y

    # -- exact posteriors ---------------------------------------------------

    def _posterior_arrays(self, y):
        """Posterior component (weights, means, variances), each (*y.shape, K).

        Vectorized over y so d-dimensional products and batched evaluations
        share one code path.
        """
        mix = self.mixture
        c, sy = self.degradation.scale, self.degradation.noise_std
        m = np.asarray(mix.means, dtype=float)
        v = np.asarray(mix.stds, dtype=float) ** 2
        w = np.asarray(mix.weights, dtype=float)
        y = np.asarray(y, dtype=float)
        if sy == 0.0:
            # y determines x0 exactly; the posterior collapses to a point.
            shape = y.shape + (1,)
            return np.ones(shape), (y / c)[..., None], np.zeros(shape)
        log_w = np.log(np.maximum(w, 1e-300)) + _log_normal(y[..., None], c * m, c**2 * v + sy**2)
        log_w = log_w - log_w.max(axis=-1, keepdims=True)
        weights = np.exp(log_w)
        weights /= weights.sum(axis=-1, keepdims=True)
        prec = 1.0 / v + c**2 / sy**2
        means = (m / v + c * y[..., None] / sy**2) / prec
        return weights, means, np.broadcast_to(1.0 / prec, means.shape)

    def posterior(self, y: float) -> PosteriorMixture:
        """Exact p(x0 | y) for a scalar observation, by conjugate update."""
        w, m, v = self._posterior_arrays(float(y))
        return PosteriorMixture(w, m, v)

    def marginal_params(self, spec: ProcessSpec, t, y):
        """Mixture parameters of the conditional forward marginal p_t(x_t | y).

        Component axis last; leading axes broadcast over (t, y).
        """
        w, m, v = self._posterior_arrays(y)
        k = spec.kernel(t)
        a = np.asarray(k.a, dtype=float)[..., None]
        b = np.asarray(k.b, dtype=float)[..., None]
        kv = np.asarray(k.var, dtype=float)[..., None]
        mu = a * m + b * np.asarray(y, dtype=float)[..., None]
        var = a**2 * v + kv
        return np.broadcast_to(w, var.shape), np.broadcast_to(mu, var.shape), var

    def marginal_score(self, spec: ProcessSpec, x, t, y):
        """Exact grad_x log p_t(x | y); arguments broadcast elementwise."""
        w, mu, var = self.marginal_params(spec, t, y)
        if np.any(var <= 0.0):
            raise ValueError("degenerate marginal: every component variance must be positive")
        x = np.asarray(x, dtype=float)
        logp = np.log(w) + _log_normal(x[..., None], mu, var)
        logp = logp - logp.max(axis=-1, keepdims=True)
        resp = np.exp(logp)
        resp /= resp.sum(axis=-1, keepdims=True)
        return np.sum(resp * (mu - x[..., None]) / var, axis=-1)

    def marginal_logpdf(self, spec: ProcessSpec, x, t, y):
        """log p_t(x | y), for finite-difference checks of the score."""
        w, mu, var = self.marginal_params(spec, t, y)
        x = np.asarray(x, dtype=float)
        logp = np.log(w) + _log_normal(x[..., None], mu, var)
        peak = logp.max(axis=-1, keepdims=True)
        return (peak + np.log(np.exp(logp - peak).sum(axis=-1, keepdims=True)))[..., 0]

    def x0_posterior_given_state(self, spec: ProcessSpec, x, t, y):
        """Mean and variance of p(x0 | x_t = x, y): the Bayes-optimal x0 estimate.

        Obtained by conditioning each posterior component on x_t and
        reweighting by how well it explains x; (x, t, y) broadcast.
        """
        w, m, v = self._posterior_arrays(y)
        k = spec.kernel(t)
        a = np.asarray(k.a, dtype=float)[..., None]
        kv = np.asarray(k.var, dtype=float)[..., None]
        x = np.asarray(x, dtype=float)[..., None]
        y = np.asarray(y, dtype=float)[..., None]
        vt = a**2 * v + kv
        logp = np.log(w) + _log_normal(x, a * m + np.asarray(k.b, dtype=float)[..., None] * y, vt)
        logp = logp - logp.max(axis=-1, keepdims=True)
        resp = np.exp(logp)
        resp /= resp.sum(axis=-1, keepdims=True)
        gain = a * v / vt
        cond_mean = m + gain * (x - a * m - np.asarray(k.b, dtype=float)[..., None] * y)
        cond_var = v * kv / vt
        mean = np.sum(resp * cond_mean, axis=-1)
        second = np.sum(resp * (cond_var + cond_mean**2), axis=-1)
        return mean, second - mean**2


def default_world() -> ToyWorld:
    """Bimodal reference world: modes at +-1, moderately noisy observation.

    Deliberately keeps the posterior p(x0 | y) two-humped for typical y, so
    mean-collapsing samplers are visibly distinguishable from exact ones.
    """
    return ToyWorld(
        MixtureModel(weights=(0.5, 0.5), means=(-1.0, 1.0), stds=(0.2, 0.2)),
        Degradation(scale=1.0, noise_std=0.8),
    )


def analytic_score_field(world: ToyWorld, spec: ProcessSpec):
    """ScoreField wrapping the exact conditional marginal score."""
    from .score import ScoreField

    return ScoreField(lambda x, t, y: world.marginal_score(spec, x, t, y), "Analytic")
