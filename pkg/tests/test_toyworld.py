"""Analytic-world checks: conjugate posteriors, exact marginal scores."""
import numpy as np
import pytest

from itokit import rng as streams
from itokit.processes import MethodKind, ProcessSpec
from itokit.schedulers import make_scheduler
from itokit.toyworld import Degradation, MixtureModel, ToyWorld, default_world


def world_with(scale=1.0, noise_std=1.0, weights=(0.5, 0.5), means=(-1.0, 1.0), stds=(0.2, 0.2)):
    return ToyWorld(MixtureModel(weights, means, stds), Degradation(scale, noise_std))


def test_single_gaussian_conjugate_update():
    w = world_with(weights=(1.0,), means=(0.0,), stds=(1.0,), scale=1.0, noise_std=1.0)
    post = w.posterior(1.0)
    assert post.means[0] == pytest.approx(0.5, abs=1e-12)
    assert post.variances[0] == pytest.approx(0.5, abs=1e-12)


def test_uninformative_observation_returns_prior():
    w = world_with(weights=(1.0,), means=(0.7,), stds=(1.3,), noise_std=1e6)
    post = w.posterior(5.0)
    assert post.weights[0] == pytest.approx(1.0)
    assert post.means[0] == pytest.approx(0.7, abs=1e-6)
    assert post.variances[0] == pytest.approx(1.3**2, rel=1e-6)


def test_symmetric_mixture_symmetric_posterior():
    w = world_with()
    post = w.posterior(0.0)
    assert post.weights[0] == pytest.approx(0.5, abs=1e-12)
    assert post.weights[1] == pytest.approx(0.5, abs=1e-12)


def test_noise_free_observation_collapses_posterior():
    w = world_with(scale=2.0, noise_std=0.0)
    post = w.posterior(1.0)
    assert post.weights.tolist() == [1.0]
    assert post.means[0] == pytest.approx(0.5)
    assert post.variances[0] == 0.0


def test_posterior_weights_normalized_for_many_observations():
    w = default_world()
    rng = np.random.default_rng(0)
    for y in rng.normal(scale=3.0, size=1000):
        post = w.posterior(float(y))
        assert abs(post.weights.sum() - 1.0) < 1e-12


def test_posterior_moments():
    w = default_world()
    post = w.posterior(0.25)
    # Monte-Carlo agreement of the mixture's own sampler.
    draws = post.sample(200_000, np.random.default_rng(1))
    assert draws.mean() == pytest.approx(post.mean, abs=4 * draws.std() / np.sqrt(draws.size))
    assert draws.var(ddof=1) == pytest.approx(post.var, rel=0.02)


def test_sample_pair_noise_free_scaling():
    w = world_with(scale=2.0, noise_std=0.0)
    x0, y = w.sample_pair(streams.substream(0, 1), 1000)
    assert np.allclose(y, 2.0 * x0)


def test_sample_pair_moments():
    w = default_world()
    n = 1_000_000
    x0, y = w.sample_pair(streams.substream(0, 2), n)
    mix = w.mixture
    se_x = np.sqrt(mix.var / n)
    assert abs(x0.mean() - mix.mean) < 4 * se_x
    var_y = w.degradation.scale**2 * mix.var + w.degradation.noise_std**2
    se_vy = var_y * np.sqrt(2.0 / (n - 1))
    assert abs(y.var(ddof=1) - var_y) < 4 * se_vy


def test_invalid_worlds_rejected():
    with pytest.raises(ValueError):
        MixtureModel((0.5, 0.4), (-1.0, 1.0), (0.2, 0.2))  # weights don't sum to 1
    with pytest.raises(ValueError):
        MixtureModel((1.0,), (0.0,), (0.0,))  # zero std
    with pytest.raises(ValueError):
        Degradation(scale=0.0, noise_std=0.0)


# -- marginal score -----------------------------------------------------------


SPECS = [
    ProcessSpec(MethodKind.DM_VP, make_scheduler("Linear")),
    ProcessSpec(MethodKind.RESSHIFT, make_scheduler("Exponential"), tau=2.0),
    ProcessSpec(MethodKind.BBDM, make_scheduler("Constant", beta=1.0)),
]


def test_single_component_score_is_linear():
    w = world_with(weights=(1.0,), means=(0.3,), stds=(0.5,))
    spec = SPECS[0]
    t, y = 0.4, 0.8
    post = w.posterior(y)
    k = spec.kernel(t)
    mu = float(k.a) * post.means[0] + float(k.b) * y
    v = float(k.a) ** 2 * post.variances[0] + float(k.var)
    for x in (-1.0, 0.2, 2.5):
        assert w.marginal_score(spec, x, t, y) == pytest.approx((mu - x) / v, rel=1e-12)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.method.value)
def test_marginal_score_matches_finite_differences(spec):
    w = default_world()
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(50):
        t = rng.uniform(0.05, 0.9)
        y = rng.normal()
        x = rng.normal(scale=1.5)
        fd = (w.marginal_logpdf(spec, x + h, t, y) - w.marginal_logpdf(spec, x - h, t, y)) / (2 * h)
        got = float(w.marginal_score(spec, x, t, y))
        assert got == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_marginal_score_near_base_distribution():
    # At t = 1 with phi_1 = delta small, the OU marginal is ~ N(y, tau^2).
    spec = ProcessSpec(MethodKind.IR_SDE, make_scheduler("Cosine"), tau=0.9)
    w = default_world()
    y = 0.4
    for x in (-0.5, 0.0, 1.2):
        got = float(w.marginal_score(spec, x, 1.0, y))
        assert got == pytest.approx((y - x) / 0.9**2, abs=0.05)


def test_marginal_reduces_to_kernel_when_posterior_is_point():
    # K=1 with noise-free degradation: marginal score equals the kernel score
    # conditioned on the (known) x0.
    from itokit.score import kernel_score

    w = world_with(weights=(1.0,), means=(0.0,), stds=(1.0,), scale=2.0, noise_std=0.0)
    spec = SPECS[0]
    y = 0.9
    x0 = y / 2.0
    for t in (0.2, 0.5, 0.8):
        for x in (-0.3, 0.4):
            assert float(w.marginal_score(spec, x, t, y)) == pytest.approx(
                float(kernel_score(spec, x, x0, y, t)), rel=1e-10)


def test_marginal_score_broadcasts_over_paths_and_dims():
    w = default_world()
    spec = SPECS[1]
    x = np.random.default_rng(0).normal(size=(7, 3))
    y = np.array([0.1, -0.2, 0.4])
    out = w.marginal_score(spec, x, 0.5, y)
    assert out.shape == (7, 3)
    # Per-coordinate independence: column j only depends on (x[:, j], y[j]).
    col = w.marginal_score(spec, x[:, 1], 0.5, float(y[1]))
    assert np.allclose(out[:, 1], col, rtol=1e-12)


def test_x0_posterior_given_state_vectorizes():
    w = default_world()
    spec = SPECS[0]
    rng = np.random.default_rng(4)
    x = rng.normal(size=100)
    t = rng.uniform(0.05, 0.95, size=100)
    y = rng.normal(size=100)
    mean, var = w.x0_posterior_given_state(spec, x, t, y)
    assert mean.shape == (100,) and var.shape == (100,)
    i = 17
    m1, v1 = w.x0_posterior_given_state(spec, float(x[i]), float(t[i]), float(y[i]))
    assert float(m1) == pytest.approx(mean[i], rel=1e-12)
    assert float(v1) == pytest.approx(var[i], rel=1e-12)
    assert np.all(var >= 0)
