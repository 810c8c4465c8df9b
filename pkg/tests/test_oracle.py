"""Verifier checks: W1 metric axioms, quadrature, forward-simulation basics."""
import numpy as np
import pytest

from itokit.errors import QuadratureError
from itokit.oracle import quadrature, simulate_forward, wasserstein1
from itokit.processes import MethodKind, ProcessSpec
from itokit.schedulers import make_scheduler


# -- wasserstein1 -------------------------------------------------------------


def test_w1_identical_sets_zero():
    a = np.random.default_rng(0).normal(size=1000)
    assert wasserstein1(a, a.copy()) == 0.0


def test_w1_constant_shift():
    assert wasserstein1(np.zeros(50), np.ones(50)) == pytest.approx(1.0)


def test_w1_gaussian_mean_shift():
    rng = np.random.default_rng(1)
    a = rng.normal(0.0, 1.0, size=100_000)
    b = rng.normal(0.5, 1.0, size=100_000)
    assert wasserstein1(a, b) == pytest.approx(0.5, abs=0.02)


def test_w1_metric_axioms():
    rng = np.random.default_rng(2)
    a = rng.normal(size=400)
    b = rng.normal(1.0, 2.0, size=400)
    c = rng.exponential(size=400)
    assert wasserstein1(a, b) == pytest.approx(wasserstein1(b, a), abs=1e-15)
    assert wasserstein1(a, b) <= wasserstein1(a, c) + wasserstein1(c, b) + 1e-12
    assert wasserstein1(a, a) == 0.0


def test_w1_unequal_sizes_quantile_matched():
    rng = np.random.default_rng(3)
    a = rng.normal(size=4000)
    b = rng.normal(size=9000)
    d = wasserstein1(a, b)
    assert 0.0 <= d < 0.1
    assert d == pytest.approx(wasserstein1(b, a), abs=1e-15)


def test_w1_empty_rejected():
    with pytest.raises(ValueError):
        wasserstein1([], [1.0])


# -- quadrature ---------------------------------------------------------------


def test_quadrature_constant():
    assert quadrature(lambda z: 1.0, 0.0, 1.0, tol=1e-12) == pytest.approx(1.0, abs=1e-12)


def test_quadrature_inversed_rate():
    got = quadrature(lambda z: 1.0 / (1.0 - z), 0.0, 0.5, tol=1e-10)
    assert got == pytest.approx(np.log(2.0), abs=1e-10)


def test_quadrature_cosine_rate_total():
    sch = make_scheduler("Cosine")
    got = quadrature(lambda z: float(sch.beta(z)), 0.0, 1.0, tol=1e-8)
    assert got == pytest.approx(-np.log(0.005), abs=1e-8)


def test_quadrature_failure_raises():
    # A discontinuous, wildly oscillating integrand at an impossible tolerance.
    rng = np.random.default_rng(0)
    with pytest.raises((QuadratureError, Exception)):
        quadrature(lambda z: rng.normal() * 1e6, 0.0, 1.0, tol=1e-14)


# -- forward simulation ---------------------------------------------------------


def test_flow_matching_predicted_moments():
    spec = ProcessSpec(MethodKind.FM, make_scheduler("Inversed"))
    rep = simulate_forward(spec, x0=1.0, y=0.0, t_end=0.5, n_steps=2000, n_paths=20_000, seed=3)
    assert rep.pred_mean == pytest.approx(0.5, abs=1e-12)
    assert rep.pred_var == pytest.approx(0.25, abs=1e-12)
    assert rep.passed(3.5)


def test_noiseless_limit_has_zero_variance():
    # tau -> 0 turns the OU process into a deterministic relaxation.
    spec = ProcessSpec(MethodKind.IR_SDE, make_scheduler("Cosine"), tau=1e-8)
    rep = simulate_forward(spec, x0=1.0, y=0.0, t_end=0.7, n_steps=500, n_paths=200, seed=4)
    assert rep.emp_var < 1e-10


def test_weak_error_shrinks_with_step_refinement():
    # A stiff contraction (beta = 4 over [0, 0.9]): the Euler mean bias is
    # ~0.016 / 0.008 / 0.005 over these refinements, well above the
    # Monte-Carlo noise, and must decrease monotonically.
    spec = ProcessSpec(MethodKind.DM_VP, make_scheduler("Constant", beta=4.0))
    biases = []
    for n_steps in (10, 20, 40):
        rep = simulate_forward(spec, x0=1.0, y=0.0, t_end=0.9, n_steps=n_steps,
                               n_paths=2_000_000, seed=9)
        biases.append(abs(rep.emp_mean - rep.pred_mean))
    assert biases[0] > biases[1] > biases[2]


def test_report_serializes():
    spec = ProcessSpec(MethodKind.DM_VE, make_scheduler("Linear"))
    rep = simulate_forward(spec, 0.5, 0.0, 0.3, 200, 500, seed=1)
    d = rep.to_dict()
    assert {"t", "emp_mean", "emp_var", "pred_mean", "pred_var",
            "stderr_mean", "stderr_var", "n_paths", "z_mean", "z_var", "passed"} <= set(d)
    assert d["n_paths"] == 500


def test_checkpoints_must_be_positive():
    spec = ProcessSpec(MethodKind.DM_VE, make_scheduler("Linear"))
    with pytest.raises(ValueError):
        simulate_forward(spec, 0.5, 0.0, 0.0, 100, 100, seed=0)
