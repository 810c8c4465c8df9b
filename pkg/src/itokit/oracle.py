"""Independent brute-force verifiers.

Nothing in this module is used by the samplers or the process definitions;
it exists so that closed-form claims can be checked against a second route:

* ``simulate_forward`` integrates the forward SDE with fine-step
  Euler-Maruyama, touching only ``drift`` and ``diffusion_sq`` (never the
  kernel), and compares empirical moments against the kernel prediction;
* ``wasserstein1`` measures distances between 1-D sample sets;
* ``quadrature`` integrates scheduler rates numerically to validate the
  closed-form integrals.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from . import rng as streams
from .errors import QuadratureError
from .processes import ProcessSpec

__all__ = ["MomentReport", "simulate_forward", "simulate_forward_checkpoints", "wasserstein1", "quadrature"]


@dataclass(frozen=True)
class MomentReport:
    """Empirical vs predicted first two moments of x_t, with standard errors."""

    t: float
    emp_mean: float
    emp_var: float
    pred_mean: float
    pred_var: float
    stderr_mean: float
    stderr_var: float
    n_paths: int

    @property
    def z_mean(self) -> float:
        return abs(self.emp_mean - self.pred_mean) / self.stderr_mean

    @property
    def z_var(self) -> float:
        return abs(self.emp_var - self.pred_var) / self.stderr_var

    def passed(self, n_sigma: float = 3.0) -> bool:
        return self.z_mean < n_sigma and self.z_var < n_sigma

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(z_mean=self.z_mean, z_var=self.z_var, passed=self.passed())
        return out


def _checkpoint_grid(t_checks: list[float], n_steps: int) -> tuple[np.ndarray, list[int]]:
    """Uniform-rate grid over [0, max(t_checks)] that hits every checkpoint exactly."""
    knots = [0.0] + list(t_checks)
    total = knots[-1]
    pieces = [np.array([0.0])]
    for lo, hi in zip(knots[:-1], knots[1:]):
        n_seg = max(1, round(n_steps * (hi - lo) / total))
        pieces.append(np.linspace(lo, hi, n_seg + 1)[1:])
    grid = np.concatenate(pieces)
    idx = [int(np.searchsorted(grid, tc)) for tc in t_checks]
    return grid, idx


def simulate_forward_checkpoints(
    spec: ProcessSpec,
    x0: float,
    y: float,
    t_checks: list[float],
    n_steps: int,
    n_paths: int,
    seed: int,
) -> list[MomentReport]:
    """Euler-Maruyama forward integration, reporting moments at each checkpoint.

    Scalar state; the step budget is spread uniformly over [0, max(t_checks)]
    so checkpoint times are hit exactly.  Noise is drawn per step from a
    keyed stream, making the run reproducible irrespective of how callers
    schedule whole simulations.
    """
    t_checks = sorted(float(t) for t in t_checks)
    if not t_checks or t_checks[0] <= 0.0:
        raise ValueError("checkpoints must be positive times")
    grid, check_idx = _checkpoint_grid(t_checks, n_steps)
    x = np.full(n_paths, float(x0))
    reports: list[MomentReport] = []
    targets = dict(zip(check_idx, t_checks))
    for j in range(1, len(grid)):
        t_prev = grid[j - 1]
        h = grid[j] - t_prev
        gen = streams.substream(seed, streams.FORWARD_SIM, j)
        xi = gen.standard_normal(n_paths)
        x = x + spec.drift(x, t_prev, y) * h + np.sqrt(spec.diffusion_sq(t_prev) * h) * xi
        if j in targets:
            reports.append(_moment_report(spec, x, x0, y, targets[j]))
    return reports


def _moment_report(spec: ProcessSpec, x: np.ndarray, x0: float, y: float, t: float) -> MomentReport:
    n = x.size
    emp_mean = float(np.mean(x))
    emp_var = float(np.var(x, ddof=1))
    k = spec.kernel(t)
    stderr_mean = float(np.std(x, ddof=1) / np.sqrt(n))
    # Gaussian approximation; adequate for the 3-sigma gates used throughout.
    stderr_var = float(emp_var * np.sqrt(2.0 / (n - 1)))
    return MomentReport(
        t=float(t),
        emp_mean=emp_mean,
        emp_var=emp_var,
        pred_mean=float(k.a * x0 + k.b * y),
        pred_var=float(k.var),
        stderr_mean=stderr_mean,
        stderr_var=stderr_var,
        n_paths=n,
    )


def simulate_forward(
    spec: ProcessSpec,
    x0: float,
    y: float,
    t_end: float,
    n_steps: int,
    n_paths: int,
    seed: int,
) -> MomentReport:
    """Moments of the forward SDE at a single end time (see checkpoints variant)."""
    return simulate_forward_checkpoints(spec, x0, y, [t_end], n_steps, n_paths, seed)[0]


def wasserstein1(a, b) -> float:
    """W1 distance between two 1-D empirical sample sets.

    For equal sizes this is the mean absolute difference of the sorted
    samples (exact).  Unequal sizes are reduced to the smaller size by
    evaluating both empirical quantile functions at mid-point probabilities.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample set")
    if a.size != b.size:
        k = min(a.size, b.size)
        probs = (np.arange(k) + 0.5) / k
        a = np.quantile(a, probs)
        b = np.quantile(b, probs)
    return float(np.mean(np.abs(a - b)))


def quadrature(f, s: float, t: float, tol: float = 1e-10) -> float:
    """Adaptive numerical integral of ``f`` over [s, t] to absolute tolerance ``tol``."""
    value, err = integrate.quad(f, s, t, epsabs=tol * 0.1, epsrel=1e-12, limit=500)
    if err > max(tol, abs(value) * 1e-12):
        raise QuadratureError(f"estimated error {err:.3e} exceeds tolerance {tol:.3e}")
    return value
