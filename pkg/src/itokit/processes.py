"""The unified forward-process family.

Every supported method is an instance of the linear SDE

    dx_t = f(x_t, t, y) dt + g(t) dw_t,        t in [0, 1],

conditioned on the degraded observation ``y``, and is fully described by four
ingredients: the drift ``f``, the squared diffusion ``g^2``, the Gaussian
transition kernel

    p(x_t | x_0, y) = N(a_t x_0 + b_t y, var_t I),

and the base distribution the reverse process starts from at t = 1.  The
methods fall into three families:

* unconditional diffusions (``DM_VE``, ``DM_VP``, ``FM``) whose forward law
  ignores y entirely;
* mean-reverting processes (``IR_SDE``, ``ResShift``, ``InDI``) that relax
  toward N(y, tau^2 I); and
* bridges (``BBDM``, ``DDBM_VE``, ``I2SB``, ``DDBM_VP``, ``GOUB``, ``UniDB``)
  conditioned to end at y.  ``BBDM``, ``DDBM_VE`` and ``I2SB`` are literally
  the same process (one shared code path here); they differ only in which
  scheduler they ship with.

``UniDB`` softens the terminal constraint through a penalty weight ``gamma``:
its mean-reversion strength stays finite at t = 1, so its kernel pins y only
up to O(1/gamma) terms, and the exact kernel is derived here by integrating
the drift rather than copied from a table (see ``kernel`` and
``unidb_kernel_table_variant``).  As gamma -> infinity it reduces to GOUB.

All coefficient algebra is scalar-per-coordinate (isotropic noise), so state
arrays of any shape broadcast through unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateKernelError, SingularTimeError, TimeOrderError
from .schedulers import Scheduler

__all__ = [
    "MethodKind",
    "ProcessSpec",
    "KernelCoeffs",
    "BaseDist",
    "BRIDGE_METHODS",
    "OU_METHODS",
    "UNCONDITIONAL_METHODS",
    "unidb_kernel_table_variant",
]

# Bridge drift blows up on approach to the pinned endpoint; queries are
# rejected beyond this point.
_BRIDGE_T_GUARD = 1.0 - 1e-12
# Callers of kernel()/base_dist() may pass t = 1 even for the open-ended
# Inversed scheduler; those evaluations clamp to this time.
_INVERSED_T_CLAMP = 1.0 - 1e-4


class MethodKind(str, Enum):
    DM_VE = "DM_VE"
    DM_VP = "DM_VP"
    FM = "FM"
    IR_SDE = "IR_SDE"
    RESSHIFT = "ResShift"
    INDI = "InDI"
    BBDM = "BBDM"
    DDBM_VE = "DDBM_VE"
    DDBM_VP = "DDBM_VP"
    I2SB = "I2SB"
    GOUB = "GOUB"
    UNIDB = "UniDB"

    @classmethod
    def parse(cls, name: str) -> "MethodKind":
        for m in cls:
            if m.value == name:
                return m
        raise ValueError(f"unknown method {name!r}; expected one of {[m.value for m in cls]}")


UNCONDITIONAL_METHODS = frozenset({MethodKind.DM_VE, MethodKind.DM_VP, MethodKind.FM})
OU_METHODS = frozenset({MethodKind.IR_SDE, MethodKind.RESSHIFT, MethodKind.INDI})
BRIDGE_METHODS = frozenset(
    {
        MethodKind.BBDM,
        MethodKind.DDBM_VE,
        MethodKind.I2SB,
        MethodKind.DDBM_VP,
        MethodKind.GOUB,
        MethodKind.UNIDB,
    }
)
# Methods sharing the VE-bridge definition (identical code path).
_VE_BRIDGES = frozenset({MethodKind.BBDM, MethodKind.DDBM_VE, MethodKind.I2SB})
_USES_TAU = OU_METHODS | {MethodKind.GOUB, MethodKind.UNIDB}


@dataclass(frozen=True)
class KernelCoeffs:
    """Affine transition-kernel coefficients: mean = a*x0 + b*y, variance var."""

    a: float
    b: float
    var: float


@dataclass(frozen=True)
class BaseDist:
    """Terminal law p_1(x_1 | y) that reverse sampling starts from."""

    kind: str  # "gaussian" | "dirac"
    center: str  # "zero" | "y"
    var: float = 0.0

    def sample(self, y, rng: np.random.Generator, shape=None):
        y = np.asarray(y, dtype=float)
        shape = y.shape if shape is None else shape
        loc = np.broadcast_to(y, shape).astype(float) if self.center == "y" else np.zeros(shape)
        if self.kind == "dirac":
            return loc.copy()
        return loc + np.sqrt(self.var) * rng.standard_normal(shape)


@dataclass(frozen=True)
class ProcessSpec:
    """One method instance: kind + scheduler + temperature/penalty parameters.

    ``tau`` scales the stationary (or path) noise and is meaningful only for
    the mean-reverting and OU-bridge methods; ``gamma`` is the terminal
    penalty weight and applies to UniDB alone.
    """

    method: MethodKind
    sched: Scheduler
    tau: float = 1.0
    gamma: float | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("need tau > 0")
        if self.method not in _USES_TAU and self.tau != 1.0:
            raise ValueError(f"{self.method.value} does not take a temperature; leave tau = 1")
        if self.method is MethodKind.UNIDB:
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("UniDB requires a positive gamma")
        elif self.gamma is not None:
            raise ValueError(f"{self.method.value} does not take gamma")

    # -- classification --------------------------------------------------

    @property
    def is_bridge(self) -> bool:
        return self.method in BRIDGE_METHODS

    @property
    def family(self) -> str:
        if self.method in UNCONDITIONAL_METHODS:
            return "unconditional"
        if self.method in OU_METHODS:
            return "ou"
        return "bridge"

    def default_t_max(self) -> float:
        """Largest time reverse-sampling grids should start from."""
        if self.is_bridge:
            return 1.0 - 1e-3
        if self.sched.open_end:
            return _INVERSED_T_CLAMP
        return 1.0

    # -- scheduler shorthands --------------------------------------------

    def _clamped(self, t):
        if self.sched.open_end:
            return np.minimum(np.asarray(t, dtype=float), _INVERSED_T_CLAMP)
        return t

    def _phi0(self, t):
        return self.sched.phi(0.0, t)

    def _phi1(self, t):
        return self.sched.phi(t, 1.0)

    def _unidb_shift(self) -> float:
        # Penalty offset k = (gamma tau^2)^-1 + 1; k -> 1 recovers GOUB.
        return 1.0 / (self.gamma * self.tau**2) + 1.0

    # -- forward SDE ------------------------------------------------------

    def drift(self, x, t, y):
        """Forward drift f(x, t, y); raises near t = 1 for bridges."""
        x = np.asarray(x, dtype=float)
        m = self.method
        if m is MethodKind.DM_VE:
            return np.zeros_like(x)

        beta = self.sched.beta(t)
        if m in (MethodKind.DM_VP, MethodKind.FM):
            return -beta * x

        y = np.asarray(y, dtype=float)
        if m in OU_METHODS:
            return beta * (y - x)

        if np.any(np.asarray(t) > _BRIDGE_T_GUARD):
            raise SingularTimeError(f"bridge drift queried at t={t} (pinned endpoint)")
        if m in _VE_BRIDGES:
            return beta / self.sched.alpha(t, 1.0) * (y - x)
        p1sq = self._phi1(t) ** 2
        if m is MethodKind.DDBM_VP:
            return beta * (
                2.0 * self._phi1(t) / (1.0 - p1sq) * y - (1.0 + p1sq) / (1.0 - p1sq) * x
            )
        if m is MethodKind.GOUB:
            return beta * (1.0 + p1sq) / (1.0 - p1sq) * (y - x)
        # UniDB: finite mean reversion even at t = 1.
        c = self._unidb_shift() - 1.0
        return beta * (c + 1.0 + p1sq) / (c + 1.0 - p1sq) * (y - x)

    def diffusion_sq(self, t):
        """Squared diffusion coefficient g^2(t)."""
        m = self.method
        beta = self.sched.beta(t)
        if m in (MethodKind.DM_VE, *_VE_BRIDGES):
            return beta
        if m in (MethodKind.DM_VP, MethodKind.DDBM_VP):
            return 2.0 * beta
        if m is MethodKind.FM:
            return 2.0 * (1.0 - self._phi0(t)) * beta
        if m is MethodKind.IR_SDE:
            return 2.0 * self.tau**2 * beta
        if m is MethodKind.RESSHIFT:
            return self.tau**2 * (2.0 - self._phi0(t)) * beta
        if m is MethodKind.INDI:
            return 2.0 * self.tau**2 * (1.0 - self._phi0(t)) * beta
        # GOUB and UniDB share the OU diffusion.
        return 2.0 * self.tau**2 * beta

    # -- transition kernel -------------------------------------------------

    def kernel(self, t) -> KernelCoeffs:
        """Transition-kernel coefficients at time t (t = 1 allowed)."""
        m = self.method
        t = self._clamped(t) if not self.is_bridge else t
        tau2 = self.tau**2

        if m is MethodKind.DM_VE:
            t = np.asarray(t, dtype=float)
            return KernelCoeffs(np.ones_like(t)[()], np.zeros_like(t)[()], self.sched.alpha(0.0, t))

        phi = self._phi0(t)
        if m is MethodKind.DM_VP:
            return KernelCoeffs(phi, 0.0 * phi, 1.0 - phi**2)
        if m is MethodKind.FM:
            return KernelCoeffs(phi, 0.0 * phi, (1.0 - phi) ** 2)
        if m is MethodKind.IR_SDE:
            return KernelCoeffs(phi, 1.0 - phi, tau2 * (1.0 - phi**2))
        if m is MethodKind.RESSHIFT:
            return KernelCoeffs(phi, 1.0 - phi, tau2 * (1.0 - phi))
        if m is MethodKind.INDI:
            return KernelCoeffs(phi, 1.0 - phi, tau2 * (1.0 - phi) ** 2)

        if m in _VE_BRIDGES:
            a1 = self.sched.alpha(0.0, 1.0)
            at = self.sched.alpha(0.0, t)
            at1 = self.sched.alpha(t, 1.0)
            return KernelCoeffs(at1 / a1, at / a1, at * at1 / a1)

        p1sq = self._phi1(t) ** 2
        phi1sq = self._phi0(1.0) ** 2
        if m is MethodKind.DDBM_VP:
            a = phi * (1.0 - p1sq) / (1.0 - phi1sq)
            b = self._phi1(t) * (1.0 - phi**2) / (1.0 - phi1sq)
            return KernelCoeffs(a, b, (1.0 - p1sq) * (1.0 - phi**2) / (1.0 - phi1sq))
        if m is MethodKind.GOUB:
            a = phi * (1.0 - p1sq) / (1.0 - phi1sq)
            return KernelCoeffs(a, 1.0 - a, tau2 * (1.0 - p1sq) * (1.0 - phi**2) / (1.0 - phi1sq))
        # UniDB: drift-consistent closed form with k = (gamma tau^2)^-1 + 1.
        k = self._unidb_shift()
        a = phi * (k - p1sq) / (k - phi1sq)
        return KernelCoeffs(a, 1.0 - a, tau2 * (k - p1sq) * (1.0 - phi**2) / (k - phi1sq))

    def sample_kernel(self, x0, y, t, rng: np.random.Generator):
        """Draw x_t ~ p(x_t | x0, y); deterministic given the generator state."""
        k = self.kernel(t)
        x0 = np.asarray(x0, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x0.shape, y.shape, np.shape(k.a))
        xi = rng.standard_normal(shape)
        return k.a * x0 + k.b * y + np.sqrt(k.var) * xi

    def base_dist(self) -> BaseDist:
        """Terminal law generation starts from.

        The VE diffusion's kernel is centred on x0, which is unavailable at
        generation time; its base is therefore centred on y by convention.
        """
        m = self.method
        if m is MethodKind.DM_VE:
            return BaseDist("gaussian", "y", float(self.sched.alpha(0.0, self._clamped(1.0))))
        if m in (MethodKind.DM_VP, MethodKind.FM):
            return BaseDist("gaussian", "zero", 1.0)
        if m in OU_METHODS:
            return BaseDist("gaussian", "y", self.tau**2)
        return BaseDist("dirac", "y")

    # -- conditional transitions (for ancestral stepping) -------------------

    def transition_between(self, s, t) -> tuple[float, float, float]:
        """Coefficients of p(x_t | x_s, y) = N(Phi x_s + c y, resid_var) for s < t."""
        if not np.all(np.asarray(s) < np.asarray(t)):
            raise TimeOrderError(f"need s < t, got s={s}, t={t}")
        ks = self.kernel(s)
        kt = self.kernel(t)
        if np.any(np.asarray(ks.a) == 0.0):
            raise DegenerateKernelError("transition undefined from a state with a_s = 0")
        Phi = kt.a / ks.a
        c = kt.b - Phi * ks.b
        resid_var = kt.var - Phi**2 * ks.var
        floor = -1e-12 * max(1.0, float(np.max(np.asarray(kt.var))))
        if np.any(np.asarray(resid_var) < floor):
            raise DegenerateKernelError(f"negative residual variance {resid_var} between {s} and {t}")
        resid_var = np.maximum(resid_var, 0.0)
        return Phi, c, resid_var


def unidb_kernel_table_variant(spec: ProcessSpec, t) -> KernelCoeffs:
    """Alternative UniDB kernel transcribed literally from the published table.

    Kept only so tests can demonstrate why it was rejected: its mean
    coefficient uses the denominator ``gamma^-1 + 1 + phi_1^2`` and therefore
    does not reduce to GOUB as gamma -> infinity, and forward Monte-Carlo
    simulation of the UniDB drift reproduces the drift-derived kernel used by
    ``ProcessSpec.kernel``, not this one.
    """
    if spec.method is not MethodKind.UNIDB:
        raise ValueError("table-variant kernel only applies to UniDB")
    phi = spec.sched.phi(0.0, t)
    p1sq = spec.sched.phi(t, 1.0) ** 2
    phi1sq = spec.sched.phi(0.0, 1.0) ** 2
    ginv = 1.0 / spec.gamma
    a = phi * (ginv + 1.0 - p1sq) / (ginv + 1.0 + phi1sq)
    k = spec._unidb_shift()
    var = spec.tau**2 * (k - p1sq) * (1.0 - phi**2) / (k - phi1sq)
    return KernelCoeffs(a, 1.0 - a, var)
