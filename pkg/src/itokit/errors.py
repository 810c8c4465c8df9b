"""Exception hierarchy shared across the toolkit."""


class ItokitError(Exception):
    """Base class for all toolkit errors."""


class SchedulerDomainError(ItokitError, ValueError):
    """Time argument outside the scheduler's domain."""


class TimeOrderError(ItokitError, ValueError):
    """Interval endpoints violate the required ordering (s <= t)."""


class SingularTimeError(ItokitError, ValueError):
    """Bridge drift queried at (or too close to) the pinned terminal time."""


class DegenerateKernelError(ItokitError, ValueError):
    """Kernel has zero variance (or zero data coefficient) where a positive one is required."""


class QuadratureError(ItokitError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class SamplerError(ItokitError, RuntimeError):
    """A reverse-time integration step produced an invalid state."""

    def __init__(self, message: str, path: int | None = None, step: int | None = None):
        super().__init__(message)
        self.path = path
        self.step = step


class TrainingDivergedError(ItokitError, RuntimeError):
    """Training loss exceeded the divergence threshold."""

    def __init__(self, message: str, step: int | None = None, last_net=None, curve=None):
        super().__init__(message)
        self.step = step
        self.last_net = last_net
        self.curve = curve


class ConfigError(ItokitError, ValueError):
    """Invalid experiment configuration; carries the offending key path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
