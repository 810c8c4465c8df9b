"""itokit: continuous-time stochastic restoration processes at desk scale.

A single linear-SDE family covers unconditional diffusions, mean-reverting
processes, and bridges; schedulers, time grids, and reverse-time integrators
plug in orthogonally.  Closed forms are verified against brute-force oracles
(forward Euler-Maruyama simulation, quadrature, empirical W1) on analytic
Gaussian-mixture worlds.
"""
from .errors import (
    ConfigError,
    DegenerateKernelError,
    ItokitError,
    QuadratureError,
    SamplerError,
    SchedulerDomainError,
    SingularTimeError,
    TimeOrderError,
    TrainingDivergedError,
)
from .nnscore import Mlp, TrainConfig, load_weights, save_weights, train
from .oracle import MomentReport, quadrature, simulate_forward, simulate_forward_checkpoints, wasserstein1
from .processes import (
    BRIDGE_METHODS,
    OU_METHODS,
    UNCONDITIONAL_METHODS,
    BaseDist,
    KernelCoeffs,
    MethodKind,
    ProcessSpec,
)
from .samplers import (
    CollinearitySeries,
    ReverseConfig,
    SamplerKind,
    TimeGrid,
    TrajectoryBatch,
    ancestral_step,
    collinearity_diag,
    make_grid,
    reverse_step,
    run_reverse,
)
from .schedulers import (
    ConstantScheduler,
    CosineScheduler,
    ExponentialScheduler,
    InversedScheduler,
    LinearScheduler,
    QuadraticSymmetricScheduler,
    Scheduler,
    make_scheduler,
)
from .score import (
    Parameterization,
    ScoreField,
    eps_from_score,
    kernel_score,
    kernel_score_field,
    learned_score_field,
    score_from_eps,
    score_from_x0,
    training_target,
    x0_from_score,
)
from .toyworld import Degradation, MixtureModel, PosteriorMixture, ToyWorld, analytic_score_field, default_world

__version__ = "0.1.0"
