"""Experiment configuration: JSON schema, validation, object construction.

Configs are plain JSON.  Validation is strict: unknown keys anywhere in the
tree are rejected with a path-qualified message, and every command re-emits
the fully resolved configuration (defaults filled in) so a run can be
reproduced from its own output.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from .errors import ConfigError
from .nnscore import TrainConfig
from .processes import MethodKind, ProcessSpec
from .samplers import ReverseConfig, SamplerKind, TimeGrid
from .schedulers import SCHEDULER_KINDS, Scheduler, make_scheduler
from .score import Parameterization
from .toyworld import Degradation, MixtureModel, ToyWorld

__all__ = ["load_config", "resolve_config", "build_experiment", "DEFAULT_CONFIG", "Experiment"]

_SCHEDULER_PARAM_KEYS = {
    "Linear": {"beta_min", "beta_max"},
    "Cosine": {"eps", "delta"},
    "Exponential": {"eta_min", "eta_max", "p"},
    "Inversed": set(),
    "QuadraticSymmetric": {"beta_min", "beta_max"},
    "Constant": {"beta"},
}

# Conventional parameter defaults per scheduler kind (the Cosine pair is the
# published stability choice; the rest are repo conventions).
SCHEDULER_DEFAULTS = {
    "Linear": {"beta_min": 0.1, "beta_max": 20.0},
    "Cosine": {"eps": 0.008, "delta": 0.005},
    "Exponential": {"eta_min": 0.1, "eta_max": 0.9, "p": 1.0},
    "Inversed": {},
    "QuadraticSymmetric": {"beta_min": 0.1, "beta_max": 20.0},
    "Constant": {"beta": 1.0},
}

# Scheduler each method originally shipped with.
ORIGINAL_SCHEDULERS = {
    "DM_VE": "Linear",
    "DM_VP": "Linear",
    "FM": "Inversed",
    "IR_SDE": "Cosine",
    "ResShift": "Exponential",
    "InDI": "Inversed",
    "BBDM": "Constant",
    "DDBM_VE": "Linear",
    "DDBM_VP": "Linear",
    "I2SB": "QuadraticSymmetric",
    "GOUB": "Cosine",
    "UniDB": "Cosine",
}

ORIGINAL_TAUS = {"IR_SDE": 0.20, "ResShift": 2.0, "InDI": 0.06, "GOUB": 0.34, "UniDB": 0.34}

DEFAULT_CONFIG: dict[str, Any] = {
    "method": "DM_VP",
    "scheduler": {"kind": "Linear", "beta_min": 0.1, "beta_max": 20.0},
    "tau": 1.0,
    "gamma": None,
    "lambda": 1.0,
    "sampler": "Ancestral",
    "parameterization": "X0Pred",
    "grid": {"kind": "Linear", "n": 100, "t_min": 1e-3, "t_max": None, "rho": 7.0},
    "world": {
        "weights": [0.5, 0.5],
        "means": [-1.0, 1.0],
        "stds": [0.2, 0.2],
        "scale": 1.0,
        "noise_std": 0.8,
    },
    "y": 0.25,
    "n_paths": 2000,
    "seed": 0,
    "score": "analytic",
    "weights_file": None,
    "train": {
        "steps": 20000,
        "batch": 128,
        "lr": 1e-3,
        "hidden": [64, 64, 64],
        "embed_width": 16,
        "resume": None,
        "start_step": 0,
    },
    "validate": {
        "matrix": "table4",
        "n_paths": 100000,
        "n_steps": 10000,
        "times": [0.1, 0.3, 0.5, 0.7, 0.9],
        "x0": 1.0,
        "y": -0.5,
    },
    "study": {
        "methods": ["InDI", "ResShift"],
        "taus": [0.06, 0.34, 2.0],
    },
    "sweep": {
        "samplers": ["Ancestral", "EulerODE", "MeanODE"],
        "nfes": [5, 35, 100],
    },
}


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc


def _reject_unknown(section: dict, allowed: set[str], path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _merge(defaults: dict, user: dict, path: str) -> dict:
    _reject_unknown(user, set(defaults), path)
    out = dict(defaults)
    for key, value in user.items():
        if isinstance(defaults.get(key), dict) and isinstance(value, dict):
            out[key] = _merge(defaults[key], value, f"{path}.{key}" if path else key)
        else:
            out[key] = value
    return out


def _require(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(path, msg)


def resolve_config(user: dict, seed_override: int | None = None) -> dict:
    """Merge user config over defaults, validate, and fill derived defaults."""
    if not isinstance(user, dict):
        raise ConfigError("config", "top level must be a JSON object")
    cfg = _merge(DEFAULT_CONFIG, user, "")
    if seed_override is not None:
        cfg["seed"] = int(seed_override)

    method = cfg["method"]
    _require(method in ORIGINAL_SCHEDULERS, "method", f"unknown method {method!r}")
    if "scheduler" not in user:
        kind = ORIGINAL_SCHEDULERS[method]
        cfg["scheduler"] = {"kind": kind, **SCHEDULER_DEFAULTS[kind]}
    else:
        sched = cfg["scheduler"]
        kind = sched.get("kind")
        _require(kind in _SCHEDULER_PARAM_KEYS, "scheduler.kind", f"unknown scheduler {kind!r}")
        _reject_unknown({k: v for k, v in sched.items() if k != "kind"},
                        _SCHEDULER_PARAM_KEYS[kind], "scheduler")
        cfg["scheduler"] = {"kind": kind, **SCHEDULER_DEFAULTS[kind],
                            **{k: v for k, v in sched.items() if k != "kind"}}

    if "tau" not in user and method in ORIGINAL_TAUS:
        cfg["tau"] = ORIGINAL_TAUS[method]
    if method == "UniDB" and cfg["gamma"] is None:
        cfg["gamma"] = 1e4

    _require(cfg["sampler"] in {k.value for k in SamplerKind}, "sampler",
             f"unknown sampler {cfg['sampler']!r}")
    _require(cfg["parameterization"] in {p.value for p in Parameterization},
             "parameterization", f"unknown parameterization {cfg['parameterization']!r}")
    _require(cfg["score"] in ("analytic", "learned"), "score", "must be 'analytic' or 'learned'")
    _require(isinstance(cfg["n_paths"], int) and cfg["n_paths"] >= 0, "n_paths",
             "must be a nonnegative integer")
    _require(isinstance(cfg["seed"], int), "seed", "must be an integer")
    _require(cfg["lambda"] >= 0, "lambda", "must be nonnegative")

    grid = cfg["grid"]
    _require(grid["kind"] in ("Linear", "Karras", "DDBM"), "grid.kind",
             f"unknown grid kind {grid['kind']!r}")
    _require(isinstance(grid["n"], int) and grid["n"] >= 2, "grid.n", "must be an integer >= 2")

    world = cfg["world"]
    _require(len(world["weights"]) == len(world["means"]) == len(world["stds"]) >= 1,
             "world", "weights/means/stds must have equal nonzero length")

    for m in cfg["study"]["methods"]:
        _require(m in ORIGINAL_SCHEDULERS, "study.methods", f"unknown method {m!r}")
    for s in cfg["sweep"]["samplers"]:
        _require(s in {k.value for k in SamplerKind}, "sweep.samplers", f"unknown sampler {s!r}")
    for n in cfg["sweep"]["nfes"]:
        _require(isinstance(n, int) and n >= 2, "sweep.nfes", "entries must be integers >= 2")
    _require(cfg["validate"]["matrix"] in ("table4", "full"), "validate.matrix",
             "must be 'table4' or 'full'")

    # Resolve the grid start time from the method when left unset.
    if grid["t_max"] is None:
        spec = _build_spec(cfg)
        grid = dict(grid)
        grid["t_max"] = spec.default_t_max()
        cfg["grid"] = grid
    return cfg


def _build_spec(cfg: dict) -> ProcessSpec:
    sched_cfg = dict(cfg["scheduler"])
    kind = sched_cfg.pop("kind")
    try:
        sched = make_scheduler(kind, **sched_cfg)
        method = MethodKind.parse(cfg["method"])
        gamma = cfg["gamma"] if cfg["gamma"] is None else float(cfg["gamma"])
        return ProcessSpec(method, sched, tau=float(cfg["tau"]), gamma=gamma)
    except (ValueError, TypeError) as exc:
        raise ConfigError("config", str(exc)) from exc


@dataclass(frozen=True)
class Experiment:
    """Everything a command needs, built from one resolved config."""

    cfg: dict
    spec: ProcessSpec
    world: ToyWorld
    grid: TimeGrid
    reverse: ReverseConfig
    y: float
    seed: int


def build_experiment(cfg: dict) -> Experiment:
    """Construct runtime objects from a resolved config dict."""
    spec = _build_spec(cfg)
    w = cfg["world"]
    try:
        world = ToyWorld(
            MixtureModel(tuple(w["weights"]), tuple(w["means"]), tuple(w["stds"])),
            Degradation(scale=float(w["scale"]), noise_std=float(w["noise_std"])),
        )
        g = cfg["grid"]
        grid = TimeGrid(kind=g["kind"], n=int(g["n"]), t_min=float(g["t_min"]),
                        t_max=float(g["t_max"]), rho=float(g["rho"]))
        reverse = ReverseConfig(grid=grid, kind=SamplerKind.parse(cfg["sampler"]),
                                lam=float(cfg["lambda"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError("config", str(exc)) from exc
    return Experiment(
        cfg=cfg,
        spec=spec,
        world=world,
        grid=grid,
        reverse=reverse,
        y=float(cfg["y"]),
        seed=int(cfg["seed"]),
    )


def train_config_from(cfg: dict, exp: Experiment) -> TrainConfig:
    t = cfg["train"]
    try:
        return TrainConfig(
            spec=exp.spec,
            world=exp.world,
            steps=int(t["steps"]),
            batch=int(t["batch"]),
            lr=float(t["lr"]),
            seed=int(cfg["seed"]),
            hidden=tuple(int(h) for h in t["hidden"]),
            embed_width=int(t["embed_width"]),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError("config.train", str(exc)) from exc
