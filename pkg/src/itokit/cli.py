"""Command-line front end.

Verbs:

* ``validate-kernels``   forward-simulate every configured (method, scheduler)
                         cell and gate the closed-form kernels at 3 sigma.
* ``sample``             run the reverse process, write trajectories + metrics.
* ``train``              fit the MLP x0 predictor on the toy world.
* ``temperature-study``  collinearity/W1 sweep over temperatures.
* ``sweep``              sampler x NFE grid for one method.

Every command writes CSV and JSON (LF line endings, 17-significant-digit
floats) plus a PNG figure into the output directory, and embeds the fully
resolved config + seed so reruns are byte-identical.  Exit codes: 0 ok,
2 config error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, plots
from . import rng as streams
from .config import (
    ORIGINAL_SCHEDULERS,
    ORIGINAL_TAUS,
    SCHEDULER_DEFAULTS,
    build_experiment,
    load_config,
    resolve_config,
    train_config_from,
)
from .errors import ConfigError, ItokitError, TrainingDivergedError
from .nnscore import load_weights, save_weights, train
from .oracle import simulate_forward_checkpoints, wasserstein1
from .samplers import collinearity_diag, run_reverse
from .score import learned_score_field
from .toyworld import analytic_score_field

log = logging.getLogger("itokit")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


@dataclass
class Invocation:
    user_cfg: dict
    seed_override: int | None
    outdir: Path
    threads: int


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _echo(cfg: dict) -> dict:
    return {"config": cfg, "seed": cfg["seed"], "version": __version__}


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps(
            {"level": record.levelname.lower(), "name": record.name, "msg": record.getMessage()},
            sort_keys=True,
        )


def _setup_logging(json_logs: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonFormatter() if json_logs else logging.Formatter("%(levelname)s %(message)s"))
    logging.basicConfig(level=logging.INFO, handlers=[handler], force=True)


# ---------------------------------------------------------------------------
# validate-kernels
# ---------------------------------------------------------------------------

def _validation_cells(cfg: dict) -> list[dict]:
    """One work unit per (method, scheduler) pair."""
    v = cfg["validate"]
    if v["matrix"] == "table4":
        pairs = [(m, ORIGINAL_SCHEDULERS[m]) for m in ORIGINAL_SCHEDULERS]
    else:
        from .processes import BRIDGE_METHODS

        bridges = {m.value for m in BRIDGE_METHODS}
        pairs = []
        for m in ORIGINAL_SCHEDULERS:
            for kind in SCHEDULER_DEFAULTS:
                # Bridge kernels need alpha(t, 1), which the Inversed
                # scheduler cannot provide (its rate diverges at t = 1).
                if kind == "Inversed" and m in bridges:
                    continue
                pairs.append((m, kind))
    cells = []
    for idx, (method, kind) in enumerate(pairs):
        cells.append({
            "index": idx,
            "method": method,
            "scheduler": {"kind": kind, **SCHEDULER_DEFAULTS[kind]},
            "tau": ORIGINAL_TAUS.get(method, 1.0),
            "gamma": 1e4 if method == "UniDB" else None,
            "times": [float(t) for t in v["times"]],
            "n_paths": int(v["n_paths"]),
            "n_steps": int(v["n_steps"]),
            "x0": float(v["x0"]),
            "y": float(v["y"]),
            "seed": int(cfg["seed"]),
        })
    return cells


def _run_cell(cell: dict) -> list[dict]:
    from .processes import MethodKind, ProcessSpec
    from .schedulers import make_scheduler

    sched_cfg = dict(cell["scheduler"])
    kind = sched_cfg.pop("kind")
    spec = ProcessSpec(
        MethodKind.parse(cell["method"]),
        make_scheduler(kind, **sched_cfg),
        tau=cell["tau"],
        gamma=cell["gamma"],
    )
    # Bridges cannot be integrated up to the pinned endpoint.
    times = [t for t in cell["times"] if not (spec.is_bridge and t > 0.9)]
    cell_seed = int(streams.substream(cell["seed"], streams.REFERENCE, cell["index"]).integers(2**31))
    reports = simulate_forward_checkpoints(
        spec, cell["x0"], cell["y"], times, cell["n_steps"], cell["n_paths"], cell_seed
    )
    out = []
    for r in reports:
        row = r.to_dict()
        row["method"] = cell["method"]
        row["scheduler"] = kind
        out.append(row)
    return out


def cmd_validate_kernels(inv: Invocation) -> int:
    cfg = resolve_config(inv.user_cfg, inv.seed_override)
    cells = _validation_cells(cfg)
    log.info("validating %d method x scheduler cells", len(cells))
    if inv.threads > 1:
        with ProcessPoolExecutor(max_workers=inv.threads) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]

    rows, labels, zm, zv = [], [], [], []
    failed = []
    header = [
        "method", "scheduler", "t", "emp_mean", "pred_mean", "stderr_mean", "z_mean",
        "emp_var", "pred_var", "stderr_var", "z_var", "n_paths", "passed",
    ]
    for cell, reports in zip(cells, results):
        worst_m = worst_v = 0.0
        for r in reports:
            rows.append([r[h] for h in header])
            worst_m = max(worst_m, r["z_mean"])
            worst_v = max(worst_v, r["z_var"])
            if not r["passed"]:
                failed.append(f"{r['method']}x{r['scheduler']} at t={r['t']}")
        labels.append(f"{cell['method']}\n{cell['scheduler']['kind']}")
        zm.append(worst_m)
        zv.append(worst_v)

    write_csv(inv.outdir / "kernels_report.csv", header, rows)
    write_json(inv.outdir / "kernels_report.json", {
        **_echo(cfg),
        "reports": [dict(zip(header, row)) for row in rows],
        "failed_cells": failed,
    })
    plots.save_zscore_chart(labels, zm, zv, inv.outdir / "kernels_report.png")
    if failed:
        log.error("kernel validation failed for: %s", "; ".join(failed))
        return EXIT_NUMERICAL
    log.info("all %d cells passed the 3-sigma gate", len(cells))
    return EXIT_OK


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------

def _build_field(cfg: dict, exp):
    if cfg["score"] == "analytic":
        return analytic_score_field(exp.world, exp.spec)
    if not cfg["weights_file"]:
        raise ConfigError("weights_file", "required when score='learned'")
    net = load_weights(cfg["weights_file"])
    return learned_score_field(net, exp.spec)


def _sample_metrics(exp, batch, field) -> dict:
    terminal = batch.terminal()[:, 0]
    post = exp.world.posterior(exp.y)
    ref = post.sample(max(terminal.size, 2), streams.substream(exp.seed, streams.REFERENCE))
    series = collinearity_diag(batch, field, exp.spec, exp.y)
    return {
        "w1_terminal": wasserstein1(terminal, ref),
        "terminal_mean": float(np.mean(terminal)),
        "terminal_var": float(np.var(terminal)),
        "posterior_mean": post.mean,
        "posterior_var": post.var,
        "collinearity": {
            "t": [float(t) for t in series.times],
            "mean_cos": [float(c) for c in series.mean_cos],
            "n_excluded": [int(n) for n in series.n_excluded],
        },
    }


def cmd_sample(inv: Invocation) -> int:
    cfg = resolve_config(inv.user_cfg, inv.seed_override)
    exp = build_experiment(cfg)
    field = _build_field(cfg, exp)
    batch = run_reverse(exp.spec, field, exp.reverse, exp.y, cfg["n_paths"], exp.seed)
    batch.write_csv(inv.outdir / "trajectories.csv")
    metrics = _sample_metrics(exp, batch, field) if cfg["n_paths"] > 0 else {}
    write_json(inv.outdir / "metrics.json", {**_echo(cfg), "metrics": metrics})
    if cfg["n_paths"] > 0:
        plots.save_trajectory_fan(
            batch.times, batch.states, exp.y, inv.outdir / "trajectories.png",
            title=f"{cfg['method']} / {cfg['sampler']} / n={exp.grid.n}",
        )
        log.info("wrote %d paths x %d times (w1=%s)", batch.n_paths, batch.times.size,
                 _fmt(metrics["w1_terminal"]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(inv: Invocation) -> int:
    cfg = resolve_config(inv.user_cfg, inv.seed_override)
    exp = build_experiment(cfg)
    tcfg = train_config_from(cfg, exp)
    resume = cfg["train"]["resume"]
    net = load_weights(resume) if resume else None
    start = int(cfg["train"]["start_step"])
    try:
        net, curve = train(tcfg, net=net, start_step=start)
    except TrainingDivergedError as exc:
        if exc.last_net is not None:
            save_weights(exc.last_net, inv.outdir / "weights.bin")
            write_csv(inv.outdir / "train_curve.csv", ["step", "loss"],
                      [[start + i, v] for i, v in enumerate(exc.curve or [])])
        log.error("training diverged: %s", exc)
        return EXIT_NUMERICAL
    save_weights(net, inv.outdir / "weights.bin")
    write_csv(inv.outdir / "train_curve.csv", ["step", "loss"],
              [[start + i, v] for i, v in enumerate(curve)])
    write_json(inv.outdir / "train_meta.json", {**_echo(cfg), "steps_done": start + len(curve),
                                                "final_loss": curve[-1] if curve else None})
    if curve:
        plots.save_loss_curve(curve, inv.outdir / "train_curve.png")
    log.info("trained %d steps (final loss %s)", len(curve), _fmt(curve[-1]) if curve else "n/a")
    return EXIT_OK


# ---------------------------------------------------------------------------
# temperature-study
# ---------------------------------------------------------------------------

def cmd_temperature_study(inv: Invocation) -> int:
    base = resolve_config(inv.user_cfg, inv.seed_override)
    study = base["study"]
    series_rows, summary_rows = [], []
    series_by_label = {}
    for method in study["methods"]:
        for tau in study["taus"]:
            sub_user = copy.deepcopy(inv.user_cfg)
            sub_user["method"] = method
            sub_user["tau"] = float(tau)
            sub_user.pop("scheduler", None)  # re-derive the method's own scheduler
            cfg = resolve_config(sub_user, inv.seed_override)
            exp = build_experiment(cfg)
            field = analytic_score_field(exp.world, exp.spec)
            batch = run_reverse(exp.spec, field, exp.reverse, exp.y, cfg["n_paths"], exp.seed)
            series = collinearity_diag(batch, field, exp.spec, exp.y)
            post = exp.world.posterior(exp.y)
            ref = post.sample(batch.n_paths, streams.substream(exp.seed, streams.REFERENCE))
            w1 = wasserstein1(batch.terminal()[:, 0], ref)
            tail = series.mean_cos[-(series.mean_cos.size // 3):]
            tail_abs = float(np.nanmean(np.abs(tail)))
            for t, c, nx in zip(series.times, series.mean_cos, series.n_excluded):
                series_rows.append([method, tau, t, c, nx])
            summary_rows.append([method, tau, w1, tail_abs])
            series_by_label[f"{method} tau={tau}"] = (series.times, series.mean_cos)
            log.info("%s tau=%s: w1=%.4f tail|cos|=%.4f", method, tau, w1, tail_abs)
    write_csv(inv.outdir / "temperature_series.csv",
              ["method", "tau", "t", "mean_cos", "n_excluded"], series_rows)
    write_csv(inv.outdir / "temperature_summary.csv",
              ["method", "tau", "w1_terminal", "mean_abs_cos_final_third"], summary_rows)
    write_json(inv.outdir / "temperature_study.json", {**_echo(base), "summary": [
        dict(zip(["method", "tau", "w1_terminal", "mean_abs_cos_final_third"], row))
        for row in summary_rows
    ]})
    plots.save_collinearity_series(series_by_label, inv.outdir / "temperature_study.png",
                                   title="collinearity vs temperature")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def cmd_sweep(inv: Invocation) -> int:
    base = resolve_config(inv.user_cfg, inv.seed_override)
    sweep = base["sweep"]
    rows = []
    for sampler in sweep["samplers"]:
        for nfe in sweep["nfes"]:
            sub_user = copy.deepcopy(inv.user_cfg)
            sub_user["sampler"] = sampler
            sub_user.setdefault("grid", {})["n"] = int(nfe)
            cfg = resolve_config(sub_user, inv.seed_override)
            exp = build_experiment(cfg)
            field = _build_field(cfg, exp)
            batch = run_reverse(exp.spec, field, exp.reverse, exp.y, cfg["n_paths"], exp.seed)
            m = _sample_metrics(exp, batch, field)
            rows.append({
                "method": cfg["method"], "sampler": sampler, "nfe": int(nfe),
                "w1_terminal": m["w1_terminal"], "terminal_mean": m["terminal_mean"],
                "terminal_var": m["terminal_var"], "posterior_var": m["posterior_var"],
            })
            log.info("%s %s nfe=%d: w1=%.4f", cfg["method"], sampler, nfe, m["w1_terminal"])
    header = ["method", "sampler", "nfe", "w1_terminal", "terminal_mean", "terminal_var", "posterior_var"]
    write_csv(inv.outdir / "sweep.csv", header, [[r[h] for h in header] for r in rows])
    write_json(inv.outdir / "sweep.json", {**_echo(base), "rows": rows})
    plots.save_sweep_chart(rows, inv.outdir / "sweep.png")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "validate-kernels": cmd_validate_kernels,
    "sample": cmd_sample,
    "train": cmd_train,
    "temperature-study": cmd_temperature_study,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="itokit", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"itokit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="JSON config (defaults used if omitted)")
        p.add_argument("--out", type=Path, default=Path("itokit-out"), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (falls back to ITOKIT_THREADS, then 1)")
        p.add_argument("--json-logs", action="store_true", help="emit JSON log lines")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.json_logs)
    if args.threads is not None:
        threads = max(1, args.threads)
    else:
        env = os.environ.get("ITOKIT_THREADS")
        threads = max(1, int(env)) if env else 1
    try:
        user_cfg = load_config(args.config) if args.config else {}
        args.out.mkdir(parents=True, exist_ok=True)
        inv = Invocation(user_cfg=user_cfg, seed_override=args.seed, outdir=args.out, threads=threads)
        return _COMMANDS[args.command](inv)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("i/o error: %s", exc)
        return EXIT_IO
    except ItokitError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


def entrypoint() -> None:
    raise SystemExit(main())
