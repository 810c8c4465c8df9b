"""Figure rendering for the CLI report paths.

Each command that writes delimited output also renders a PNG next to it.
Figures are diagnostic line plots, not publication graphics; styling stays
close to matplotlib defaults.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_trajectory_fan",
    "save_collinearity_series",
    "save_zscore_chart",
    "save_loss_curve",
    "save_sweep_chart",
]

_MAX_FAN_PATHS = 200


def save_trajectory_fan(times, states, y, path, title=""):
    """Spaghetti plot of reverse trajectories (first coordinate) over time."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    n = min(states.shape[0], _MAX_FAN_PATHS)
    for p in range(n):
        ax.plot(times, states[p, :, 0], lw=0.5, alpha=0.35, color="tab:blue")
    ax.axhline(float(np.mean(y)), color="tab:red", lw=1.0, ls="--", label="y")
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.invert_xaxis()  # sampling runs from t_max down to t_min
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_collinearity_series(series_by_label, path, title="collinearity"):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, (times, cos) in series_by_label.items():
        ax.plot(times, cos, lw=1.2, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("mean cosine")
    ax.set_ylim(-1.05, 1.05)
    ax.invert_xaxis()
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_zscore_chart(labels, z_mean, z_var, path):
    """Max |z| per validation cell with the 3-sigma gate marked."""
    fig, ax = plt.subplots(figsize=(max(7, 0.4 * len(labels)), 4.5))
    idx = np.arange(len(labels))
    ax.bar(idx - 0.2, z_mean, width=0.4, label="|z| mean")
    ax.bar(idx + 0.2, z_var, width=0.4, label="|z| variance")
    ax.axhline(3.0, color="tab:red", lw=1.0, ls="--", label="3 sigma")
    ax.set_xticks(idx)
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_ylabel("|z|")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_loss_curve(losses, path):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(np.arange(len(losses)), losses, lw=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_sweep_chart(rows, path):
    """Terminal W1 against NFE, one line per sampler."""
    samplers = sorted({r["sampler"] for r in rows})
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for s in samplers:
        pts = sorted((r["nfe"], r["w1_terminal"]) for r in rows if r["sampler"] == s)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=s)
    ax.set_xlabel("NFE")
    ax.set_ylabel("terminal W1")
    ax.set_xscale("log")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
