"""Static PNG figures written next to the CSV reports (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import Summary  # noqa: E402

PANELS = (("S", "susceptible"), ("E", "exposed"), ("I", "infectious"),
          ("R", "removed"), ("ell", "lockdown level"))


def plot_summary(summary: Summary, path, names: Sequence[str], title: str = "") -> Path:
    """One panel per compartment and one for the policy: mean with 95% band."""
    fig, axes = plt.subplots(1, len(PANELS), figsize=(4 * len(PANELS), 3.4))
    lo, hi = 0.025, 0.975
    for ax, (var, label) in zip(axes, PANELS):
        for n, name in enumerate(names):
            line, = ax.plot(summary.times, summary.mean[var][:, n], label=name)
            q = summary.quantiles[var]
            if lo in q and hi in q:
                ax.fill_between(summary.times, q[lo][:, n], q[hi][:, n],
                                color=line.get_color(), alpha=0.2, linewidth=0)
        ax.set_title(label)
        ax.set_xlabel("day")
    axes[0].legend(fontsize="small")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_losses(rows: Sequence[dict], path, names: Sequence[str]) -> Path:
    """Validation loss per player against the stage index (log scale)."""
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for n, name in enumerate(names):
        mine = [r for r in rows if int(r["player"]) == n]
        stages = [int(r["stage"]) for r in mine]
        loss = np.array([float(r["validation_loss"]) for r in mine])
        ax.plot(stages, loss, label=name)
    ax.set_yscale("log")
    ax.set_xlabel("stage")
    ax.set_ylabel("validation loss")
    ax.legend(fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
