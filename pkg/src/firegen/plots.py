"""Static report figures.

Everything renders through the Agg backend and is written straight to
disk; the pipeline is batch-only and never opens a window.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def save_loss_curves(history: dict, path, title: str = "training loss") -> Path:
    """One line per history key (epoch-indexed loss components)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, values in history.items():
        if len(values) == 0:
            continue
        ax.plot(np.arange(1, len(values) + 1), values, label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.legend()
    return _finish(fig, path)


def save_burned_area_plot(curves, path, title: str = "burned area") -> Path:
    """curves: iterable of (times_hours, counts, label, style) tuples."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for times, counts, label, style in curves:
        ax.plot(times, counts, style, label=label)
    ax.set_xlabel("hours since ignition")
    ax.set_ylabel("burned cells")
    ax.set_title(title)
    ax.legend()
    return _finish(fig, path)


def save_mismatch_maps(truth_stack, pred_stack, hours, path,
                       title: str = "prediction vs truth") -> Path:
    """Rows: truth, prediction, disagreement; one column per frame."""
    truth_stack = np.asarray(truth_stack)
    pred_stack = np.asarray(pred_stack)
    n = truth_stack.shape[0]
    fig, axes = plt.subplots(3, n, figsize=(2.2 * n, 6.8), squeeze=False)
    for j in range(n):
        axes[0][j].imshow(truth_stack[j], cmap="gray_r", vmin=0, vmax=1)
        axes[0][j].set_title(f"{hours[j]:g} h")
        axes[1][j].imshow(pred_stack[j], cmap="gray_r", vmin=0, vmax=1)
        axes[2][j].imshow(np.abs(truth_stack[j] - pred_stack[j]),
                          cmap="Reds", vmin=0, vmax=1)
        for row in range(3):
            axes[row][j].set_xticks([])
            axes[row][j].set_yticks([])
    axes[0][0].set_ylabel("truth")
    axes[1][0].set_ylabel("predicted")
    axes[2][0].set_ylabel("mismatch")
    fig.suptitle(title)
    return _finish(fig, path)


def save_sweep_plot(xs, ys, xlabel: str, ylabel: str, path,
                    title: str | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, "o-")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    return _finish(fig, path)
