"""Delimited outputs and matplotlib figures for the report paths."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import METRIC_NAMES


def write_loss_log(rows: list[dict], path: str | Path) -> None:
    """Per-epoch CSV: epoch, loss, bce, dice, then the five metrics."""
    fieldnames = ["epoch", "loss", "bce", "dice", *METRIC_NAMES]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row[k]) for k in fieldnames})


def write_metrics_kv(values: dict[str, float], path: str | Path) -> None:
    """Machine-readable key=value lines."""
    lines = "".join(f"{k}={_fmt(v)}\n" for k, v in values.items())
    Path(path).write_text(lines, encoding="utf-8")


def format_metrics_table(values: dict[str, float]) -> str:
    header = " ".join(f"{name:>10}" for name in METRIC_NAMES)
    row = " ".join(f"{values[name]:>10.6f}" for name in METRIC_NAMES)
    return f"{header}\n{row}\n"


def _fmt(v) -> str:
    return f"{v:.10g}" if isinstance(v, float) else str(v)


def save_loss_figure(rows: list[dict], path: str | Path) -> None:
    epochs = [r["epoch"] for r in rows]
    fig, (ax_loss, ax_f1) = plt.subplots(1, 2, figsize=(9, 3.2))
    ax_loss.plot(epochs, [r["loss"] for r in rows], label="total")
    ax_loss.plot(epochs, [r["bce"] for r in rows], label="bce", alpha=0.7)
    ax_loss.plot(epochs, [r["dice"] for r in rows], label="dice", alpha=0.7)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend()
    ax_f1.plot(epochs, [r["f1"] for r in rows], color="tab:green")
    ax_f1.set_xlabel("epoch")
    ax_f1.set_ylabel("train F1")
    ax_f1.set_ylim(0, 1.02)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_metrics_figure(values: dict[str, float], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3))
    names = list(METRIC_NAMES)
    ax.bar(names, [values[n] for n in names], color="tab:blue")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    for i, name in enumerate(names):
        ax.text(i, values[name] + 0.02, f"{values[name]:.3f}",
                ha="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_prediction_panel(img1: np.ndarray, img2: np.ndarray,
                          target: np.ndarray | None, prob: np.ndarray,
                          comparison: np.ndarray | None,
                          path: str | Path) -> None:
    """Side-by-side panel: both frames, ground truth, probabilities, overlay."""
    panels = [("frame 1", img1.transpose(1, 2, 0), None),
              ("frame 2", img2.transpose(1, 2, 0), None),
              ("probability", prob, "magma")]
    if target is not None:
        panels.insert(2, ("ground truth", target, "gray"))
    if comparison is not None:
        panels.append(("tp/fp/fn map", comparison, None))
    fig, axes = plt.subplots(1, len(panels), figsize=(2.6 * len(panels), 2.8))
    for ax, (title, image, cmap) in zip(np.atleast_1d(axes), panels):
        ax.imshow(image, cmap=cmap, vmin=0, vmax=1 if cmap else None)
        ax.set_title(title, fontsize=9)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
