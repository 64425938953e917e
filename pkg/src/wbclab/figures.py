"""Matplotlib renderings written next to the delimited report files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .audit import DirectionalMatrix
from .data import ClassRegistry
from .trainer import EpochRecord


def render_confusion_matrix(cm: np.ndarray, registry: ClassRegistry,
                            path: Path | str, title: str = "Confusion matrix") -> None:
    C = registry.C
    fig, ax = plt.subplots(figsize=(0.6 * C + 2.5, 0.6 * C + 2))
    row_sums = cm.sum(axis=1, keepdims=True)
    shade = np.divide(cm, row_sums, out=np.zeros(cm.shape, dtype=float), where=row_sums > 0)
    im = ax.imshow(shade, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(C), registry.names, rotation=90)
    ax.set_yticks(range(C), registry.names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    for i in range(C):
        for j in range(C):
            if cm[i, j]:
                ax.text(j, i, str(int(cm[i, j])), ha="center", va="center",
                        fontsize=7, color="black" if shade[i, j] < 0.5 else "white")
    fig.colorbar(im, ax=ax, fraction=0.046, label="row share")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_directional_matrix(matrix: DirectionalMatrix, registry: ClassRegistry,
                              path: Path | str) -> None:
    """Label errors / reviewed disagreements per (assigned, predicted) cell."""
    C = registry.C
    fig, ax = plt.subplots(figsize=(0.6 * C + 2.5, 0.6 * C + 2))
    im = ax.imshow(matrix.rate, cmap="Reds", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(C), registry.names, rotation=90)
    ax.set_yticks(range(C), registry.names)
    ax.set_xlabel("model top-1 prediction")
    ax.set_ylabel("assigned label")
    ax.set_title("Label errors / reviewed disagreements")
    for i in range(C):
        for j in range(C):
            if matrix.reviewed[i, j]:
                ax.text(j, i, f"{int(matrix.errors[i, j])}/{int(matrix.reviewed[i, j])}",
                        ha="center", va="center", fontsize=7,
                        color="black" if matrix.rate[i, j] < 0.5 else "white")
    fig.colorbar(im, ax=ax, fraction=0.046, label="label-error rate")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_training_curves(records: list[EpochRecord], path: Path | str) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    stages = []
    for rec in records:
        if rec.stage not in stages:
            stages.append(rec.stage)
    x = range(len(records))
    ax1.plot(x, [r.train_loss for r in records], marker=".", color="tab:blue")
    ax1.set_xlabel("epoch (all stages)")
    ax1.set_ylabel("train loss")
    ax2.plot(x, [r.val_macro_f1 for r in records], marker=".", label="MacroF1")
    ax2.plot(x, [r.val_tail_macro_f1 for r in records], marker=".", label="TailMacroF1")
    ax2.plot(x, [r.val_tail_composite for r in records], marker=".", label="TailComposite")
    ax2.set_xlabel("epoch (all stages)")
    ax2.set_ylabel("validation metric")
    ax2.legend(fontsize=8)
    boundary = 0
    for stage in stages[:-1]:
        boundary += sum(1 for r in records if r.stage == stage)
        for ax in (ax1, ax2):
            ax.axvline(boundary - 0.5, color="gray", linestyle=":", linewidth=1)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
