"""Figure rendering for the report outputs, next to their CSV twins."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def energy_histogram(energies, path, v_max=None):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.hist(energies, bins=40, color="steelblue", alpha=0.85)
    if v_max is not None:
        ax.axvline(v_max, color="crimson", linestyle="--", linewidth=1, label="ceiling")
        ax.legend(frameon=False)
    ax.set_xlabel("energy")
    ax.set_ylabel("count")
    _save(fig, path)


def training_trace(trace, path):
    epochs = [row.epoch for row in trace.rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(5, 4.6), sharex=True)
    ax1.semilogy(epochs, [row.loss for row in trace.rows], label="loss", lw=0.9)
    ax1.semilogy(
        epochs, [row.loss_energy for row in trace.rows], label="energy part", lw=0.7
    )
    ax1.semilogy(
        epochs, [row.loss_force for row in trace.rows], label="force part", lw=0.7
    )
    ax1.set_ylabel("training loss")
    ax1.legend(frameon=False, fontsize=8)
    val = np.array([row.val_rmse for row in trace.rows])
    if np.any(np.isfinite(val)):
        ax2.semilogy(epochs, val, color="darkorange", lw=0.9)
    ax2.set_ylabel("validation RMSE")
    ax2.set_xlabel("epoch")
    _save(fig, path)


def transform_heatmap(matrix, path):
    matrix = np.asarray(matrix)
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    image = ax.imshow(matrix, cmap="RdBu_r", vmin=-1.0, vmax=1.0)
    ax.set_xlabel("latent mode")
    ax.set_ylabel("input mode")
    fig.colorbar(image, ax=ax, shrink=0.8)
    _save(fig, path)


def prediction_scatter(true_values, predicted, path):
    fig, ax = plt.subplots(figsize=(4.0, 4.0))
    ax.scatter(true_values, predicted, s=6, alpha=0.6, edgecolors="none")
    lo = min(np.min(true_values), np.min(predicted))
    hi = max(np.max(true_values), np.max(predicted))
    ax.plot([lo, hi], [lo, hi], color="gray", linewidth=0.8)
    ax.set_xlabel("reference energy")
    ax.set_ylabel("predicted energy")
    _save(fig, path)


def level_diagram(report, path):
    rows = report.rows()
    indices = [row["index"] for row in rows]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(indices, [row["excitation"] for row in rows], "o-", ms=4, label="levels")
    if rows and rows[0]["reference"] is not None:
        ax.plot(
            indices,
            [row["reference"] for row in rows],
            "s--",
            ms=3,
            alpha=0.7,
            label="reference",
        )
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel("level index")
    ax.set_ylabel("excitation energy")
    _save(fig, path)
