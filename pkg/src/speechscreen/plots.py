"""Rendered figures for run reports.

Figures are a convenience view of the delimited outputs; the CSV files
remain the machine-readable interface. The Agg backend keeps rendering
headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_fold_accuracy(path, fold_metrics, aggregate) -> None:
    folds = [i for i, m in enumerate(fold_metrics) if m is not None]
    accs = [fold_metrics[i].accuracy for i in folds]
    lows = [max(0.0, fold_metrics[i].accuracy - fold_metrics[i].ci_low)
            for i in folds]
    highs = [max(0.0, fold_metrics[i].ci_high - fold_metrics[i].accuracy)
             for i in folds]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(folds, accs, color="#4878a8", yerr=[lows, highs], capsize=4)
    ax.axhline(aggregate.accuracy, color="#c44e52", linestyle="--",
               label=f"aggregate {aggregate.accuracy:.3f}")
    ax.set_xlabel("fold")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.set_xticks(folds)
    ax.legend(loc="lower right")
    ax.set_title("Per-fold accuracy (95% Wilson CI)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_roc(path, roc) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(roc.fpr, roc.tpr, color="#4878a8", marker=".", markersize=4)
    ax.plot([0, 1], [0, 1], color="#999999", linestyle=":")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"ROC (AUC = {roc.auc:.4f})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_grid(path, grid_rows) -> None:
    mean_rows = [r for r in grid_rows if r["fold"] == "mean"]
    if not mean_rows:
        return
    cs = sorted({r["c"] for r in mean_rows})
    gammas = sorted({r["gamma"] for r in mean_rows})
    acc = np.full((len(cs), len(gammas)), np.nan)
    for r in mean_rows:
        acc[cs.index(r["c"]), gammas.index(r["gamma"])] = r["accuracy"]

    fig, ax = plt.subplots(figsize=(1.2 + len(gammas), 1.0 + 0.8 * len(cs)))
    im = ax.imshow(acc, cmap="viridis", vmin=0.0, vmax=1.0, aspect="auto")
    ax.set_xticks(range(len(gammas)), [f"{g:.4g}" for g in gammas])
    ax.set_yticks(range(len(cs)), [f"{c:g}" for c in cs])
    ax.set_xlabel("gamma")
    ax.set_ylabel("C")
    for i in range(len(cs)):
        for j in range(len(gammas)):
            if np.isfinite(acc[i, j]):
                ax.text(j, i, f"{acc[i, j]:.3f}", ha="center", va="center",
                        color="white" if acc[i, j] < 0.6 else "black",
                        fontsize=8)
    fig.colorbar(im, ax=ax, label="mean fold accuracy")
    ax.set_title("Grid search")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_metric_bars(path, metrics) -> None:
    names = ["accuracy", "precision", "recall", "f1", "sensitivity",
             "specificity"]
    values = [getattr(metrics, n) for n in names]
    if metrics.auc is not None:
        names.append("auc")
        values.append(metrics.auc)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(range(len(names)), values, color="#4878a8")
    for i, v in enumerate(values):
        ax.text(i, v + 0.01, f"{v:.3f}", ha="center", fontsize=8)
    ax.set_xticks(range(len(names)), names, rotation=20)
    ax.set_ylim(0.0, 1.1)
    ax.set_title("Aggregate metrics")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_run_figures(out_dir, result, phone_class: str) -> None:
    """Render the standard figure set next to a run's CSV reports."""
    out = Path(out_dir) / "figures"
    out.mkdir(parents=True, exist_ok=True)
    plot_roc(out / "roc.png", result.roc)
    if hasattr(result, "fold_metrics"):
        plot_fold_accuracy(out / "fold_accuracy.png",
                           result.fold_metrics, result.aggregate)
        plot_metric_bars(out / "metrics.png", result.aggregate)
    else:
        plot_metric_bars(out / "metrics.png", result.metrics)
    if result.grid_rows:
        plot_grid(out / "grid.png", result.grid_rows)
