"""Matplotlib renderings written next to the delimited report artifacts."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_pred_scatter(y, y_hat, path, title="Predicted vs actual rank score"):
    fig, ax = plt.subplots(figsize=(5.5, 5))
    ax.scatter(y, y_hat, s=14, alpha=0.6, edgecolors="none")
    lo = min(np.min(y), np.min(y_hat))
    hi = max(np.max(y), np.max(y_hat))
    ax.plot([lo, hi], [lo, hi], lw=1, color="firebrick", label="y = x")
    ax.set_xlabel("actual")
    ax.set_ylabel("predicted")
    ax.set_title(title)
    ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_cv_bars(reports, path, metric="r2"):
    """Per-fold bars for one or more CVReport objects, side by side."""
    fig, axes = plt.subplots(1, len(reports), figsize=(4.5 * len(reports), 3.6), squeeze=False)
    for ax, report in zip(axes[0], reports):
        values = [
            np.nan if getattr(m, metric) is None else getattr(m, metric)
            for m in report.fold_metrics
        ]
        ax.bar(range(1, len(values) + 1), values, color="steelblue")
        if report.mean[metric] is not None:
            ax.axhline(report.mean[metric], lw=1, ls="--", color="firebrick")
        ax.set_xlabel("fold")
        ax.set_ylabel(metric)
        ax.set_title(f"{report.protocol} ({report.learner_kind})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_rank_curve(scores_desc, path, title="Predicted urgency by rank position"):
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.plot(range(1, len(scores_desc) + 1), scores_desc, lw=1.2)
    ax.set_xlabel("rank position")
    ax.set_ylabel("predicted score")
    ax.set_title(title)
    if len(scores_desc) and min(scores_desc) > 0:
        ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
