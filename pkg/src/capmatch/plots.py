"""Figure rendering for the CLI report paths.

Kept apart from the metric computations: metrics stay pure, the CLI asks
this module to draw alongside the delimited output when --plot is given.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import RobustnessRecord, TrendFit, avg_robustness


def save_fit_figure(
    path: str,
    points: Sequence[tuple[float, float]],
    fit: TrendFit,
    x_label: str = "base accuracy",
    y_label: str = "shift metric",
) -> None:
    """Scatter the points and draw the fitted trend, log-log when the fit is log10."""
    fig, ax = plt.subplots(figsize=(7, 5))
    xs = [x for x, _ in points]
    ys = [y for _, y in points]
    ax.scatter(xs, ys, s=24, alpha=0.8, label=f"data (n={len(points)})")
    grid = sorted(xs)
    ax.plot(
        grid,
        [fit.predict(x) for x in grid],
        "--",
        color="darkred",
        label=f"{fit.space} fit, R2={fit.r2:.2f}",
    )
    if fit.space == "log10":
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)


def save_robustness_figure(path: str, records: Sequence[RobustnessRecord]) -> None:
    """Base accuracy vs average robustness, with the y=x reference."""
    fig, ax = plt.subplots(figsize=(7, 5))
    xs = [rec.base_acc for rec in records]
    ys = [avg_robustness(rec) for rec in records]
    ax.scatter(xs, ys, s=24, alpha=0.8)
    lo, hi = min(xs + ys), max(xs + ys)
    ax.plot([lo, hi], [lo, hi], color="gray", alpha=0.6, label="y = x")
    ax.set_xlabel("base accuracy")
    ax.set_ylabel("average robustness")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
