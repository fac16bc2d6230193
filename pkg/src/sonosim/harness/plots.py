"""SVG line plots for evaluation curves (headless matplotlib)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["plot_report", "plot_comparison"]


def _curves(ax, report, color, label):
    trans = report.trans_curves
    for row in trans:
        ax.plot(row, color=color, alpha=0.15, lw=0.6)
    ax.plot(trans.mean(axis=0), color=color, lw=2.0, label=label)


def plot_report(report, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    _curves(ax1, report, "tab:red", report.task)
    ax1.set_xlabel("step")
    ax1.set_ylabel("translation error (mm)")
    ax1.legend()
    for row in report.ang_curves:
        ax2.plot(row, color="tab:red", alpha=0.15, lw=0.6)
    ax2.plot(report.ang_curves.mean(axis=0), color="tab:red", lw=2.0)
    ax2.set_xlabel("step")
    ax2.set_ylabel("angular error (deg)")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_comparison(report_a, report_b, labels, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    for rep, color, label in ((report_a, "tab:red", labels[0]), (report_b, "tab:blue", labels[1])):
        _curves(ax1, rep, color, label)
        ax2.plot(rep.ang_curves.mean(axis=0), color=color, lw=2.0, label=label)
    ax1.set_xlabel("step")
    ax1.set_ylabel("translation error (mm)")
    ax1.legend()
    ax2.set_xlabel("step")
    ax2.set_ylabel("angular error (deg)")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
