"""Report figures written next to the JSON-lines records."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

from .protocols import OmegaEstimate, PerturbationReport  # noqa: E402

FIGSIZE = (6.4, 3.6)
DPI = 150


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_estimate(est: OmegaEstimate, omega_true: float, n: int, path) -> Path:
    """Confidence interval for the rotation angle against the width-2^-n digit cells."""
    lo, hi = est.interval
    pad = max(4 * est.radius, 2.0 ** -n)
    left, right = min(lo, omega_true) - pad, max(hi, omega_true) + pad

    fig, ax = plt.subplots(figsize=FIGSIZE)
    step = 2.0 ** -n
    j = int(left // step)
    while j * step <= right:
        ax.axvline(j * step, color="0.8", lw=0.8, zorder=0)
        j += 1
    ax.errorbar([est.omega_hat], [0], xerr=[[est.radius], [est.radius]], fmt="o", capsize=6, label="estimate")
    ax.axvline(omega_true, color="C3", ls="--", label="true angle")
    ax.set_xlim(left, right)
    ax.set_yticks([])
    ax.set_xlabel("rotation angle (rad)")
    ax.set_title(f"N={est.shots}, confidence={est.confidence:g}, cells of width 2^-{n}")
    ax.legend(loc="upper right", frameon=False)
    return _save(fig, path)


def plot_perturbation(report: PerturbationReport, path) -> Path:
    """Corrupted digit count versus |eta| (log scale), split by sign."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for sign, marker, label in ((1, "^", "eta > 0"), (-1, "v", "eta < 0")):
        runs = [r for r in report.runs if r.eta * sign > 0]
        if runs:
            ax.scatter([abs(r.eta) for r in runs], [len(r.corrupted) for r in runs], marker=marker, label=label)
    ax.axvline(2.0 ** -report.n, color="0.5", ls=":", label=f"2^-{report.n}")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("|eta|")
    ax.set_ylabel(f"wrong digits among 0..{report.n}")
    ax.yaxis.set_major_locator(MaxNLocator(integer=True))
    ax.legend(frameon=False)
    return _save(fig, path)
