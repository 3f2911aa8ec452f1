"""Static figures for sweep results (written to files, never shown)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .montecarlo import SweepResult, ThresholdEstimate  # noqa: E402


def plot_failure_curves(
    result: SweepResult, path, title: str = "", threshold: ThresholdEstimate | None = None
) -> None:
    """Failure rate against ``p`` for every size, with Wilson intervals."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for l in result.sizes:
        pts = sorted((pt for pt in result.points if pt.l == l), key=lambda pt: pt.p)
        p = np.array([pt.p for pt in pts])
        f = np.array([pt.failure_rate for pt in pts])
        lo = np.array([pt.ci[0] for pt in pts])
        hi = np.array([pt.ci[1] for pt in pts])
        ax.errorbar(p, f, yerr=np.vstack([f - lo, hi - f]), marker="o", ms=3, capsize=2, label=f"l = {l}")
    if threshold is not None and threshold.found:
        ax.axvline(threshold.mean, color="k", ls="--", lw=1, label=f"p_th ~ {threshold.mean:.4f}")
        if threshold.ci_low is not None:
            ax.axvspan(threshold.ci_low, threshold.ci_high, color="k", alpha=0.08)
    if any(pt.failures for pt in result.points):
        ax.set_yscale("log")
    ax.set_xlabel("p")
    ax.set_ylabel("failure rate")
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_timings(sizes, seconds, fit_coeff: float | None, path) -> None:
    """Mean decode time against size on log-log axes, with an optional c*l^2*log2(l) curve."""
    sizes = np.asarray(sizes, float)
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.loglog(sizes, seconds, "o", label="measured")
    if fit_coeff is not None:
        grid = np.geomspace(sizes.min(), sizes.max(), 50)
        ax.loglog(grid, fit_coeff * grid**2 * np.log2(grid), "-", label="c l^2 log2 l")
    ax.set_xlabel("l")
    ax.set_ylabel("seconds per decode")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
