"""PNG figures for tracking runs, rendered off-screen with the Agg canvas."""

from __future__ import annotations

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=100)


def plot_posteriors(records, path) -> None:
    """Feature posterior probabilities per frame, with coasted frames shaded."""
    frames = [r.frame_index for r in records]
    fig = Figure(figsize=(7, 3.2))
    ax = fig.add_subplot()
    ax.plot(frames, [r.Pr_cr for r in records], label="color", color="tab:red")
    ax.plot(frames, [r.Pr_tx for r in records], label="texture", color="tab:blue")
    shaded = False
    for r in records:
        if r.occluded:
            ax.axvspan(r.frame_index - 0.5, r.frame_index + 0.5, color="0.85", lw=0,
                       label=None if shaded else "coasting (occluded)")
            shaded = True
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("frame")
    ax.set_ylabel("posterior probability")
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)


def plot_errors(result, path) -> None:
    """Per-frame center error with the run mean as a dashed line."""
    frames = [r[0] for r in result.rows]
    fig = Figure(figsize=(7, 3.2))
    ax = fig.add_subplot()
    ax.plot(frames, [r[1] for r in result.rows], marker=".", color="k")
    ax.axhline(result.mean_center_error, ls="--", color="tab:gray",
               label=f"mean {result.mean_center_error:.2f} px")
    ax.set_xlabel("frame")
    ax.set_ylabel("center error (px)")
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)
