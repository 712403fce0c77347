"""Figures for aggregated runs, rendered without any GUI backend.

Stochastic-game runs get one panel per state: each learning agent's mean
value estimate as a solid line with a one-standard-deviation band, and
dotted reference lines at the exact equilibrium value (plus the long-run
band edges when a bound applies). Matrix-game runs get a single panel of
the diagnostic curves: response gap (solid), tracking error (dashed) per
agent, and the joint stability function (dotted).

The x axis is the stage index on a linear scale so the k = 0 row stays
visible. Figures are built directly on a Figure object; nothing here
touches pyplot's global state.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .errors import DomainError
from .harness import Aggregate

__all__ = ["build_figure", "render_plot"]

_AGENT_COLORS = ("tab:blue", "tab:orange")


def _agent_name(labels, idx: int) -> str:
    base = f"agent {idx + 1}"
    if labels is not None and labels[idx]:
        return f"{base} ({labels[idx]})"
    return base


def _has_data(arr: np.ndarray) -> bool:
    return bool(np.isfinite(arr).any())


def _state_panel(ax, agg: Aggregate, s: int, labels):
    ks = agg.ks
    for agent in range(2):
        mean = agg.v_est_mean[:, s, agent]
        if not _has_data(mean):
            continue
        std = agg.v_est_std[:, s, agent]
        color = _AGENT_COLORS[agent]
        ax.plot(ks, mean, color=color, lw=1.2, label=_agent_name(labels, agent))
        ax.fill_between(ks, mean - std, mean + std, color=color, alpha=0.2, lw=0)
        if agg.v_star is not None:
            vs = float(agg.v_star[s, agent])
            ax.axhline(vs, color=color, ls=":", lw=0.9)
            if agg.bound_width is not None:
                ax.axhline(vs - agg.bound_width, color=color, ls=":", lw=0.7, alpha=0.6)
                ax.axhline(vs + agg.bound_width, color=color, ls=":", lw=0.7, alpha=0.6)
    ax.set_title(f"state {s}")
    ax.set_xlabel("stage")
    ax.set_ylabel("value estimate")


def _matrix_panel(ax, agg: Aggregate, labels):
    ks = agg.ks
    for agent in range(2):
        color = _AGENT_COLORS[agent]
        name = _agent_name(labels, agent)
        if _has_data(agg.delta_mean[:, agent]):
            ax.plot(ks, agg.delta_mean[:, agent], color=color, lw=1.2,
                    label=f"{name} response gap")
        if _has_data(agg.tracking_mean[:, agent]):
            ax.plot(ks, agg.tracking_mean[:, agent], color=color, lw=1.0, ls="--",
                    label=f"{name} tracking error")
    if _has_data(agg.lyapunov_mean):
        ax.plot(ks, agg.lyapunov_mean, color="tab:green", lw=1.0, ls=":",
                label="stability function")
    ax.set_xlabel("stage")
    ax.set_ylabel("diagnostic")


def build_figure(agg: Aggregate, title: Optional[str] = None, labels=None) -> Figure:
    """Figure for an aggregate; raises DomainError if there is nothing to draw."""
    if agg.ks.size == 0:
        raise DomainError("aggregate has no logged rows to plot")
    if agg.kind == "stochastic":
        n_states = agg.delta_mean.shape[1]
        ncols = min(n_states, 3)
        nrows = math.ceil(n_states / ncols)
        fig = Figure(figsize=(5.0 * ncols, 3.4 * nrows))
        axes = fig.subplots(nrows, ncols, squeeze=False)
        for s in range(n_states):
            _state_panel(axes[s // ncols][s % ncols], agg, s, labels)
        for idx in range(n_states, nrows * ncols):
            axes[idx // ncols][idx % ncols].set_axis_off()
        handles, names = axes[0][0].get_legend_handles_labels()
        if handles:
            fig.legend(handles, names, loc="lower center", ncol=len(handles), frameon=False)
            fig.subplots_adjust(bottom=0.2)
    else:
        fig = Figure(figsize=(6.4, 4.2))
        ax = fig.add_subplot(1, 1, 1)
        _matrix_panel(ax, agg, labels)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(loc="upper right", fontsize=8, frameon=False)
    if title:
        fig.suptitle(title)
    return fig


def render_plot(agg: Aggregate, path, title: Optional[str] = None, labels=None) -> Path:
    """Write the aggregate figure to path as an SVG and return the path.

    The file is byte-stable across reruns: element ids come from a fixed
    hash salt instead of the process clock, and no date is embedded.
    """
    fig = build_figure(agg, title=title, labels=labels)
    path = Path(path)
    FigureCanvasSVG(fig)
    with matplotlib.rc_context({"svg.hashsalt": "hetgames"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path
