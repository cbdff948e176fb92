"""Report figures rendered next to the delimited outputs.

Every renderer takes the objects the run already produced and writes one
PNG; nothing here recomputes model quantities.  The Agg backend is forced
so runs work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .grid import COMPONENT_NAMES, Field, State, Trajectory

_COLORS = {"u": "tab:green", "v": "tab:red", "w": "tab:blue"}


def _save(fig, path) -> None:
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def trajectory_figure(traj: Trajectory, path, region_hi=None) -> None:
    """Componentwise sup/inf envelopes over time, with region ceilings if given."""
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 7.0), sharex=True)
    for ci, (ax, name) in enumerate(zip(axes, COMPONENT_NAMES)):
        color = _COLORS[name]
        ax.fill_between(traj.times, traj.inf[:, ci], traj.sup[:, ci], color=color, alpha=0.25)
        ax.plot(traj.times, traj.sup[:, ci], color=color, lw=1.2, label=f"sup {name}")
        ax.plot(traj.times, traj.inf[:, ci], color=color, lw=0.8, ls="--", label=f"inf {name}")
        if region_hi is not None:
            ax.axhline(region_hi[ci], color="k", lw=0.8, ls=":", label="ceiling")
        ax.set_ylabel(name)
        ax.legend(loc="upper right", fontsize=8)
    axes[-1].set_xlabel("t")
    fig.suptitle("componentwise envelopes")
    _save(fig, path)


def state_figure(state: State, path, title: str = "state") -> None:
    """Final or snapshot state: line plots in 1-D, three panels of images in 2-D."""
    grid = state.grid
    if grid.dim == 1:
        fig, ax = plt.subplots(figsize=(7.0, 4.0))
        (x,) = grid.coords()
        for name, f in zip(COMPONENT_NAMES, state.components):
            ax.plot(x, f.values, color=_COLORS[name], label=name)
        ax.set_xlabel("x")
        ax.legend()
        ax.set_title(title)
    else:
        fig, axes = plt.subplots(1, 3, figsize=(11.0, 3.4))
        for ax, name, f in zip(axes, COMPONENT_NAMES, state.components):
            im = ax.imshow(
                f.values.T,
                origin="lower",
                extent=(0.0, grid.length, 0.0, grid.length),
                cmap="viridis",
            )
            ax.set_title(name)
            fig.colorbar(im, ax=ax, shrink=0.85)
        fig.suptitle(title)
    _save(fig, path)


def field_figure(f: Field, path, title: str = "field") -> None:
    grid = f.grid
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if grid.dim == 1:
        (x,) = grid.coords()
        ax.plot(x, f.values, color="tab:blue")
        ax.set_xlabel("x")
    else:
        im = ax.imshow(
            f.values.T, origin="lower", extent=(0.0, grid.length, 0.0, grid.length), cmap="viridis"
        )
        fig.colorbar(im, ax=ax)
    ax.set_title(title)
    _save(fig, path)


def iterates_figure(history, path) -> None:
    """Sup norms of every sweep plus the contraction record."""
    fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.0))
    n_iter = len(history.sups)
    cmap = plt.get_cmap("viridis")
    for it, sup in enumerate(history.sups):
        shade = cmap(it / max(1, n_iter - 1))
        axes[0].plot(history.times, sup[:, 0], color=shade, lw=1.0)
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("sup u per sweep")
    distances = history.iteration_distances()
    if distances:
        axes[1].semilogy(np.arange(1, len(distances) + 1), distances, "o-", color="tab:red")
    axes[1].set_xlabel("sweep")
    axes[1].set_ylabel("distance to previous")
    fig.suptitle("successive approximation")
    _save(fig, path)


def ode_figure(result, path) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for ci, name in enumerate(COMPONENT_NAMES):
        ax.plot(result.times, result.ys[:, ci], color=_COLORS[name], label=name)
    ax.set_xlabel("t")
    ax.legend()
    ax.set_title("space-free reaction")
    _save(fig, path)


def equilibria_figure(report, path) -> None:
    """States in the (u, v) plane, colored by classification."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    palette = {"stable": "tab:green", "unstable": "tab:red", "marginal": "tab:orange"}
    for eq in report.states:
        u, v, _ = eq.state
        ax.scatter(u, v, color=palette[eq.classification], s=60, zorder=3)
        ax.annotate(
            f"{eq.branch}\nmax Re {eq.max_real_part:.3g}",
            (u, v),
            textcoords="offset points",
            xytext=(6, 6),
            fontsize=7,
        )
    for label, color in palette.items():
        ax.scatter([], [], color=color, label=label)
    ax.set_xlabel("u")
    ax.set_ylabel("v")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("flat equilibria")
    _save(fig, path)


def bifurcation_figure(curve_h, curve_max_re, path, h_star=None) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(curve_h, curve_max_re, "o-", color="tab:blue", ms=3)
    ax.axhline(0.0, color="k", lw=0.8)
    if h_star is not None:
        ax.axvline(h_star, color="tab:red", ls="--", label=f"flip at {h_star:.6g}")
        ax.legend()
    ax.set_xlabel("h")
    ax.set_ylabel("max Re of the linearization")
    ax.set_title("stability along the family")
    _save(fig, path)


def dispersion_figure(scan, path) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(scan.qs, scan.max_re, color="tab:blue")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("q")
    ax.set_ylabel("max Re")
    flags = []
    if scan.turing_unstable:
        flags.append("diffusion-driven instability")
    if scan.exceeds_zero_mode:
        flags.append("some q beats the flat mode")
    ax.set_title("dispersion relation" + (": " + "; ".join(flags) if flags else ""))
    _save(fig, path)


def verdict_figure(verdict, path) -> None:
    """Per-sample pass/fail bars; exit times annotated on failures."""
    fig, ax = plt.subplots(figsize=(7.0, 3.5))
    xs = [s.sample for s in verdict.samples]
    heights = [1 if s.passed else -1 for s in verdict.samples]
    colors = ["tab:green" if s.passed else "tab:red" for s in verdict.samples]
    ax.bar(xs, heights, color=colors)
    for s in verdict.samples:
        if not s.passed and s.first_exit_t is not None:
            ax.annotate(
                f"exit {s.first_exit_t:.3g}", (s.sample, -1.0),
                textcoords="offset points", xytext=(0, -12),
                ha="center", fontsize=7,
            )
    ax.set_xlabel("sample")
    ax.set_yticks([-1, 1])
    ax.set_yticklabels(["exit", "stayed"])
    ax.set_ylim(-1.8, 1.4)
    ax.set_title(f"box invariance: {verdict.n_pass}/{len(verdict.samples)} stayed inside")
    _save(fig, path)


def absorption_figure(report, path) -> None:
    """Envelopes against the inflated box with the measured entry time."""
    traj = report.trajectory
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 7.0), sharex=True)
    for ci, (ax, name) in enumerate(zip(axes, COMPONENT_NAMES)):
        color = _COLORS[name]
        ax.fill_between(traj.times, traj.inf[:, ci], traj.sup[:, ci], color=color, alpha=0.25)
        ax.axhline(report.region.hi[ci], color="k", ls=":", lw=0.8)
        if report.region.lo[ci] > 0:
            ax.axhline(report.region.lo[ci], color="k", ls=":", lw=0.8)
        t_c = report.per_component[name]
        if t_c is not None:
            ax.axvline(t_c, color=color, ls="--", lw=1.0)
        ax.set_ylabel(name)
    axes[-1].set_xlabel("t")
    title = "absorption"
    if report.t_eps is not None:
        title += f": inside for good after t = {report.t_eps:.6g}"
    fig.suptitle(title)
    _save(fig, path)
