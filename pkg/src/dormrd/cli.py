"""Command-line front end.

Every subcommand reads one config file, writes delimited outputs plus
rendered figures into an output directory, and finishes with a
``manifest.json`` recording the resolved configuration, headline results,
and a SHA-256 hash of every artifact.  Exit codes: 0 success, 1 config
problems, 2 numerical failures (blow-up, lost positivity, no contraction),
3 completed runs whose verdict is negative (a box was left, no sign change
to bisect), 4 internal errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time as _time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, SUBCOMMANDS, load_config
from .csvio import sha256_path, write_csv
from .errors import BracketError, ConfigError, NumericGuardError
from .grid import COMPONENT_NAMES, State, field_to_csv, initial_data
from .model import e1_params, e2_params, thresholds
from .stepper import StepPlan, integrate, ode_solve
from . import equilibria as eq
from . import invariant as inv
from . import picard as pc
from . import plots

_HELP = {
    "simulate": "integrate the PDE system and record envelopes, distances, and snapshots",
    "picard": "build a short-horizon solution by successive approximation",
    "ode": "integrate the space-free reaction ODEs",
    "equilibria": "enumerate flat equilibria with their linearizations",
    "bifurcate": "bisect for a stability flip along a parameter family",
    "dispersion": "scan the linearization against spatial frequencies",
    "invariant": "sample a box region for trajectories that leave it",
    "absorb": "measure when a trajectory enters an inflated box for good",
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dormrd",
        description="Prey-predator-dormancy reaction-diffusion toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name, help=_HELP[name])
        sub.add_argument("--config", required=True, help="path to the run configuration")
        sub.add_argument("--out", default=None, help="output directory (default: <config stem>.out)")
        sub.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.subcommand)
        out_dir = Path(args.out or cfg.output.dir or (Path(args.config).stem + ".out"))
        render = cfg.output.plots and not args.no_plots
        ok = _run(cfg, out_dir, render, Path(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except BracketError as exc:
        print(f"verdict: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericGuardError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except Exception:  # pragma: no cover - defensive
        import traceback

        traceback.print_exc()
        return 4
    return 0 if ok else 3


def _run(cfg: RunConfig, out_dir: Path, render: bool, config_path: Path) -> bool:
    out_dir.mkdir(parents=True, exist_ok=True)
    started = _time.perf_counter()
    handler = _HANDLERS[cfg.subcommand]
    results, ok = handler(cfg, out_dir, render)
    _write_manifest(cfg, out_dir, results, ok, _time.perf_counter() - started, config_path)
    status = "ok" if ok else "verdict failed"
    print(f"{cfg.subcommand}: {status}; outputs in {out_dir}")
    return ok


def _write_manifest(cfg, out_dir: Path, results: dict, ok: bool, wall: float, config_path: Path) -> None:
    files = []
    for path in sorted(out_dir.iterdir()):
        if path.name == "manifest.json" or not path.is_file():
            continue
        files.append(
            {"name": path.name, "bytes": path.stat().st_size, "sha256": sha256_path(path)}
        )
    manifest = {
        "tool": "dormrd",
        "version": __version__,
        "subcommand": cfg.subcommand,
        "config_file": str(config_path),
        "config": cfg.echo,
        "ok": ok,
        "results": _jsonable(results),
        "wall_time_s": round(wall, 3),
        "files": files,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        out = float(value)
        return out if math.isfinite(out) else repr(out)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _resolve_region(cfg: RunConfig):
    settings = cfg.region
    if settings is None:
        return None
    if settings.kind == "R":
        return inv.region_upper(cfg.params, tol=settings.tol)
    if settings.kind == "R-natural":
        return inv.region_lower(cfg.params, tol=settings.tol)
    return inv.region_custom(settings.lo, settings.hi, tol=settings.tol)


def _initial_state(cfg: RunConfig, default_box) -> State:
    init = cfg.init
    if init is None:
        box = default_box or ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
        return initial_data("box-random", cfg.grid, seed=0, box=box)
    box = None
    if init.box_lo is not None and init.box_hi is not None:
        box = (init.box_lo, init.box_hi)
    elif init.kind == "box-random":
        box = default_box or ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    return initial_data(
        init.kind,
        cfg.grid,
        amplitude=init.amplitude,
        seed=init.seed,
        width=init.width,
        box=box,
    )


def _write_state(state: State, out_dir: Path, stem: str) -> None:
    for name, field in zip(COMPONENT_NAMES, state.components):
        field_to_csv(field, out_dir / f"{stem}_{name}.csv")


def _cmd_simulate(cfg: RunConfig, out_dir: Path, render: bool):
    p = cfg.params
    region = None
    if cfg.region is not None:
        region = _resolve_region(cfg)
    else:
        try:
            region = inv.region_upper(p)
        except ValueError:
            region = None  # no usable ceiling; run without membership tracking
    s0 = _initial_state(cfg, region.box() if region is not None else None)
    plan = StepPlan(p, cfg.grid, cfg.time.dt)
    n_steps = int(round(cfg.time.t_end / cfg.time.dt))
    traj = integrate(
        plan,
        s0,
        cfg.time.t_end,
        sample_every=max(1, n_steps // cfg.time.samples),
        snapshot_times=cfg.time.snapshots,
        region=region.box() if region is not None else None,
        region_tol=region.tol if region is not None else 1e-8,
    )
    traj.to_csv(out_dir / "trajectory.csv")
    _write_state(traj.final_state(), out_dir, "state_final")
    for t_snap in cfg.time.snapshots:
        _write_state(traj.state_at(t_snap), out_dir, f"state_t{t_snap:g}")
    if render:
        plots.trajectory_figure(
            traj, out_dir / "fig_trajectory.png", region_hi=region.hi if region else None
        )
        plots.state_figure(traj.final_state(), out_dir / "fig_state_final.png", title="final state")
    results = {
        "t_end": cfg.time.t_end,
        "sup_final": list(map(float, traj.sup[-1])),
        "inf_final": list(map(float, traj.inf[-1])),
        "dist_100_final": float(traj.dist[-1, 0]),
        "in_region_final": None if traj.in_region is None else int(traj.in_region[-1]),
        "first_exit_t": None if traj.first_exit is None else traj.first_exit[0],
        "max_clamp": traj.max_clamp,
    }
    return results, True


def _cmd_picard(cfg: RunConfig, out_dir: Path, render: bool):
    settings = cfg.picard
    s0 = _initial_state(cfg, None)
    result = pc.solve(
        cfg.params,
        s0,
        settings.t0,
        settings.steps,
        tol=settings.tol,
        max_iter=settings.max_iter,
        c=settings.c,
    )
    result.history.to_csv(out_dir / "iterates.csv")
    result.trajectory.to_csv(out_dir / "trajectory.csv")
    _write_state(result.trajectory.final_state(), out_dir, "state_final")
    if render:
        plots.iterates_figure(result.history, out_dir / "fig_iterates.png")
        plots.state_figure(
            result.trajectory.final_state(), out_dir / "fig_state_final.png",
            title=f"state at t = {settings.t0:g}",
        )
    results = {
        "t0": settings.t0,
        "n_iterations": result.n_iterations,
        "final_distance": result.final_distance,
        "data_norm": pc.data_norm(s0),
    }
    return results, True


def _cmd_ode(cfg: RunConfig, out_dir: Path, render: bool):
    result = ode_solve(cfg.params, cfg.ode.y0, cfg.time.t_end, cfg.time.dt)
    result.to_csv(out_dir / "ode.csv")
    if render:
        plots.ode_figure(result, out_dir / "fig_ode.png")
    final = result.final()
    return {"t_end": cfg.time.t_end, "final": [float(x) for x in final]}, True


def _cmd_equilibria(cfg: RunConfig, out_dir: Path, render: bool):
    report = eq.find_equilibria(cfg.params)
    report.to_csv(out_dir / "equilibria.csv")
    if render:
        plots.equilibria_figure(report, out_dir / "fig_equilibria.png")
    results = {
        "n_states": len(report.states),
        "absent_branches": list(report.absent_branches),
        "states": [
            {
                "state": list(e.state),
                "branch": e.branch,
                "class": e.classification,
                "max_re": e.max_real_part,
            }
            for e in report.states
        ],
    }
    return results, True


def _family_and_state(cfg: RunConfig):
    settings = cfg.bifurcate
    p = cfg.params
    if settings.family == "e1":
        family = lambda h: e1_params(h, d=p.d)  # noqa: E731
    elif settings.family == "e2":
        family = lambda h: e2_params(h, d=p.d)  # noqa: E731
    else:
        family = lambda h: dataclasses.replace(p, h=h)  # noqa: E731
    if settings.state == "auto":
        if settings.family in ("e1", "e2"):
            state = (0.5, 0.5, 0.5)
        else:
            state = lambda h: eq.tracked_interior_state(family(h))  # noqa: E731
    else:
        state = settings.state
    return family, state


def _cmd_bifurcate(cfg: RunConfig, out_dir: Path, render: bool):
    settings = cfg.bifurcate
    family, state = _family_and_state(cfg)
    state_of = state if callable(state) else (lambda _h: state)

    hs = np.linspace(settings.h_lo, settings.h_hi, settings.curve_points)
    curve = []
    for h in hs:
        try:
            curve.append((float(h), eq.max_real_part(family(float(h)), state_of(float(h)))))
        except ValueError:
            curve.append((float(h), None))  # tracked state lost here; row stays empty
    write_csv(out_dir / "bifurcation_curve.csv", ("h", "max_re"), curve)

    bracket_msg = None
    result = None
    try:
        result = eq.stability_bifurcation(
            family, settings.h_lo, settings.h_hi, state=state, xtol=settings.xtol
        )
    except BracketError as exc:
        bracket_msg = str(exc)
    if render:
        valid = [(h, r) for h, r in curve if r is not None]
        plots.bifurcation_figure(
            [h for h, _ in valid], [r for _, r in valid],
            out_dir / "fig_bifurcation.png",
            h_star=None if result is None else result.h_star,
        )
    if result is None:
        print(f"verdict: {bracket_msg}", file=sys.stderr)
        return {"h_star": None, "no_sign_change": bracket_msg}, False
    result.to_csv(out_dir / "bisection.csv")
    results = {
        "h_star": result.h_star,
        "margin_lo": result.margin_lo,
        "margin_hi": result.margin_hi,
        "bisection_steps": len(result.steps),
    }
    return results, True


def _auto_dispersion_state(cfg: RunConfig):
    report = eq.find_equilibria(cfg.params)
    stable = [e for e in report.states if e.classification == "stable"]
    pool = stable or list(report.states)
    return max(pool, key=lambda e: e.state[0]).state


def _cmd_dispersion(cfg: RunConfig, out_dir: Path, render: bool):
    settings = cfg.dispersion
    state = settings.state if settings.state != "auto" else _auto_dispersion_state(cfg)
    scan = eq.dispersion_scan(cfg.params, state, q_max=settings.q_max, n_q=settings.n_q)
    scan.to_csv(out_dir / "dispersion.csv")
    if render:
        plots.dispersion_figure(scan, out_dir / "fig_dispersion.png")
    results = {
        "state": [float(x) for x in state],
        "stable_at_zero": scan.stable_at_zero,
        "exceeds_zero_mode": scan.exceeds_zero_mode,
        "turing_unstable": scan.turing_unstable,
        "max_re_peak": float(scan.max_re.max()),
    }
    return results, True


def _cmd_invariant(cfg: RunConfig, out_dir: Path, render: bool):
    region = _resolve_region(cfg)
    settings = cfg.region
    verdict = inv.check_invariance(
        cfg.params,
        region,
        cfg.grid,
        cfg.time.t_end,
        cfg.time.dt,
        n_samples=settings.n_samples,
        seed=settings.seed,
    )
    verdict.to_csv(out_dir / "verdicts.csv")
    if render:
        plots.verdict_figure(verdict, out_dir / "fig_invariant.png")
    results = {
        "region": {"kind": region.kind, "lo": list(region.lo), "hi": list(region.hi)},
        "n_samples": len(verdict.samples),
        "n_pass": verdict.n_pass,
    }
    return results, verdict.passed


def _cmd_absorb(cfg: RunConfig, out_dir: Path, render: bool):
    settings = cfg.region
    base = _resolve_region(cfg)
    s0 = _initial_state(cfg, base.box())
    report = inv.measure_absorption(
        cfg.params,
        s0,
        cfg.time.t_end,
        cfg.time.dt,
        eps=settings.eps,
        region=base,
        inflate_lo=(settings.kind == "R-natural"),
    )
    report.to_csv(out_dir / "absorption.csv")
    report.trajectory.to_csv(out_dir / "trajectory.csv")
    if render:
        plots.absorption_figure(report, out_dir / "fig_absorb.png")
    results = {
        "eps": settings.eps,
        "t_eps": report.t_eps,
        "per_component": dict(report.per_component),
        "absorbed": report.absorbed,
    }
    return results, report.absorbed


_HANDLERS = {
    "simulate": _cmd_simulate,
    "picard": _cmd_picard,
    "ode": _cmd_ode,
    "equilibria": _cmd_equilibria,
    "bifurcate": _cmd_bifurcate,
    "dispersion": _cmd_dispersion,
    "invariant": _cmd_invariant,
    "absorb": _cmd_absorb,
}


if __name__ == "__main__":
    raise SystemExit(main())
