"""Successive approximation of mild solutions on a short horizon.

Each sweep freezes the previous iterate inside the linear parts: prey feel
diffusion minus the potential ``u + gamma*v/(u + h)`` with the frozen prey
as source, hunters feel ``d``-diffusion minus ``m + v`` with the frozen
conversion and wake-up terms as source, and the dormant field is a scalar
decay against its frozen production.  Data are propagated by the resulting
evolution operators and the sources enter through a Duhamel integral
evaluated with the trapezoid rule; thanks to the exact composition property
of the operators the whole sum telescopes into one recurrence per time
step, so a sweep costs one operator interval per step.

The horizon restriction ``t_end <= c / (M**4 + 1)``, with ``M`` the largest
data norm (including the slope of the dormant field), is what makes the
sweeps contract; `solve` enforces it and `solve_global` builds long
trajectories by restarting from the final state of each short window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .csvio import write_csv
from .errors import ConvergenceError, NumericGuardError
from .grid import Field, Grid, State, Trajectory, gradient_sup
from .model import Params
from .semigroup import EvolutionOperator, SemigroupPlan

PREY_ONLY = (1.0, 0.0, 0.0)
BOUND_SLACK = 1e-9  # relative slack on the 2M iterate ceiling


@dataclass
class IterateHistory:
    """Per-sweep sup norms and distances on the shared time grid."""

    times: np.ndarray
    sups: list[np.ndarray]
    dists: list[np.ndarray]

    def iteration_distances(self) -> list[float]:
        return [float(d.max()) for d in self.dists]

    def to_csv(self, path) -> None:
        def rows():
            for it, sup in enumerate(self.sups):
                dist = self.dists[it - 1] if it > 0 else None
                for j, t in enumerate(self.times):
                    yield (
                        it,
                        float(t),
                        float(sup[j, 0]),
                        float(sup[j, 1]),
                        float(sup[j, 2]),
                        None if dist is None else float(dist[j]),
                    )

        write_csv(path, ("iter", "t", "sup_u", "sup_v", "sup_w", "dist_prev"), rows())


@dataclass
class PicardResult:
    trajectory: Trajectory
    history: IterateHistory
    n_iterations: int
    final_distance: float


def _trajectory_from_arrays(grid: Grid, times: np.ndarray, arrays) -> Trajectory:
    sups, infs, dists = [], [], []
    snapshots, snapshot_steps = {}, {}
    for j, (u, v, w) in enumerate(arrays):
        sups.append([float(a.max()) for a in (u, v, w)])
        infs.append([float(a.min()) for a in (u, v, w)])
        dists.append(
            [max(float(np.abs(a - c).max()) for a, c in zip((u, v, w), PREY_ONLY))]
        )
        snapshots[j] = State(*(Field(grid, a) for a in (u, v, w)))
        snapshot_steps[j] = j
    return Trajectory(
        grid=grid,
        times=np.asarray(times, dtype=float),
        sup=np.array(sups),
        inf=np.array(infs),
        targets=(PREY_ONLY,),
        dist=np.array(dists),
        snapshots=snapshots,
        snapshot_steps=snapshot_steps,
    )


def _check_time_grid(times: np.ndarray) -> None:
    if times.ndim != 1 or len(times) < 2:
        raise ValueError("need at least two time-grid points")
    if times[0] != 0.0 or not np.all(np.diff(times) > 0):
        raise ValueError("time grid must start at 0 and increase strictly")


def _arrays_from(prev: Trajectory):
    arrays = []
    for j in range(len(prev.times)):
        if j not in prev.snapshots:
            raise ValueError(f"iterate is missing the snapshot at index {j}")
        s = prev.snapshots[j]
        arrays.append((s.u.values, s.v.values, s.w.values))
    return arrays


def first_iterate(p: Params, s0: State, times) -> Trajectory:
    """Propagate the data by the uncoupled linear flows (no sources)."""
    times = np.asarray(times, dtype=float)
    _check_time_grid(times)
    if min(s0.inf()) < 0:
        raise ValueError("initial data must be nonnegative")
    grid = s0.grid
    plan_u = SemigroupPlan(grid, 1.0)
    plan_v = SemigroupPlan(grid, p.d)
    arrays = []
    for t in times:
        u = plan_u.heat_raw(s0.u.values, float(t)) if t > 0 else np.array(s0.u.values)
        v = math.exp(-p.m * float(t)) * (
            plan_v.heat_raw(s0.v.values, float(t)) if t > 0 else s0.v.values
        )
        w = math.exp(-p.rho * float(t)) * s0.w.values
        arrays.append((u, np.asarray(v), np.asarray(w)))
    return _trajectory_from_arrays(grid, times, arrays)


def next_iterate(p: Params, s0: State, prev: Trajectory) -> Trajectory:
    """One corrective sweep with coefficients and sources frozen at ``prev``."""
    times = prev.times
    _check_time_grid(times)
    grid = prev.grid
    old = _arrays_from(prev)
    for j, (u, v, w) in enumerate(old):
        if min(u.min(), v.min(), w.min()) < 0:
            raise NumericGuardError(f"previous iterate is negative at index {j}")

    psi_u, psi_v, zeta, chi, gw = [], [], [], [], []
    for u, v, w in old:
        hol = u / (u + p.h)
        psi_u.append(u + p.gamma * v / (u + p.h))
        psi_v.append(np.full(grid.shape, p.m) + v)
        zeta.append(u)
        chi.append(p.mu * hol * v + p.alpha * w)
        gw.append(p.nu * hol * v + p.theta * v)

    op_u = EvolutionOperator(SemigroupPlan(grid, 1.0), times, psi_u)
    op_v = EvolutionOperator(SemigroupPlan(grid, p.d), times, psi_v)

    u = np.array(s0.u.values)
    v = np.array(s0.v.values)
    w = np.array(s0.w.values)
    arrays = [(u, v, w)]
    for j in range(len(times) - 1):
        dt = float(times[j + 1] - times[j])
        half = 0.5 * dt
        u = op_u.interval_raw(u + half * zeta[j], j) + half * zeta[j + 1]
        v = op_v.interval_raw(v + half * chi[j], j) + half * chi[j + 1]
        w = math.exp(-p.rho * dt) * (w + half * gw[j]) + half * gw[j + 1]
        arrays.append((u, v, w))
    return _trajectory_from_arrays(grid, times, arrays)


def iterate_distance(a: Trajectory, b: Trajectory) -> np.ndarray:
    """Componentwise-max sup distance between two iterates at each shared time."""
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times):
        raise ValueError("iterates live on different time grids")
    out = np.empty(len(a.times))
    for j in range(len(a.times)):
        sa, sb = a.snapshots[j], b.snapshots[j]
        out[j] = max(
            float(np.abs(fa.values - fb.values).max())
            for fa, fb in zip(sa.components, sb.components)
        )
    return out


def data_norm(s0: State) -> float:
    """Largest sup norm among the components and the dormant-field slope."""
    return max(*s0.sup(), gradient_sup(s0.w))


def solve(
    p: Params,
    s0: State,
    t_end: float,
    n_steps: int | None = None,
    tol: float = 1e-8,
    max_iter: int = 60,
    c: float = 1.0,
) -> PicardResult:
    """Iterate sweeps on [0, t_end] until successive iterates are ``tol``-close.

    Requires nonnegative data and the contraction horizon
    ``t_end <= c / (M**4 + 1)`` with ``M = data_norm(s0)``.  Every iterate is
    checked to stay nonnegative and below ``2 * M``; a violation means the
    construction lost its footing and raises `NumericGuardError` rather than
    returning garbage.  Raises `ConvergenceError` after ``max_iter`` sweeps.
    """
    if min(s0.inf()) < 0:
        raise ValueError("initial data must be nonnegative")
    if not (math.isfinite(c) and c > 0):
        raise ValueError(f"horizon constant c must be positive, got {c!r}")
    if not (math.isfinite(t_end) and t_end > 0):
        raise ValueError(f"t_end must be positive, got {t_end!r}")
    M = data_norm(s0)
    horizon = c / (M**4 + 1.0)
    if t_end > horizon * (1.0 + 1e-12):
        raise ValueError(
            f"t_end={t_end:.6g} exceeds the contraction horizon {horizon:.6g} "
            f"(= c/(M^4+1) with M={M:.6g}); shorten it or raise c deliberately"
        )
    if n_steps is None:
        n_steps = max(1, math.ceil(t_end / 0.01))
    times = np.linspace(0.0, t_end, n_steps + 1)

    ceiling = 2.0 * M * (1.0 + BOUND_SLACK) + 1e-12
    current = first_iterate(p, s0, times)
    _check_iterate_bounds(current, ceiling, 0)
    history = IterateHistory(times=times, sups=[np.array(current.sup)], dists=[])

    for sweep in range(1, max_iter + 1):
        nxt = next_iterate(p, s0, current)
        _check_iterate_bounds(nxt, ceiling, sweep)
        dist = iterate_distance(nxt, current)
        history.sups.append(np.array(nxt.sup))
        history.dists.append(dist)
        current = nxt
        final_distance = float(dist.max())
        if final_distance < tol:
            return PicardResult(current, history, sweep, final_distance)
    raise ConvergenceError(
        f"no contraction below tol={tol:g} after {max_iter} sweeps "
        f"(last distance {history.iteration_distances()[-1]:.3e})",
        history.iteration_distances(),
    )


def _check_iterate_bounds(traj: Trajectory, ceiling: float, sweep: int) -> None:
    low = float(traj.inf.min())
    high = float(traj.sup.max())
    if low < 0:
        raise NumericGuardError(f"sweep {sweep} produced a negative value ({low:.3e})")
    if high > ceiling:
        raise NumericGuardError(
            f"sweep {sweep} left the a-priori ball: sup {high:.6g} > {ceiling:.6g}"
        )


def solve_global(
    p: Params,
    s0: State,
    t_end: float,
    window: float = 0.25,
    dt: float = 0.01,
    tol: float = 1e-8,
    max_iter: int = 60,
    c: float = 1.0,
) -> Trajectory:
    """Concatenate short-horizon solves, restarting from each window's final state.

    Window lengths adapt to the current data norm so the contraction
    precondition holds on every window.  The returned trajectory carries the
    summary series of all windows and one final snapshot.
    """
    if not (math.isfinite(t_end) and t_end > 0):
        raise ValueError(f"t_end must be positive, got {t_end!r}")
    state = s0
    offset = 0.0
    times, sups, infs, dists = [], [], [], []
    final = None
    while t_end - offset > 1e-12:
        M = data_norm(state)
        cap = 0.999 * c / (M**4 + 1.0)
        span = min(window, cap, t_end - offset)
        n = max(1, math.ceil(span / dt - 1e-9))
        result = solve(p, state, span, n, tol=tol, max_iter=max_iter, c=c)
        traj = result.trajectory
        start = 1 if times else 0  # duplicate seam points are dropped
        times.extend((offset + traj.times[start:]).tolist())
        sups.extend(traj.sup[start:].tolist())
        infs.extend(traj.inf[start:].tolist())
        dists.extend(traj.dist[start:].tolist())
        state = traj.final_state()
        final = state
        offset += span
    last = len(times) - 1
    return Trajectory(
        grid=s0.grid,
        times=np.array(times),
        sup=np.array(sups),
        inf=np.array(infs),
        targets=(PREY_ONLY,),
        dist=np.array(dists),
        snapshots={last: final},
        snapshot_steps={last: last},
    )


def mild_residual(p: Params, s0: State, traj: Trajectory) -> float:
    """Sup-norm defect of a trajectory in the plain Duhamel form.

    The full reaction terms are propagated by the bare linear flows (heat
    for prey, ``d``-heat with ``exp(-m t)`` for hunters, ``exp(-rho t)`` for
    the dormant field) and integrated with the trapezoid rule.  This shares
    no frozen-coefficient machinery with the sweeps, so it cross-checks the
    construction they converge to.
    """
    times = traj.times
    _check_time_grid(times)
    grid = traj.grid
    arrays = _arrays_from(traj)
    plan_u = SemigroupPlan(grid, 1.0)
    plan_v = SemigroupPlan(grid, p.d)

    f1s, f2s, f3s = [], [], []
    for u, v, w in arrays:
        hol = u / (u + p.h)
        f1s.append((1.0 - u) * u - p.gamma * hol * v)
        f2s.append(p.mu * hol * v + p.alpha * w - v * v)  # -m*v sits in the flow
        f3s.append(p.nu * hol * v + p.theta * v)

    worst = 0.0
    for j in range(1, len(times)):
        t = float(times[j])
        acc_u = plan_u.heat_raw(s0.u.values, t)
        acc_v = math.exp(-p.m * t) * plan_v.heat_raw(s0.v.values, t)
        acc_w = math.exp(-p.rho * t) * s0.w.values
        for k in range(j + 1):
            weight = float(times[min(k + 1, j)] - times[max(k - 1, 0)]) / 2.0
            lag = t - float(times[k])
            acc_u = acc_u + weight * (plan_u.heat_raw(f1s[k], lag) if lag > 0 else f1s[k])
            acc_v = acc_v + weight * math.exp(-p.m * lag) * (
                plan_v.heat_raw(f2s[k], lag) if lag > 0 else f2s[k]
            )
            acc_w = acc_w + weight * math.exp(-p.rho * lag) * f3s[k]
        u, v, w = arrays[j]
        worst = max(
            worst,
            float(np.abs(u - acc_u).max()),
            float(np.abs(v - acc_v).max()),
            float(np.abs(w - acc_w).max()),
        )
    return worst
