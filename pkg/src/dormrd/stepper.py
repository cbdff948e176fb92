"""Reference time integration and the space-free comparison machinery.

The PDE stepper is a Strang splitting: exact half diffusion steps around an
explicit second-order reaction substep.  Inside the reaction substep the
prey and hunter equations take a Heun step while the dormant equation,
whose linear loss ``-rho*w`` can be stiff, is advanced by a two-stage
exponential integrator in the same predictor/corrector pattern.  Because
the corrector is exact for constant states, spatially flat equilibria of
the reaction are preserved to round-off, and diffusion leaves them
untouched.

`ode_solve` integrates the plain reaction ODEs with classical RK4 for
space-free runs, and `comparison_check` tests recorded sup norms against
the closed-form scalar bounds that cap prey and hunters from above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericGuardError
from .grid import COMPONENT_NAMES, Field, Grid, State, Trajectory, box_violation
from .model import Params, reaction, reaction_lipschitz, thresholds, uniform_bound
from .semigroup import SemigroupPlan

NEG_STEP_TOLERANCE = 1e-12  # relative negativity budget per step
PREY_ONLY = (1.0, 0.0, 0.0)


def _phi1(z: float) -> float:
    if abs(z) < 1e-6:
        return 1.0 + z / 2.0 + z * z / 6.0
    return math.expm1(z) / z


def _phi2(z: float) -> float:
    if abs(z) < 1e-6:
        return 0.5 + z / 6.0 + z * z / 24.0
    return (math.expm1(z) - z) / (z * z)


@dataclass
class StepPlan:
    """Frozen step size plus the spectral and exponential coefficients it needs."""

    params: Params
    grid: Grid
    dt: float

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive and finite, got {self.dt!r}")
        self.plan_u = SemigroupPlan(self.grid, 1.0)
        self.plan_v = SemigroupPlan(self.grid, self.params.d)
        z = -self.params.rho * self.dt
        self.w_decay = math.exp(z)
        self.w_phi1 = _phi1(z)
        self.w_phi2 = _phi2(z)


def _reaction_substep(plan: StepPlan, u, v, w):
    p = plan.params
    dt = plan.dt
    f1a, f2a, f3a = reaction(p, u, v, w)
    ga = f3a + p.rho * w  # production terms only; the linear loss is exact
    u_pred = u + dt * f1a
    v_pred = v + dt * f2a
    w_pred = plan.w_decay * w + dt * plan.w_phi1 * ga
    f1b, f2b, f3b = reaction(p, u_pred, v_pred, w_pred)
    gb = f3b + p.rho * w_pred
    u_new = u + 0.5 * dt * (f1a + f1b)
    v_new = v + 0.5 * dt * (f2a + f2b)
    w_new = plan.w_decay * w + dt * (plan.w_phi1 * ga + plan.w_phi2 * (gb - ga))
    return u_new, v_new, w_new


def _clamp_nonneg(values: np.ndarray, label: str, t: float) -> tuple[np.ndarray, float]:
    low = float(values.min())
    if low >= 0.0:
        return values, 0.0
    scale = max(1.0, float(np.abs(values).max()))
    if low < -NEG_STEP_TOLERANCE * scale:
        raise NumericGuardError(
            f"{label} reached {low:.6e} at t={t:.6g}; negativity beyond the "
            f"{NEG_STEP_TOLERANCE:g} relative budget"
        )
    return np.where(values < 0.0, 0.0, values), -low


def step(plan: StepPlan, state: State) -> State:
    """One Strang step of the full system (half diffusion, reaction, half diffusion)."""
    arrays, _ = _step_raw(
        plan,
        state.u.values,
        state.v.values,
        state.w.values,
        t=0.0,
    )
    return State(*(Field(plan.grid, a) for a in arrays))


def _step_raw(plan: StepPlan, u, v, w, t: float):
    half = 0.5 * plan.dt
    u = plan.plan_u.heat_raw(u, half)
    v = plan.plan_v.heat_raw(v, half)
    u, v, w = _reaction_substep(plan, u, v, w)
    clamp = 0.0
    clamped = []
    for label, values in zip(COMPONENT_NAMES, (u, v, w)):
        values, amount = _clamp_nonneg(values, label, t)
        clamp = max(clamp, amount)
        clamped.append(values)
    u, v, w = clamped
    u = plan.plan_u.heat_raw(u, half)
    v = plan.plan_v.heat_raw(v, half)
    return (u, v, w), clamp


def _resolve_steps(t_end: float, dt: float) -> int:
    n_steps = int(round(t_end / dt))
    if n_steps < 1 or abs(n_steps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError(f"t_end={t_end!r} is not a positive multiple of dt={dt!r}")
    return n_steps


def integrate(
    plan: StepPlan,
    state: State,
    t_end: float,
    *,
    sample_every: int = 1,
    snapshot_every: int | None = None,
    snapshot_times=(),
    region=None,
    region_tol: float = 1e-8,
    targets=(PREY_ONLY,),
    track_gradient: bool = False,
    guard_factor: float = 10.0,
    lipschitz_check: bool = True,
) -> Trajectory:
    """March the system to ``t_end`` and record summaries along the way.

    Summaries (componentwise extrema, sup distance to each target constant
    state, optional box membership and dormant-field gradient) are recorded
    every ``sample_every`` steps plus at the start and the end.  Full states
    are stored at multiples of ``snapshot_every`` steps and at the times in
    ``snapshot_times`` (which must land on step boundaries).  When a
    ``region=(lo, hi)`` box is given, every step is checked and the first
    exit is recorded with its time, component, and node.

    Guards: data must be nonnegative; ``dt`` must resolve the reaction
    (``dt * L <= 0.5`` for the box Lipschitz constant, unless
    ``lipschitz_check=False``); any sup norm beyond ``guard_factor`` times
    the a-priori bound of the data aborts with `NumericGuardError`.
    """
    p = plan.params
    dt = plan.dt
    n_steps = _resolve_steps(t_end, dt)
    if sample_every < 1:
        raise ValueError(f"sample_every must be >= 1, got {sample_every!r}")
    if min(state.inf()) < 0:
        raise ValueError("initial data must be nonnegative")

    ceiling = uniform_bound(p, *state.sup())
    if lipschitz_check:
        lipschitz = reaction_lipschitz(p, (ceiling, ceiling, ceiling))
        if dt * lipschitz > 0.5:
            raise ValueError(
                f"dt={dt:g} too large for the reaction: dt * L = {dt * lipschitz:.3g} > 0.5 "
                f"(L={lipschitz:.3g} on the a-priori box)"
            )
    guard = guard_factor * ceiling

    targets = tuple(tuple(float(x) for x in tgt) for tgt in targets)
    if not targets or targets[0] != PREY_ONLY:
        targets = (PREY_ONLY,) + tuple(t for t in targets if t != PREY_ONLY)

    snapshot_steps = {0, n_steps}
    if snapshot_every is not None:
        if snapshot_every < 1:
            raise ValueError(f"snapshot_every must be >= 1, got {snapshot_every!r}")
        snapshot_steps.update(range(0, n_steps + 1, snapshot_every))
    for t_snap in snapshot_times:
        k = int(round(float(t_snap) / dt))
        if k < 0 or k > n_steps or abs(k * dt - float(t_snap)) > 1e-9 * max(1.0, abs(t_snap)):
            raise ValueError(f"snapshot time {t_snap!r} does not land on a step boundary")
        snapshot_steps.add(k)

    if region is not None:
        lo, hi = region
        lo = tuple(float(x) for x in lo)
        hi = tuple(float(x) for x in hi)

    u, v, w = (np.array(f.values, copy=True) for f in state.components)

    times, sups, infs, dists, flags, grads = [], [], [], [], [], []
    snapshots: dict[int, State] = {}
    snapshot_index: dict[int, int] = {}
    first_exit = None
    max_clamp = 0.0

    def record(k: int, t: float) -> None:
        times.append(t)
        sups.append([float(a.max()) for a in (u, v, w)])
        infs.append([float(a.min()) for a in (u, v, w)])
        dists.append(
            [
                max(float(np.abs(a - c).max()) for a, c in zip((u, v, w), tgt))
                for tgt in targets
            ]
        )
        if region is not None:
            flags.append(0 if exited_now else 1)
        if track_gradient:
            grads.append(_gradient_sup_raw(w, plan.grid))
        if k in snapshot_steps:
            snapshots[len(times) - 1] = State(*(Field(plan.grid, np.array(a)) for a in (u, v, w)))
            snapshot_index[len(times) - 1] = k

    exited_now = False
    if region is not None:
        hit = box_violation(state, lo, hi, region_tol)
        exited_now = hit is not None
        if exited_now:
            first_exit = (0.0, hit[0], hit[1], hit[2])
    record(0, 0.0)

    for k in range(1, n_steps + 1):
        t = k * dt
        (u, v, w), clamp = _step_raw(plan, u, v, w, t)
        max_clamp = max(max_clamp, clamp)
        worst = max(float(np.abs(a).max()) for a in (u, v, w))
        if not math.isfinite(worst) or worst > guard:
            raise NumericGuardError(
                f"sup norm {worst:.4g} at t={t:.6g} exceeded the blow-up guard "
                f"{guard:.4g} ({guard_factor:g} times the a-priori bound {ceiling:.4g})"
            )
        if region is not None:
            exited_now = False
            for ci, a in enumerate((u, v, w)):
                flat = a.ravel()
                bad = (flat < lo[ci] - region_tol) | (flat > hi[ci] + region_tol)
                if bad.any():
                    exited_now = True
                    if first_exit is None:
                        idx = int(np.argmax(bad))
                        first_exit = (t, ci, idx, float(flat[idx]))
                    break
        if k % sample_every == 0 or k == n_steps or k in snapshot_steps:
            record(k, t)

    return Trajectory(
        grid=plan.grid,
        times=np.array(times),
        sup=np.array(sups),
        inf=np.array(infs),
        targets=targets,
        dist=np.array(dists),
        in_region=np.array(flags, dtype=np.int8) if region is not None else None,
        region_box=(lo, hi) if region is not None else None,
        grad_w=np.array(grads) if track_gradient else None,
        snapshots=snapshots,
        snapshot_steps=snapshot_index,
        first_exit=first_exit,
        max_clamp=max_clamp,
    )


def _gradient_sup_raw(values: np.ndarray, grid: Grid) -> float:
    two_dx = 2.0 * grid.dx
    worst = 0.0
    for ax in range(values.ndim):
        diff = (np.roll(values, -1, axis=ax) - np.roll(values, 1, axis=ax)) / two_dx
        worst = max(worst, float(np.abs(diff).max()))
    return worst


@dataclass
class OdeResult:
    """Space-free reaction trajectory."""

    times: np.ndarray
    ys: np.ndarray

    def at(self, t: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no sample at t={t!r}")
        return self.ys[idx]

    def final(self) -> np.ndarray:
        return self.ys[-1]

    def to_csv(self, path) -> None:
        from .csvio import write_csv

        write_csv(
            path,
            ("t", "u", "v", "w"),
            (
                (float(t), float(y[0]), float(y[1]), float(y[2]))
                for t, y in zip(self.times, self.ys)
            ),
        )


def ode_solve(p: Params, y0, t_end: float, dt: float = 1e-3, guard_factor: float = 10.0) -> OdeResult:
    """Classical RK4 for the space-free reaction ODEs from nonnegative data."""
    y = np.array([float(x) for x in y0])
    if y.shape != (3,) or y.min() < 0:
        raise ValueError("y0 must be three nonnegative values")
    n_steps = _resolve_steps(t_end, dt)
    guard = guard_factor * uniform_bound(p, *y)

    def rhs(state):
        return np.array(reaction(p, state[0], state[1], state[2]))

    times = np.empty(n_steps + 1)
    ys = np.empty((n_steps + 1, 3))
    times[0], ys[0] = 0.0, y
    for k in range(1, n_steps + 1):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)) or np.abs(y).max() > guard:
            raise NumericGuardError(f"ODE solution left the guard at t={k * dt:.6g}")
        times[k], ys[k] = k * dt, y
    return OdeResult(times, ys)


def kappa_closed_form(t, kappa0: float):
    """Logistic cap on prey: the solution of k' = (1 - k) k from kappa0 >= 0."""
    if kappa0 < 0:
        raise ValueError(f"kappa0 must be nonnegative, got {kappa0!r}")
    t = np.asarray(t, dtype=float)
    if kappa0 == 0.0:
        return np.zeros_like(t) if t.ndim else 0.0
    out = kappa0 / (kappa0 + (1.0 - kappa0) * np.exp(-t))
    return out if t.ndim else float(out)


def omega_closed_form(t, omega0: float, level: float):
    """Cap on hunters: the solution of o' = (level - o) o from omega0 >= 0."""
    if omega0 < 0:
        raise ValueError(f"omega0 must be nonnegative, got {omega0!r}")
    t = np.asarray(t, dtype=float)
    if omega0 == 0.0:
        return np.zeros_like(t) if t.ndim else 0.0
    if level == 0.0:
        out = omega0 / (1.0 + omega0 * t)
    else:
        out = level * omega0 / (omega0 + (level - omega0) * np.exp(-level * t))
    return out if t.ndim else float(out)


@dataclass
class ComparisonReport:
    """Recorded sup norms versus the scalar comparison bounds."""

    ok: bool
    kappa0: float
    omega0: float | None
    v_level: float | None
    max_excess_u: float
    max_excess_v: float | None
    first_violation: tuple[float, str] | None


def comparison_check(traj: Trajectory, p: Params, kappa0: float | None = None, tol: float = 1e-6) -> ComparisonReport:
    """Check a trajectory's sup norms against the closed-form scalar caps.

    Prey are compared with the logistic cap started from the recorded (or
    supplied) initial sup.  Hunters are compared with ``max(omega(t),
    v_tilde)`` where the cap level ``v_tilde`` comes from `thresholds`; when
    that level is unavailable (``rho == 0``) only prey are checked.
    """
    if kappa0 is None:
        kappa0 = float(traj.sup[0, 0])
    excess_u = traj.sup[:, 0] - kappa_closed_form(traj.times, kappa0)
    max_excess_u = float(excess_u.max())

    th = thresholds(p, kappa0=kappa0)
    omega0 = v_level = None
    max_excess_v = None
    excess_v = None
    if th.v_tilde is not None:
        omega0 = float(traj.sup[0, 1])
        v_level = max(th.v_tilde, 0.0)
        if omega0 > v_level:
            bound_v = omega_closed_form(traj.times, omega0, th.v_tilde)
        else:
            bound_v = np.full_like(traj.times, v_level)
        excess_v = traj.sup[:, 1] - bound_v
        max_excess_v = float(excess_v.max())

    first_violation = None
    for i, t in enumerate(traj.times):
        if excess_u[i] > tol:
            first_violation = (float(t), "u")
            break
        if excess_v is not None and excess_v[i] > tol:
            first_violation = (float(t), "v")
            break
    ok = first_violation is None
    return ComparisonReport(ok, kappa0, omega0, v_level, max_excess_u, max_excess_v, first_violation)
