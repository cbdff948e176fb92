"""Box invariance, absorption times, and the lower (persistence) region.

The upper region is the product box [0, 1] x [0, v_bar] x [0, w_bar] built
from the threshold levels; the lower region keeps the same ceilings but
raises the floors to (u_under, v_under, w_under).  `check_invariance` runs
seeded trajectories from random data inside a box and reports the first
exit of each, `measure_absorption` reports when a trajectory enters an
eps-inflated box for good, and `check_lower_region` does both for the
floored box.  Sample runs are independent, so they can be spread over
threads with the RD_THREADS environment variable (unset or 1 means serial,
0 means one thread per CPU); results are aggregated in sample order either
way.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .csvio import write_csv
from .grid import COMPONENT_NAMES, Grid, State, Trajectory, initial_data
from .model import Params, thresholds
from .stepper import StepPlan, integrate


@dataclass(frozen=True)
class RegionSpec:
    """A closed product box with a membership tolerance."""

    kind: str
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    tol: float = 1e-8

    def __post_init__(self):
        for ci in range(3):
            if not (self.lo[ci] <= self.hi[ci]):
                raise ValueError(
                    f"empty box in {COMPONENT_NAMES[ci]}: [{self.lo[ci]}, {self.hi[ci]}]"
                )
        if self.tol < 0:
            raise ValueError(f"tol must be nonnegative, got {self.tol!r}")

    def box(self) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
        return (self.lo, self.hi)

    def inflated(self, eps: float, inflate_lo: bool = False) -> "RegionSpec":
        if eps < 0:
            raise ValueError(f"eps must be nonnegative, got {eps!r}")
        hi = tuple(x + eps for x in self.hi)
        lo = tuple(x - eps for x in self.lo) if inflate_lo else self.lo
        return RegionSpec(kind=f"{self.kind}+{eps:g}", lo=lo, hi=hi, tol=self.tol)


def region_upper(p: Params, tol: float = 1e-8) -> RegionSpec:
    """The box [0,1] x [0, v_bar] x [0, w_bar]; needs positive ceilings."""
    th = thresholds(p)
    if th.v_bar is None or not (th.v_bar > 0):
        raise ValueError(
            "upper region undefined: the hunter ceiling is "
            + ("absent (rho = 0)" if th.v_bar is None else f"nonpositive ({th.v_bar:g})")
        )
    return RegionSpec(kind="R", lo=(0.0, 0.0, 0.0), hi=(1.0, th.v_bar, th.w_bar), tol=tol)


def region_lower(p: Params, tol: float = 1e-8) -> RegionSpec:
    """The floored box [u_under,1] x [v_under,v_bar] x [w_under,w_bar]."""
    th = thresholds(p)
    missing = [
        name
        for name, val in (
            ("u_under", th.u_under),
            ("v_under", th.v_under),
            ("w_under", th.w_under),
        )
        if val is None
    ]
    if missing:
        raise ValueError(
            "lower region undefined: floor level(s) "
            + ", ".join(missing)
            + " are absent for these parameters"
        )
    return RegionSpec(
        kind="R-natural",
        lo=(th.u_under, th.v_under, th.w_under),
        hi=(1.0, th.v_bar, th.w_bar),
        tol=tol,
    )


def region_custom(lo, hi, tol: float = 1e-8) -> RegionSpec:
    return RegionSpec(kind="custom", lo=tuple(map(float, lo)), hi=tuple(map(float, hi)), tol=tol)


def _thread_count() -> int:
    raw = os.environ.get("RD_THREADS")
    if raw is None or raw.strip() == "":
        return 1
    try:
        count = int(raw)
    except ValueError as exc:
        raise ValueError(f"RD_THREADS must be an integer, got {raw!r}") from exc
    if count < 0:
        raise ValueError(f"RD_THREADS must be >= 0, got {count}")
    if count == 0:
        return os.cpu_count() or 1
    return count


def _ordered_map(fn, items):
    workers = _thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class SampleVerdict:
    sample: int
    seed: int
    passed: bool
    first_exit_t: float | None
    component: str | None
    t_eps: float | None


@dataclass
class Verdict:
    region: RegionSpec
    t_end: float
    samples: list[SampleVerdict]
    trajectories: list[Trajectory] | None = None

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.samples)

    @property
    def n_pass(self) -> int:
        return sum(1 for s in self.samples if s.passed)

    def to_csv(self, path) -> None:
        write_csv(
            path,
            ("sample", "seed", "pass", "first_exit_t", "component", "T_eps"),
            (
                (s.sample, s.seed, s.passed, s.first_exit_t, s.component, s.t_eps)
                for s in self.samples
            ),
        )


def check_invariance(
    p: Params,
    region: RegionSpec,
    grid: Grid,
    t_end: float,
    dt: float,
    n_samples: int = 20,
    seed: int = 0,
    keep_trajectories: bool = False,
) -> Verdict:
    """Run seeded trajectories from random data in the box; report each first exit.

    Sample ``i`` draws its data with ``seed + i``, so verdict rows are
    reproducible individually.  Membership is checked on every step with the
    region's tolerance.
    """
    if n_samples < 1:
        raise ValueError(f"need n_samples >= 1, got {n_samples!r}")
    plan = StepPlan(p, grid, dt)

    def run(i: int) -> tuple[SampleVerdict, Trajectory]:
        s0 = initial_data("box-random", grid, seed=seed + i, box=region.box())
        traj = integrate(
            plan,
            s0,
            t_end,
            region=region.box(),
            region_tol=region.tol,
        )
        exit_info = traj.first_exit
        verdict = SampleVerdict(
            sample=i,
            seed=seed + i,
            passed=exit_info is None,
            first_exit_t=None if exit_info is None else exit_info[0],
            component=None if exit_info is None else COMPONENT_NAMES[exit_info[1]],
            t_eps=None,
        )
        return verdict, traj

    results = _ordered_map(run, list(range(n_samples)))
    return Verdict(
        region=region,
        t_end=t_end,
        samples=[r[0] for r in results],
        trajectories=[r[1] for r in results] if keep_trajectories else None,
    )


def _entry_time(flags: np.ndarray, times: np.ndarray) -> float | None:
    """First time after which the flag stays set through the end, None if never."""
    outside = np.flatnonzero(~flags)
    if len(outside) == 0:
        return 0.0
    last = int(outside[-1])
    if last == len(flags) - 1:
        return None
    return float(times[last + 1])


def _membership_series(traj: Trajectory, lo, hi, tol: float) -> list[np.ndarray]:
    per_component = []
    for ci in range(3):
        inside = (traj.inf[:, ci] >= lo[ci] - tol) & (traj.sup[:, ci] <= hi[ci] + tol)
        per_component.append(inside)
    return per_component


@dataclass
class AbsorptionReport:
    """Entry times into an eps-inflated box (overall and per component)."""

    region: RegionSpec
    eps: float
    t_eps: float | None
    per_component: dict[str, float | None]
    trajectory: Trajectory

    @property
    def absorbed(self) -> bool:
        return self.t_eps is not None

    def to_csv(self, path) -> None:
        rows = []
        for ci, name in enumerate(COMPONENT_NAMES):
            t_c = self.per_component[name]
            rows.append((ci, None, t_c is not None, None, name, t_c))
        rows.append((3, None, self.absorbed, None, "all", self.t_eps))
        write_csv(path, ("sample", "seed", "pass", "first_exit_t", "component", "T_eps"), rows)


def measure_absorption(
    p: Params,
    s0: State,
    t_max: float,
    dt: float,
    eps: float = 0.05,
    region: RegionSpec | None = None,
    inflate_lo: bool = False,
) -> AbsorptionReport:
    """Find when a trajectory enters the eps-inflated box and never leaves again.

    Uses the recorded per-step extrema, so the answer is resolved to one
    step.  ``t_eps`` is None when the trajectory is still outside at
    ``t_max`` (absorption not observed on this horizon).
    """
    if region is None:
        region = region_upper(p)
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    target = region.inflated(eps, inflate_lo=inflate_lo)
    plan = StepPlan(p, s0.grid, dt)
    traj = integrate(plan, s0, t_max, region=target.box(), region_tol=target.tol)
    series = _membership_series(traj, target.lo, target.hi, target.tol)
    per_component = {
        name: _entry_time(series[ci], traj.times) for ci, name in enumerate(COMPONENT_NAMES)
    }
    overall = _entry_time(series[0] & series[1] & series[2], traj.times)
    return AbsorptionReport(
        region=target, eps=eps, t_eps=overall, per_component=per_component, trajectory=traj
    )


@dataclass
class LowerRegionReport:
    """Invariance-style verdict for the floored box."""

    region: RegionSpec
    started_inside: bool
    stayed_inside: bool | None
    entry_t: float | None
    trajectory: Trajectory

    @property
    def passed(self) -> bool:
        if self.started_inside:
            return bool(self.stayed_inside)
        return self.entry_t is not None


def check_lower_region(
    p: Params,
    s0: State,
    t_max: float,
    dt: float,
    eps: float = 0.0,
) -> LowerRegionReport:
    """Track a strictly positive state against the floored box.

    Preconditions are reported, not skipped: the floor levels must exist
    (see `region_lower`) and the prey/hunter data must be strictly
    positive.  With ``eps > 0`` the box is inflated on both sides before
    membership is measured.
    """
    if not (min(s0.inf()) > 0):
        raise ValueError("lower-region check needs strictly positive data in every component")
    region = region_lower(p)
    target = region.inflated(eps, inflate_lo=True) if eps > 0 else region
    if min(target.lo) < 0:
        raise ValueError(f"eps={eps!r} inflates the floor below zero")
    plan = StepPlan(p, s0.grid, dt)
    traj = integrate(plan, s0, t_max, region=target.box(), region_tol=target.tol)
    series = _membership_series(traj, target.lo, target.hi, target.tol)
    flags = series[0] & series[1] & series[2]
    started_inside = bool(flags[0])
    stayed_inside = bool(flags.all()) if started_inside else None
    return LowerRegionReport(
        region=target,
        started_inside=started_inside,
        stayed_inside=stayed_inside,
        entry_t=_entry_time(flags, traj.times),
        trajectory=traj,
    )


def scan_lower_region(params_iter) -> list[Params]:
    """Filter parameter sets whose floored box exists (all floor levels present)."""
    hits = []
    for p in params_iter:
        th = thresholds(p)
        if th.u_under is not None and th.v_under is not None and th.w_under is not None:
            hits.append(p)
    return hits
