"""Exact propagators for the linear parts of the system.

The heat step applies the exact exponential of the central-stencil
Laplacian diagonally in Fourier space, so the linear flow carries no
time-stepping error beyond round-off.  Tiny negative values created by that
round-off (below ``1e-13`` relative to the input) are clamped to zero;
anything larger is left alone so real positivity problems stay visible.

Evolution operators represent the two-parameter flow of ``d*lap - psi(x,t)``
for a nonnegative potential known at snapshot times.  One interval is
applied by Strang substeps (half pointwise decay, full diffusion, half
decay) with the potential interpolated linearly in time and frozen at each
substep midpoint; the substep count keeps ``substep * sup(psi)`` small, so
stiff potentials are handled by more, not larger, splittings.  Midpoint
freezing keeps the interval flow second-order in the substep where freezing
at the left endpoint would drop it to first order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .grid import Field, Grid, laplacian_symbol

NEG_CLAMP_SCALE = 1e-13  # round-off negatives below this (relative) are zeroed
SUBSTEP_BUDGET = 0.1  # largest allowed substep * sup(psi)
_CACHE_LIMIT = 64


@dataclass
class SemigroupPlan:
    """Reusable spectral data for the heat flow with one diffusion coefficient."""

    grid: Grid
    d: float
    _symbol: np.ndarray = dataclass_field(init=False, repr=False)
    _multipliers: dict = dataclass_field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.d) and self.d >= 0):
            raise ValueError(f"diffusion coefficient must be nonnegative, got {self.d!r}")
        self._symbol = laplacian_symbol(self.grid)

    def propagator(self, t: float) -> np.ndarray:
        """Spectral multiplier of the heat flow at time t (cached per t)."""
        multiplier = self._multipliers.get(t)
        if multiplier is None:
            if len(self._multipliers) >= _CACHE_LIMIT:
                self._multipliers.clear()
            multiplier = np.exp(t * self.d * self._symbol)
            self._multipliers[t] = multiplier
        return multiplier

    def heat_raw(self, values: np.ndarray, t: float) -> np.ndarray:
        multiplier = self.propagator(t)
        if self.grid.dim == 1:
            out = np.fft.irfft(np.fft.rfft(values) * multiplier, n=self.grid.n)
        else:
            out = np.fft.irfftn(np.fft.rfftn(values) * multiplier, s=self.grid.shape, axes=(0, 1))
        threshold = NEG_CLAMP_SCALE * float(np.abs(values).max())
        np.copyto(out, 0.0, where=(out < 0.0) & (out > -threshold))
        return out


def heat_apply(plan: SemigroupPlan, f: Field, t: float) -> Field:
    """Exact discrete heat flow of f over time t >= 0."""
    if t < 0:
        raise ValueError(f"heat flow needs t >= 0, got {t!r}")
    if f.grid != plan.grid:
        raise ValueError("field grid does not match plan grid")
    if t == 0.0:
        return f
    return Field(f.grid, plan.heat_raw(f.values, t))


def decay_apply(f: Field, rho: float, t: float) -> Field:
    """Pointwise decay exp(-rho * t) of f, for rho, t >= 0."""
    if rho < 0:
        raise ValueError(f"decay rate must be nonnegative, got {rho!r}")
    if t < 0:
        raise ValueError(f"decay needs t >= 0, got {t!r}")
    if rho == 0.0 or t == 0.0:
        return f
    return Field(f.grid, f.values * math.exp(-rho * t))


class EvolutionOperator:
    """Two-parameter flow of ``d*lap - psi(x, t)`` between snapshot times.

    ``times`` must be strictly increasing and ``psis`` holds one nonnegative
    potential field per time.  Indices into ``times`` select the interval;
    the flow composes exactly across adjacent intervals.
    """

    def __init__(self, plan: SemigroupPlan, times, psis):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or len(times) < 2:
            raise ValueError("need at least two snapshot times")
        if not np.all(np.diff(times) > 0):
            raise ValueError("snapshot times must be strictly increasing")
        if len(psis) != len(times):
            raise ValueError(f"{len(psis)} potential snapshots for {len(times)} times")
        arrays = []
        for k, psi in enumerate(psis):
            values = psi.values if isinstance(psi, Field) else np.asarray(psi, dtype=float)
            if values.shape != plan.grid.shape:
                raise ValueError(f"potential snapshot {k} does not match the grid")
            if values.min() < 0:
                raise ValueError(f"potential snapshot {k} is negative somewhere")
            arrays.append(values)
        self.plan = plan
        self.times = times
        self.psis = arrays

    def interval_raw(self, values: np.ndarray, k: int) -> np.ndarray:
        """Advance raw node values across [times[k], times[k+1]]."""
        dt = float(self.times[k + 1] - self.times[k])
        a, b = self.psis[k], self.psis[k + 1]
        sup_psi = max(float(a.max()), float(b.max()))
        substeps = max(1, math.ceil(dt * sup_psi / SUBSTEP_BUDGET))
        dtau = dt / substeps
        for j in range(substeps):
            psi = a + (b - a) * ((j + 0.5) / substeps)  # substep midpoint
            half = np.exp(-0.5 * dtau * psi)
            values = half * self.plan.heat_raw(half * values, dtau)
        return values


def evolution_apply(op: EvolutionOperator, f: Field, s_index: int, t_index: int) -> Field:
    """Apply the flow from times[s_index] to times[t_index] (s_index <= t_index)."""
    last = len(op.times) - 1
    if not (0 <= s_index <= t_index <= last):
        raise IndexError(f"need 0 <= s_index <= t_index <= {last}, got ({s_index}, {t_index})")
    if f.grid != op.plan.grid:
        raise ValueError("field grid does not match operator grid")
    values = f.values
    for k in range(s_index, t_index):
        values = op.interval_raw(values, k)
    return Field(f.grid, values)


def operator_norm_estimate(
    op: EvolutionOperator, s_index: int = 0, t_index: int | None = None,
    n_samples: int = 20, seed: int = 0,
) -> float:
    """Empirical sup-operator norm over random nonnegative unit-sup inputs."""
    if t_index is None:
        t_index = len(op.times) - 1
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        values = rng.uniform(0.0, 1.0, size=op.plan.grid.shape)
        values /= values.max()
        out = evolution_apply(op, Field(op.plan.grid, values), s_index, t_index)
        worst = max(worst, float(np.abs(out.values).max()))
    return worst
