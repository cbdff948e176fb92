"""Model parameters, reaction terms, and analytic threshold quantities.

The model couples three nonnegative fields: prey ``u``, hunting predators
``v``, and dormant predators ``w``.  Prey reproduce logistically and are
consumed through a saturating response ``u / (u + h)``; hunting predators
convert consumption with rate ``mu``, wake from dormancy with rate
``alpha``, and are lost at rate ``m + v``; dormant predators are produced
by conversion (``nu``) and by falling asleep (``theta``) and are lost at
rate ``rho``.  Prey diffuse with unit coefficient, hunters with ``d``, and
the dormant stage does not move, so its equation is a pointwise ODE slaved
to the other two.

`thresholds` collects the closed-form ceiling and floor levels used by the
comparison arguments and the invariant boxes.  Every quantity whose formula
divides by ``rho`` is reported as ``None`` when ``rho == 0``, and the floor
levels are ``None`` whenever their positivity conditions fail, so absent
values are explicit rather than silently wrong.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Params:
    """Rate constants.  ``d`` and ``h`` must be positive, the rest nonnegative."""

    d: float
    h: float
    gamma: float
    alpha: float
    theta: float
    m: float
    rho: float
    mu: float
    nu: float

    def __post_init__(self):
        for name in ("d", "h"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        for name in ("gamma", "alpha", "theta", "m", "rho", "mu", "nu"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be nonnegative and finite, got {value!r}")


@dataclass(frozen=True)
class Thresholds:
    """Ceiling/floor levels derived from the reaction terms.

    ``v_bar``/``w_bar`` cap hunting and dormant predators once prey have
    settled under 1; ``v_tilde``/``w_tilde`` are the same caps with the
    initial prey level ``kappa0`` in place of 1; ``u_under``/``v_under``/
    ``w_under`` bound the lower invariant box; ``v_flat``/``w_flat`` locate
    the prey-free equilibrium.  ``None`` marks a level whose defining
    condition fails.
    """

    kappa0: float
    v_bar: float | None
    w_bar: float | None
    v_tilde: float | None
    w_tilde: float | None
    u_under: float | None
    v_under: float | None
    w_under: float | None
    v_flat: float | None
    w_flat: float | None


def reaction(p: Params, u, v, w):
    """Pointwise reaction terms (no diffusion).  Works on scalars or arrays.

    Raises ValueError if any prey value is at or below ``-h``, where the
    saturating response is undefined.
    """
    if np.any(np.asarray(u) <= -p.h):
        raise ValueError("prey value at or below -h: saturating response undefined")
    hol = u / (u + p.h)
    f1 = (1.0 - u) * u - p.gamma * hol * v
    f2 = p.mu * hol * v + p.alpha * w - (p.m + v) * v
    f3 = p.nu * hol * v + p.theta * v - p.rho * w
    return f1, f2, f3


def jacobian(p: Params, u: float, v: float, w: float) -> np.ndarray:
    """Jacobian of the reaction terms at a single state, rows in (u, v, w) order."""
    if u <= -p.h:
        raise ValueError("prey value at or below -h: saturating response undefined")
    s = u + p.h
    hol = u / s
    sat = p.h / (s * s)  # d/du of the saturating response
    return np.array(
        [
            [1.0 - 2.0 * u - p.gamma * sat * v, -p.gamma * hol, 0.0],
            [p.mu * sat * v, p.mu * hol - p.m - 2.0 * v, p.alpha],
            [p.nu * sat * v, p.nu * hol + p.theta, -p.rho],
        ]
    )


def thresholds(p: Params, kappa0: float = 1.0) -> Thresholds:
    """Evaluate all threshold levels for data with initial prey cap ``kappa0``."""
    if not (math.isfinite(kappa0) and kappa0 >= 0):
        raise ValueError(f"kappa0 must be nonnegative and finite, got {kappa0!r}")
    if p.rho == 0.0:
        return Thresholds(kappa0, None, None, None, None, None, None, None, None, None)

    def v_cap(level: float) -> float:
        s = level + p.h
        return p.mu * level / s + p.alpha * (p.nu * level + p.theta * s) / (p.rho * s) - p.m

    def w_cap(level: float, vcap: float) -> float:
        s = level + p.h
        return (p.nu * level + p.theta * s) * vcap / (p.rho * s)

    v_bar = v_cap(1.0)
    w_bar = w_cap(1.0, v_bar)
    v_tilde = v_cap(kappa0)
    w_tilde = w_cap(kappa0, v_tilde)
    v_flat = p.alpha * p.theta / p.rho - p.m
    w_flat = p.theta * v_flat / p.rho

    u_under = v_under = w_under = None
    if v_bar > 0.0:
        disc = (1.0 + p.h) ** 2 - 4.0 * p.gamma * v_bar
        if disc >= 0.0:
            cand = 0.5 * (1.0 - p.h) + 0.5 * math.sqrt(disc)
            if cand > 0.0:
                u_under = cand
                s = u_under + p.h
                v_cand = (
                    p.mu * u_under / s
                    + p.alpha * p.nu * u_under / (p.rho * s)
                    + p.alpha * p.theta / p.rho
                    - p.m
                )
                if v_cand > 0.0:
                    v_under = v_cand
                    w_cand = p.nu * u_under * v_cand / (p.rho * s) + p.theta * v_cand / p.rho
                    if w_cand > 0.0:
                        w_under = w_cand
    return Thresholds(
        kappa0,
        v_bar,
        w_bar,
        v_tilde,
        w_tilde,
        u_under,
        v_under,
        w_under,
        v_flat,
        w_flat,
    )


def uniform_bound(p: Params, sup_u: float, sup_v: float, sup_w: float) -> float:
    """A-priori sup ceiling for trajectories started from data with the given norms.

    The maximum of 1, the data norms, and the predator ceilings (both the
    settled ones and the ones seeded by the initial prey level).
    """
    th = thresholds(p, kappa0=max(sup_u, 1.0))
    values = [1.0, sup_u, sup_v, sup_w]
    for level in (th.v_bar, th.v_tilde, th.w_bar, th.w_tilde):
        if level is not None:
            values.append(level)
    return max(values)


def reaction_lipschitz(p: Params, hi, n_grid: int = 5) -> float:
    """Max absolute Jacobian row sum over a coarse grid of [0, hi_u] x [0, hi_v] x [0, hi_w].

    An explicit-step stability bound: any one-sided Lipschitz constant of the
    reaction on that box is below this value.
    """
    worst = 0.0
    for u in np.linspace(0.0, hi[0], n_grid):
        for v in np.linspace(0.0, hi[1], n_grid):
            for w in np.linspace(0.0, hi[2], n_grid):
                worst = max(worst, float(np.abs(jacobian(p, u, v, w)).sum(axis=1).max()))
    return worst


def e1_params(h: float, d: float = 1.0) -> Params:
    """Reference family with no sleeping and no intrinsic mortality.

    The constant state (1/2, 1/2, 1/2) is stationary for every ``h > 0``.
    """
    gamma = h + 0.5
    return Params(
        d=d, h=h, gamma=gamma, alpha=0.25, theta=0.0, m=0.0, rho=0.25,
        mu=0.5 * gamma, nu=0.5 * gamma,
    )


def e2_params(h: float, d: float = 1.0) -> Params:
    """Companion reference family with sleeping, mortality, and heavier conversion.

    Shares the stationary state (1/2, 1/2, 1/2) with `e1_params` for every
    ``h > 0``.
    """
    gamma = h + 0.5
    return Params(
        d=d, h=h, gamma=gamma, alpha=0.25, theta=0.25, m=0.125, rho=0.5,
        mu=0.75 * gamma, nu=0.5 * gamma,
    )


def random_params(rng: np.random.Generator, reduction_consistent: bool = True) -> Params:
    """Draw a random parameter set for property tests and censuses.

    With ``reduction_consistent=True`` the loss rates are built from
    nonnegative elementary rates (sleeping ``theta`` plus a death rate for
    ``m``, waking ``alpha`` plus a death rate for ``rho``), which is how the
    model is derived; otherwise all rates are drawn independently.
    """
    d = rng.uniform(0.1, 3.0)
    h = rng.uniform(0.02, 3.0)
    gamma = rng.uniform(0.0, 3.0)
    mu = rng.uniform(0.0, 2.0)
    nu = rng.uniform(0.0, 2.0)
    theta = rng.uniform(0.0, 1.0)
    alpha = rng.uniform(0.0, 1.0)
    if reduction_consistent:
        m = theta + rng.uniform(0.0, 1.0)
        rho = alpha + rng.uniform(0.01, 1.0)
    else:
        m = rng.uniform(0.0, 1.0)
        rho = rng.uniform(0.01, 1.0)
    return Params(d=d, h=h, gamma=gamma, alpha=alpha, theta=theta, m=m, rho=rho, mu=mu, nu=nu)
