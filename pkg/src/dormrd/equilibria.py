"""Constant steady states: enumeration, linearization, and parameter scans.

Spatially flat equilibria are found in closed form where possible and
through the prey nullcline cubic otherwise.  With ``W = (nu*u/(u+h) +
theta) * v / rho`` eliminated, interior states satisfy ``(1-u)(u+h) =
gamma * v`` together with a rational equation for ``v(u)`` whose common
denominator turns the problem into one real cubic in ``u``; its roots in
``(0, 1]`` are extracted from the companion matrix.  Branches that need
``1/rho`` are reported as absent when ``rho == 0``.

`stability_bifurcation` bisects the largest eigenvalue real part of a
tracked equilibrium along a one-parameter family, and `dispersion_scan`
evaluates the linearization against spatial modes to flag diffusion-driven
instability of a state that is stable without diffusion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .csvio import write_csv
from .errors import BracketError
from .model import Params, jacobian, reaction, thresholds

STABLE_MARGIN = 1e-9  # real parts this close to zero are reported as marginal
_ROOT_IMAG_TOL = 1e-9
_ROOT_MERGE_TOL = 1e-9
_VALUE_TOL = 1e-12

BRANCH_EXTINCT = "extinct"
BRANCH_PREY_ONLY = "prey-only"
BRANCH_PREY_FREE = "prey-free"
BRANCH_COEXISTENCE = "coexistence"


@dataclass(frozen=True)
class Equilibrium:
    state: tuple[float, float, float]
    branch: str
    eigenvalues: tuple[complex, complex, complex]
    classification: str
    max_real_part: float
    residual: float


@dataclass
class EquilibriumReport:
    params: Params
    states: list[Equilibrium]
    absent_branches: tuple[str, ...]

    def by_branch(self, branch: str) -> list[Equilibrium]:
        return [e for e in self.states if e.branch == branch]

    def to_csv(self, path) -> None:
        def rows():
            for e in self.states:
                row = list(e.state)
                for ev in e.eigenvalues:
                    row.extend((ev.real, ev.imag))
                row.append(e.classification)
                yield row

        write_csv(
            path,
            ("u", "v", "w", "re_l1", "im_l1", "re_l2", "im_l2", "re_l3", "im_l3", "class"),
            rows(),
        )


def classify(eigenvalues, margin: float = STABLE_MARGIN) -> str:
    worst = max(ev.real for ev in eigenvalues)
    if worst < -margin:
        return "stable"
    if worst > margin:
        return "unstable"
    return "marginal"


def _sorted_eigenvalues(matrix: np.ndarray) -> tuple[complex, complex, complex]:
    eigs = sorted(np.linalg.eigvals(matrix), key=lambda z: (-z.real, -z.imag))
    return tuple(complex(z) for z in eigs)


def _make_equilibrium(p: Params, state, branch: str, margin: float) -> Equilibrium:
    u, v, w = (float(x) for x in state)
    eigs = _sorted_eigenvalues(jacobian(p, u, v, w))
    residual = max(abs(float(f)) for f in reaction(p, u, v, w))
    return Equilibrium(
        state=(u, v, w),
        branch=branch,
        eigenvalues=eigs,
        classification=classify(eigs, margin),
        max_real_part=eigs[0].real,
        residual=residual,
    )


def interior_cubic_coefficients(p: Params) -> np.ndarray:
    """Coefficients (descending powers of u) of the interior-equilibrium cubic.

    Valid for ``rho > 0``.  Derived by equating the prey nullcline
    ``v = (1-u)(u+h)/gamma`` with the predator balance
    ``v = mu*u/(u+h) + alpha*(nu*u/(u+h) + theta)/rho - m`` and clearing
    denominators, so roots with ``gamma = 0`` degenerate to ``u = 1``.
    """
    if p.rho == 0.0:
        raise ValueError("interior cubic needs rho > 0")
    conv = p.mu * p.rho + p.alpha * p.nu  # combined conversion seen by hunters
    net = p.alpha * p.theta - p.m * p.rho  # wake-up gain minus mortality
    return np.array(
        [
            -p.rho,
            p.rho * (1.0 - 2.0 * p.h),
            p.rho * p.h * (2.0 - p.h) - p.gamma * (conv + net),
            p.rho * p.h**2 - p.gamma * net * p.h,
        ]
    )


def _interior_states(p: Params) -> list[tuple[float, float, float]]:
    coeffs = interior_cubic_coefficients(p)
    roots = np.roots(coeffs)
    out: list[tuple[float, float, float]] = []
    for root in roots:
        if abs(root.imag) > _ROOT_IMAG_TOL:
            continue
        u = float(root.real)
        if not (_VALUE_TOL < u <= 1.0 + 1e-12):
            continue
        u = min(u, 1.0)
        if any(abs(u - prev[0]) <= _ROOT_MERGE_TOL for prev in out):
            continue
        s = u + p.h
        v = p.mu * u / s + p.alpha * (p.nu * u / s + p.theta) / p.rho - p.m
        if v <= _VALUE_TOL:
            continue
        w = (p.nu * u / s + p.theta) * v / p.rho
        out.append((u, v, w))
    return out


def find_equilibria(p: Params, margin: float = STABLE_MARGIN) -> EquilibriumReport:
    """Enumerate all spatially flat equilibria with their linearizations.

    The extinct state and the prey-only state always exist.  The prey-free
    state requires ``rho > 0`` and a positive hunter level there; interior
    (coexistence) states require ``rho > 0`` and a cubic root in ``(0, 1]``
    with positive hunter level.  Absent branches are listed by name.
    """
    states = [
        _make_equilibrium(p, (0.0, 0.0, 0.0), BRANCH_EXTINCT, margin),
        _make_equilibrium(p, (1.0, 0.0, 0.0), BRANCH_PREY_ONLY, margin),
    ]
    absent = []
    if p.rho == 0.0:
        absent.extend((BRANCH_PREY_FREE, BRANCH_COEXISTENCE))
    else:
        th = thresholds(p)
        if th.v_flat is not None and th.v_flat > _VALUE_TOL:
            states.append(
                _make_equilibrium(p, (0.0, th.v_flat, th.w_flat), BRANCH_PREY_FREE, margin)
            )
        else:
            absent.append(BRANCH_PREY_FREE)
        interior = _interior_states(p)
        if interior:
            for state in interior:
                states.append(_make_equilibrium(p, state, BRANCH_COEXISTENCE, margin))
        else:
            absent.append(BRANCH_COEXISTENCE)
    states.sort(key=lambda e: (e.state[0], e.state[1], e.state[2]))
    return EquilibriumReport(params=p, states=states, absent_branches=tuple(absent))


def tracked_interior_state(p: Params) -> tuple[float, float, float]:
    """The coexistence state with the largest prey level (for continuation)."""
    interior = find_equilibria(p).by_branch(BRANCH_COEXISTENCE)
    if not interior:
        raise ValueError("no coexistence state for these parameters")
    return max(interior, key=lambda e: e.state[0]).state


def max_real_part(p: Params, state, residual_tol: float = 1e-8) -> float:
    """Largest eigenvalue real part of the linearization at an equilibrium."""
    u, v, w = (float(x) for x in state)
    residual = max(abs(float(f)) for f in reaction(p, u, v, w))
    scale = 1.0 + max(abs(u), abs(v), abs(w))
    if residual > residual_tol * scale:
        raise ValueError(
            f"state {state!r} is not an equilibrium (reaction residual {residual:.3e})"
        )
    return float(max(ev.real for ev in np.linalg.eigvals(jacobian(p, u, v, w))))


@dataclass
class BifurcationResult:
    """Bisection record for a sign change of the tracked stability margin."""

    h_star: float
    h_lo: float
    h_hi: float
    margin_lo: float
    margin_hi: float
    steps: list[tuple[float, float, float, float]]  # (lo, hi, mid, margin at mid)

    def to_csv(self, path) -> None:
        write_csv(
            path,
            ("iter", "h_lo", "h_hi", "h_mid", "max_re_mid"),
            ((i, *step) for i, step in enumerate(self.steps)),
        )


def stability_bifurcation(
    family,
    h_lo: float,
    h_hi: float,
    state=(0.5, 0.5, 0.5),
    xtol: float = 1e-6,
    residual_tol: float = 1e-8,
) -> BifurcationResult:
    """Bisect for the parameter where a tracked equilibrium changes stability.

    ``family`` maps the scan parameter to `Params`.  ``state`` is a fixed
    triple or a callable returning the tracked equilibrium for each
    parameter value; it must actually be an equilibrium, which is verified.
    Raises `BracketError` when the stability margin has the same sign at
    both endpoints.
    """
    if not (h_lo < h_hi):
        raise ValueError(f"need h_lo < h_hi, got [{h_lo!r}, {h_hi!r}]")
    if not (xtol > 0):
        raise ValueError(f"xtol must be positive, got {xtol!r}")
    state_of = state if callable(state) else (lambda _h: state)

    def margin(h: float) -> float:
        return max_real_part(family(h), state_of(h), residual_tol)

    margin_lo = margin(h_lo)
    margin_hi = margin(h_hi)
    if margin_lo == 0.0 or margin_hi == 0.0 or (margin_lo > 0.0) == (margin_hi > 0.0):
        raise BracketError(
            f"no sign change on [{h_lo:g}, {h_hi:g}]: "
            f"max Re = {margin_lo:.6e} and {margin_hi:.6e}"
        )
    lo, hi = h_lo, h_hi
    sign_lo = margin_lo > 0.0
    steps: list[tuple[float, float, float, float]] = []
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        margin_mid = margin(mid)
        steps.append((lo, hi, mid, margin_mid))
        if margin_mid == 0.0:
            lo = hi = mid
            break
        if (margin_mid > 0.0) == sign_lo:
            lo = mid
        else:
            hi = mid
    return BifurcationResult(
        h_star=0.5 * (lo + hi),
        h_lo=h_lo,
        h_hi=h_hi,
        margin_lo=margin_lo,
        margin_hi=margin_hi,
        steps=steps,
    )


@dataclass
class DispersionScan:
    """Largest linearized growth rate against spatial frequency."""

    qs: np.ndarray
    max_re: np.ndarray
    stable_at_zero: bool
    exceeds_zero_mode: bool
    turing_unstable: bool

    def to_csv(self, path) -> None:
        write_csv(
            path,
            ("q", "max_re"),
            ((float(q), float(r)) for q, r in zip(self.qs, self.max_re)),
        )


def dispersion_scan(
    p: Params,
    state,
    q_max: float = 2.0,
    n_q: int = 101,
    margin: float = STABLE_MARGIN,
    residual_tol: float = 1e-8,
) -> DispersionScan:
    """Scan eigenvalues of ``J - q^2 diag(1, d, 0)`` over frequencies in [0, q_max].

    The dormant field does not diffuse, so its row carries no ``q^2``
    penalty.  Flags report stability of the flat mode, whether any positive
    frequency grows faster than it, and whether diffusion destabilizes an
    otherwise stable state.
    """
    if not (q_max > 0 and n_q >= 2):
        raise ValueError("need q_max > 0 and n_q >= 2")
    max_real_part(p, state, residual_tol)  # validates the equilibrium
    u, v, w = (float(x) for x in state)
    jac = jacobian(p, u, v, w)
    diffusion = np.diag([1.0, p.d, 0.0])
    qs = np.linspace(0.0, q_max, n_q)
    max_re = np.empty(n_q)
    for i, q in enumerate(qs):
        eigs = np.linalg.eigvals(jac - (q * q) * diffusion)
        max_re[i] = float(eigs.real.max())
    stable_at_zero = max_re[0] < -margin
    exceeds_zero_mode = bool(np.any(max_re[1:] > max_re[0] + margin))
    turing_unstable = bool(stable_at_zero and np.any(max_re[1:] > margin))
    return DispersionScan(qs, max_re, stable_at_zero, exceeds_zero_mode, turing_unstable)
