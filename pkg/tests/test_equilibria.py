"""Flat equilibria, their linearizations, bisection, and dispersion scans."""

from __future__ import annotations

import numpy as np
import pytest

from dormrd.equilibria import (
    BifurcationResult,
    classify,
    dispersion_scan,
    find_equilibria,
    interior_cubic_coefficients,
    max_real_part,
    stability_bifurcation,
    tracked_interior_state,
)
from dormrd.errors import BracketError
from dormrd.model import Params, e1_params, e2_params, jacobian, random_params, reaction
from dormrd.stepper import ode_solve

from conftest import rng_for


def hopf_family(h: float) -> Params:
    # weak waking plus slow sleeping: the interior state loses stability in h
    return Params(d=1.0, h=h, gamma=1.0, alpha=0.2, theta=0.05, m=0.1, rho=0.25, mu=0.5, nu=0.5)


def residual_of(p: Params, state) -> float:
    return max(abs(float(f)) for f in reaction(p, *state))


class TestFindEquilibria:
    def test_reference_family_census(self, e1):
        report = find_equilibria(e1)
        states = {tuple(round(x, 9) for x in e.state): e for e in report.states}
        assert len(report.states) == 3
        assert (0.0, 0.0, 0.0) in states and (1.0, 0.0, 0.0) in states
        assert (0.5, 0.5, 0.5) in states
        assert states[(0.0, 0.0, 0.0)].classification == "unstable"
        assert states[(1.0, 0.0, 0.0)].classification == "unstable"
        assert states[(0.5, 0.5, 0.5)].classification == "stable"
        assert "prey-free" in report.absent_branches

    def test_companion_family_census(self, e2):
        report = find_equilibria(e2)
        half = [e for e in report.states if abs(e.state[0] - 0.5) < 1e-9]
        assert len(half) == 1
        assert half[0].classification == "stable"
        assert half[0].branch == "coexistence"

    def test_all_reported_states_are_equilibria(self, e1, e2):
        for p in (e1, e2, hopf_family(0.3)):
            for e in find_equilibria(p).states:
                assert e.residual <= 1e-10, f"{e.branch} at {e.state}: residual {e.residual:.2e}"
                assert residual_of(p, e.state) <= 1e-10

    def test_prey_free_branch_when_waking_pays_for_death(self):
        p = Params(d=1.0, h=0.5, gamma=1.0, alpha=0.8, theta=0.5, m=0.1, rho=0.5, mu=0.4, nu=0.3)
        report = find_equilibria(p)
        free = report.by_branch("prey-free")
        assert len(free) == 1
        v_flat = p.alpha * p.theta / p.rho - p.m
        assert free[0].state == pytest.approx((0.0, v_flat, p.theta * v_flat / p.rho), abs=1e-12)

    def test_no_waking_limits_the_census(self):
        p = Params(d=1.0, h=0.5, gamma=1.0, alpha=0.0, theta=0.2, m=0.1, rho=0.0, mu=0.5, nu=0.4)
        report = find_equilibria(p)
        branches = {e.branch for e in report.states}
        assert branches == {"extinct", "prey-only"}
        assert "prey-free" in report.absent_branches
        assert "coexistence" in report.absent_branches

    def test_random_census_stays_within_the_structural_budget(self):
        rng = rng_for("census_budget")
        for _ in range(300):
            p = random_params(rng)
            report = find_equilibria(p)
            branches = [e.branch for e in report.states]
            assert len(report.states) <= 5, f"{p} produced {len(report.states)} states"
            assert branches.count("extinct") == 1 and branches.count("prey-only") == 1
            assert "prey-free" not in branches, f"{p} woke a prey-free state"
            for e in report.states:
                assert e.residual <= 1e-10

    def test_six_states_outside_the_rate_split(self):
        # m < theta escapes the structural budget of the derived rates
        p = Params(d=1.0, h=0.1, gamma=1.0, alpha=0.05, theta=1.0, m=0.0, rho=1.0, mu=0.28, nu=0.0)
        report = find_equilibria(p)
        assert len(report.states) == 6, f"expected 6 states, got {len(report.states)}"
        for e in report.states:
            assert residual_of(p, e.state) <= 1e-10

    def test_interior_cubic_matches_the_nullcline_difference(self):
        # P(u) must equal gamma*rho*(u+h) times the gap between the prey
        # nullcline and the hunter balance curve
        rng = rng_for("cubic_identity")
        for _ in range(25):
            p = random_params(rng)
            coeffs = interior_cubic_coefficients(p)
            for u in rng.uniform(0.05, 1.5, size=4):
                s = u + p.h
                v_prey = (1.0 - u) * s / p.gamma if p.gamma > 0 else None
                if v_prey is None:
                    continue
                v_balance = (
                    p.mu * u / s
                    + p.alpha * (p.nu * u / s + p.theta) / p.rho
                    - p.m
                )
                direct = p.gamma * p.rho * s * (v_prey - v_balance)
                poly = float(np.polyval(coeffs, u))
                assert poly == pytest.approx(direct, rel=1e-9, abs=1e-9), f"{p} at u={u}"

    def test_cubic_requires_waking(self):
        p = Params(d=1.0, h=0.5, gamma=1.0, alpha=0.0, theta=0.0, m=0.1, rho=0.0, mu=0.5, nu=0.4)
        with pytest.raises(ValueError):
            interior_cubic_coefficients(p)

    def test_eigenvalues_cross_checked_against_the_characteristic_polynomial(self, e1, e2):
        for p in (e1, e2):
            for e in find_equilibria(p).states:
                jac = jacobian(p, *e.state)
                via_poly = sorted(np.roots(np.poly(jac)), key=lambda z: (-z.real, -z.imag))
                for mine, other in zip(e.eigenvalues, via_poly):
                    assert abs(mine - other) < 1e-9, f"{e.branch}: {mine} vs {other}"

    def test_report_csv_layout(self, e1, tmp_path):
        report = find_equilibria(e1)
        report.to_csv(tmp_path / "eq.csv")
        lines = (tmp_path / "eq.csv").read_text().splitlines()
        assert lines[0] == "u,v,w,re_l1,im_l1,re_l2,im_l2,re_l3,im_l3,class"
        assert len(lines) == 1 + 3
        assert lines[1].startswith("0.0,0.0,0.0,")


class TestClassify:
    def test_margins(self):
        assert classify([-1.0, -2.0, complex(-3.0, 1.0)]) == "stable"
        assert classify([1.0, -2.0, -3.0]) == "unstable"
        assert classify([-1e-12, -2.0, -3.0]) == "marginal"


class TestMaxRealPart:
    def test_stable_reference_state(self, e1):
        assert max_real_part(e1, (0.5, 0.5, 0.5)) < 0.0

    def test_non_equilibrium_rejected(self, e1):
        with pytest.raises(ValueError, match="equilibrium"):
            max_real_part(e1, (0.4, 0.4, 0.4))


class TestTrackedState:
    def test_reference_family_tracks_the_half_state(self, e1):
        state = tracked_interior_state(e1)
        assert state == pytest.approx((0.5, 0.5, 0.5), abs=1e-9)

    def test_absent_interior_state_reported(self):
        p = Params(d=1.0, h=0.5, gamma=0.0, alpha=0.2, theta=0.1, m=0.5, rho=0.5, mu=0.1, nu=0.1)
        with pytest.raises(ValueError):
            tracked_interior_state(p)


class TestStabilityBifurcation:
    def test_locates_the_stability_flip(self):
        result = stability_bifurcation(
            hopf_family, 0.15, 0.35, state=lambda h: tracked_interior_state(hopf_family(h)),
            xtol=1e-7,
        )
        assert isinstance(result, BifurcationResult)
        assert result.h_star == pytest.approx(0.2351150, abs=1e-6)
        assert result.margin_lo * result.margin_hi < 0.0
        widths = [hi - lo for lo, hi, _, _ in result.steps]
        assert widths == sorted(widths, reverse=True) and widths[-1] <= 2e-7

    def test_flip_is_a_genuine_crossing(self):
        below = max_real_part(hopf_family(0.2), tracked_interior_state(hopf_family(0.2)))
        above = max_real_part(hopf_family(0.3), tracked_interior_state(hopf_family(0.3)))
        assert below * above < 0.0, f"margins {below:.3e} and {above:.3e} do not straddle zero"

    def test_stable_family_raises_with_both_margins(self):
        with pytest.raises(BracketError, match="no sign change") as err:
            stability_bifurcation(e1_params, 0.1, 2.0)
        message = str(err.value)
        assert message.count("e") >= 2, f"endpoint margins missing from {message!r}"

    def test_bad_bracket_rejected(self):
        with pytest.raises(ValueError):
            stability_bifurcation(hopf_family, 0.5, 0.2)

    def test_bisection_csv_layout(self, tmp_path):
        result = stability_bifurcation(
            hopf_family, 0.15, 0.35, state=lambda h: tracked_interior_state(hopf_family(h)),
        )
        result.to_csv(tmp_path / "b.csv")
        lines = (tmp_path / "b.csv").read_text().splitlines()
        assert lines[0] == "iter,h_lo,h_hi,h_mid,max_re_mid"
        assert len(lines) == 1 + len(result.steps)


class TestDispersion:
    def test_decoupled_prey_curve(self):
        # with gamma = 0 and matching rates every branch sits on -1 - q^2
        p = Params(d=1.0, h=0.5, gamma=0.0, alpha=0.0, theta=0.0, m=1.0, rho=6.0, mu=0.0, nu=0.0)
        scan = dispersion_scan(p, (1.0, 0.0, 0.0), q_max=2.0, n_q=41)
        expected = -1.0 - scan.qs**2
        assert np.max(np.abs(scan.max_re - expected)) < 1e-12
        assert scan.stable_at_zero and not scan.exceeds_zero_mode and not scan.turing_unstable

    def test_zero_mode_matches_the_flat_linearization(self, e1):
        scan = dispersion_scan(e1, (0.5, 0.5, 0.5))
        assert scan.max_re[0] == pytest.approx(max_real_part(e1, (0.5, 0.5, 0.5)), abs=1e-12)

    def test_flags_are_consistent_with_the_curve(self, e1, e2):
        for p in (e1, e2):
            scan = dispersion_scan(p, (0.5, 0.5, 0.5))
            grows = bool(np.any(scan.max_re[1:] > scan.max_re[0] + 1e-9))
            assert scan.exceeds_zero_mode == grows
            if scan.turing_unstable:
                assert scan.stable_at_zero and np.any(scan.max_re[1:] > 0.0)

    def test_non_equilibrium_rejected(self, e1):
        with pytest.raises(ValueError):
            dispersion_scan(e1, (0.3, 0.3, 0.3))

    def test_csv_layout(self, e1, tmp_path):
        scan = dispersion_scan(e1, (0.5, 0.5, 0.5), n_q=11)
        scan.to_csv(tmp_path / "d.csv")
        lines = (tmp_path / "d.csv").read_text().splitlines()
        assert lines[0] == "q,max_re"
        assert len(lines) == 12


class TestOdeConsistency:
    def test_stable_state_pulls_back_a_small_kick(self, e1):
        y0 = (0.5 + 1e-3, 0.5 - 1e-3, 0.5 + 1e-3)
        result = ode_solve(e1, y0, 200.0, dt=0.01)
        gap = np.max(np.abs(result.final() - 0.5))
        assert gap < 1e-6, f"stable state did not reattract: gap {gap:.2e}"

    def test_unstable_state_sheds_a_small_kick(self, e1):
        y0 = (1.0 - 1e-3, 1e-3, 1e-3)
        result = ode_solve(e1, y0, 200.0, dt=0.01)
        gap = np.max(np.abs(result.final() - np.array([1.0, 0.0, 0.0])))
        assert gap > 1e-2, f"unstable state retained the kick: gap {gap:.2e}"
