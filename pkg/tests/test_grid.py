"""Periodic grids, discrete Laplacian, initial data, and CSV export."""

from __future__ import annotations

import numpy as np
import pytest

from dormrd.grid import (
    Field,
    Grid,
    State,
    Trajectory,
    box_membership,
    box_violation,
    constant_field,
    constant_state,
    field_to_csv,
    gradient_sup,
    inf_value,
    initial_data,
    laplacian,
    laplacian_symbol,
    sup_norm,
)

from conftest import rng_for


class TestGrid:
    def test_spacing_and_coordinates(self):
        g = Grid(dim=1, n=8, length=4.0)
        assert g.dx == 0.5
        assert g.shape == (8,)
        (x,) = g.coords()
        assert np.allclose(x, 0.5 * np.arange(8))

    def test_two_dimensional_shape(self, grid2d):
        assert grid2d.shape == (16, 16)
        x, y = grid2d.coords()
        assert len(x) == len(y) == 16

    @pytest.mark.parametrize("kwargs", [
        dict(dim=3, n=16, length=1.0),
        dict(dim=1, n=3, length=1.0),
        dict(dim=1, n=16, length=0.0),
        dict(dim=1, n=16, length=-2.0),
    ])
    def test_invalid_grid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            Grid(**kwargs)

    def test_non_integer_n_rejected(self):
        with pytest.raises((TypeError, ValueError)):
            Grid(dim=1, n=16.5, length=1.0)


class TestLaplacian:
    def test_cosine_is_an_eigenfunction(self, grid64):
        (x,) = grid64.coords()
        for k in [1, 3, 7]:
            f = Field(grid64, np.cos(2.0 * np.pi * k * x / grid64.length))
            lam = -(2.0 - 2.0 * np.cos(2.0 * np.pi * k / grid64.n)) / grid64.dx**2
            err = np.max(np.abs(laplacian(f).values - lam * f.values))
            assert err < 1e-12, f"mode {k}: eigenvalue defect {err:.2e}"

    def test_symbol_matches_stencil(self, grid64):
        rng = rng_for("symbol_vs_stencil")
        f = rng.standard_normal(grid64.n)
        via_symbol = np.fft.irfft(np.fft.rfft(f) * laplacian_symbol(grid64), n=grid64.n)
        via_stencil = laplacian(Field(grid64, f)).values
        assert np.max(np.abs(via_symbol - via_stencil)) < 1e-11

    def test_symbol_matches_stencil_2d(self, grid2d):
        rng = rng_for("symbol_vs_stencil_2d")
        f = rng.standard_normal(grid2d.shape)
        via_symbol = np.fft.irfftn(
            np.fft.rfftn(f) * laplacian_symbol(grid2d), s=grid2d.shape, axes=(0, 1)
        )
        via_stencil = laplacian(Field(grid2d, f)).values
        assert np.max(np.abs(via_symbol - via_stencil)) < 1e-11

    def test_linearity(self, grid64):
        rng = rng_for("laplacian_linearity")
        f = Field(grid64, rng.standard_normal(grid64.n))
        g = Field(grid64, rng.standard_normal(grid64.n))
        combo = Field(grid64, 2.0 * f.values - 3.0 * g.values)
        direct = laplacian(combo).values
        split = 2.0 * laplacian(f).values - 3.0 * laplacian(g).values
        assert np.max(np.abs(direct - split)) < 1e-12

    def test_lattice_sum_vanishes(self, grid64):
        rng = rng_for("laplacian_sum")
        f = Field(grid64, rng.uniform(0.0, 1.0, size=grid64.n))
        total = abs(float(np.sum(laplacian(f).values)))
        assert total <= 1e-10 * sup_norm(f) * grid64.n, f"lattice sum {total:.2e}"

    def test_constant_field_is_harmonic(self, grid16):
        f = constant_field(grid16, 3.7)
        assert np.max(np.abs(laplacian(f).values)) == 0.0


class TestFieldBasics:
    def test_norms(self, grid16):
        f = Field(grid16, np.linspace(-2.0, 3.0, grid16.n))
        assert sup_norm(f) == 3.0
        assert inf_value(f) == -2.0

    def test_shape_mismatch_rejected(self, grid16):
        with pytest.raises(ValueError):
            Field(grid16, np.zeros(grid16.n + 1))

    def test_gradient_sup_of_sine(self, grid64):
        (x,) = grid64.coords()
        tau = 2.0 * np.pi / grid64.length
        f = Field(grid64, np.sin(tau * x))
        # central differences of sin hit tau * cos up to O(dx^2)
        expected = tau * np.max(np.abs(np.cos(tau * x))) * np.sinc(tau * grid64.dx / np.pi)
        assert gradient_sup(f) == pytest.approx(expected, rel=1e-10)

    def test_gradient_sup_constant_is_zero(self, grid16):
        assert gradient_sup(constant_field(grid16, 5.0)) == 0.0


class TestState:
    def test_component_order_and_extrema(self, grid16):
        s = constant_state(grid16, (0.3, 0.2, 0.1))
        assert s.sup() == (0.3, 0.2, 0.1)
        assert s.inf() == (0.3, 0.2, 0.1)

    def test_mixed_grids_rejected(self, grid16, grid64):
        with pytest.raises(ValueError):
            State(constant_field(grid16, 1.0), constant_field(grid64, 1.0), constant_field(grid16, 1.0))


class TestBoxMembership:
    def test_boundary_is_inside(self, grid16):
        s = constant_state(grid16, (1.0, 0.5, 0.0))
        assert box_membership(s, (0.0, 0.0, 0.0), (1.0, 0.5, 0.2))
        assert box_violation(s, (0.0, 0.0, 0.0), (1.0, 0.5, 0.2)) is None

    def test_violation_reports_component_node_value(self, grid16):
        values = np.zeros(grid16.n)
        values[5] = 1.5
        s = State(
            constant_field(grid16, 0.5),
            Field(grid16, values),
            constant_field(grid16, 0.0),
        )
        hit = box_violation(s, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
        assert hit == (1, 5, 1.5), f"unexpected violation record {hit}"

    def test_tolerance_absorbs_small_overshoot(self, grid16):
        s = constant_state(grid16, (1.0 + 5e-9, 0.1, 0.1))
        assert not box_membership(s, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
        assert box_membership(s, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0), tol=1e-8)


class TestInitialData:
    def test_constant_kind(self, grid16):
        s = initial_data("constant", grid16, amplitude=(0.2, 0.4, 0.6))
        assert s.sup() == (0.2, 0.4, 0.6) and s.inf() == (0.2, 0.4, 0.6)

    def test_bump_peak_and_positivity(self, grid64):
        s = initial_data("gaussian-bump", grid64, amplitude=2.0, width=1.0)
        assert s.sup()[0] == pytest.approx(2.0, abs=1e-14)
        assert min(s.inf()) >= 0.0
        center = np.argmax(s.u.values)
        assert abs(grid64.coords()[0][center] - grid64.length / 2) <= grid64.dx

    def test_bump_needs_positive_width(self, grid16):
        with pytest.raises(ValueError):
            initial_data("gaussian-bump", grid16, width=0.0)

    def test_fourier_kind_is_nonnegative_and_rough(self, grid64):
        s = initial_data("random-fourier", grid64, amplitude=1.0, seed=3)
        assert min(s.inf()) >= 0.0
        assert s.sup()[0] > s.inf()[0], "degenerate draw"

    def test_box_random_respects_box(self, grid64):
        lo, hi = (0.1, 0.0, 0.2), (0.9, 0.6, 0.8)
        s = initial_data("box-random", grid64, seed=11, box=(lo, hi))
        assert box_membership(s, lo, hi, tol=0.0)

    def test_box_random_needs_box(self, grid16):
        with pytest.raises(ValueError):
            initial_data("box-random", grid16)

    def test_seeded_determinism(self, grid64):
        for kind, kwargs in [
            ("random-fourier", {}),
            ("box-random", dict(box=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)))),
        ]:
            a = initial_data(kind, grid64, seed=7, **kwargs)
            b = initial_data(kind, grid64, seed=7, **kwargs)
            c = initial_data(kind, grid64, seed=8, **kwargs)
            assert np.array_equal(a.u.values, b.u.values), kind
            assert not np.array_equal(a.u.values, c.u.values), kind

    def test_unknown_kind_rejected(self, grid16):
        with pytest.raises(ValueError, match="kind"):
            initial_data("perlin", grid16)

    def test_two_dimensional_shapes(self, grid2d):
        for kind, kwargs in [
            ("gaussian-bump", {}),
            ("random-fourier", {}),
            ("box-random", dict(box=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)))),
        ]:
            s = initial_data(kind, grid2d, seed=0, **kwargs)
            assert s.u.values.shape == grid2d.shape, kind


class TestCsvExport:
    def test_field_rows_one_dimensional(self, tmp_path):
        g = Grid(dim=1, n=4, length=2.0)
        field_to_csv(Field(g, np.array([0.0, 0.25, 0.5, 1.0])), tmp_path / "f.csv")
        text = (tmp_path / "f.csv").read_text()
        assert text == (
            "index,x,value\n"
            "0,0.0,0.0\n"
            "1,0.5,0.25\n"
            "2,1.0,0.5\n"
            "3,1.5,1.0\n"
        )

    def test_field_rows_two_dimensional(self, tmp_path):
        g = Grid(dim=2, n=4, length=2.0)
        field_to_csv(constant_field(g, 1.0), tmp_path / "f.csv")
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[0] == "index,index2,x,y,value"
        assert len(lines) == 1 + 16
        assert lines[1] == "0,0,0.0,0.0,1.0"

    def test_trajectory_header_and_empty_region_column(self, grid16, tmp_path):
        times = np.array([0.0, 1.0])
        block = np.tile([0.5, 0.25, 0.125], (2, 1))
        traj = Trajectory(
            grid=grid16,
            times=times,
            sup=block,
            inf=block,
            targets=((1.0, 0.0, 0.0),),
            dist=np.array([[0.5], [0.5]]),
        )
        traj.to_csv(tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "t,sup_u,inf_u,sup_v,inf_v,sup_w,inf_w,dist_100,in_R"
        assert lines[1] == "0.0,0.5,0.5,0.25,0.25,0.125,0.125,0.5,"
