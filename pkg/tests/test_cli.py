"""End-to-end runs of the command-line front end against the checked-in configs."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pytest

from dormrd import __version__
from dormrd.cli import main

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

# (config stem, subcommand, files the run must emit besides manifest.json)
FIXTURES = [
    (
        "simulate_e1",
        "simulate",
        [
            "trajectory.csv",
            "state_final_u.csv",
            "state_final_v.csv",
            "state_final_w.csv",
            "state_t1_u.csv",
            "state_t1_v.csv",
            "state_t1_w.csv",
            "fig_trajectory.png",
            "fig_state_final.png",
        ],
    ),
    (
        "picard_bump",
        "picard",
        [
            "iterates.csv",
            "trajectory.csv",
            "state_final_u.csv",
            "state_final_v.csv",
            "state_final_w.csv",
            "fig_iterates.png",
            "fig_state_final.png",
        ],
    ),
    ("ode_coexistence", "ode", ["ode.csv", "fig_ode.png"]),
    ("equilibria_e1", "equilibria", ["equilibria.csv", "fig_equilibria.png"]),
    (
        "bifurcate_tracked",
        "bifurcate",
        ["bifurcation_curve.csv", "bisection.csv", "fig_bifurcation.png"],
    ),
    ("dispersion_e1", "dispersion", ["dispersion.csv", "fig_dispersion.png"]),
    ("invariant_e1", "invariant", ["verdicts.csv", "fig_invariant.png"]),
    ("absorb_oversized", "absorb", ["absorption.csv", "trajectory.csv", "fig_absorb.png"]),
]


def run_cli(subcommand, config_path, out_dir, *extra):
    argv = [subcommand, "--config", str(config_path), "--out", str(out_dir), *extra]
    return main(argv)


def manifest_of(out_dir: Path) -> dict:
    with open(out_dir / "manifest.json", encoding="utf-8") as fh:
        return json.load(fh)


class TestFixtures:
    @pytest.mark.parametrize("stem,subcommand,expected", FIXTURES, ids=[f[0] for f in FIXTURES])
    def test_fixture_runs_clean(self, stem, subcommand, expected, tmp_path):
        out = tmp_path / "out"
        code = run_cli(subcommand, CONFIG_DIR / f"{stem}.ini", out)
        assert code == 0, f"{stem} exited {code}"
        manifest = manifest_of(out)
        assert manifest["ok"] is True
        assert manifest["subcommand"] == subcommand
        listed = {entry["name"] for entry in manifest["files"]}
        missing = set(expected) - listed
        assert not missing, f"{stem} manifest lacks {sorted(missing)}"

    @pytest.mark.parametrize("stem,subcommand,expected", FIXTURES[:4], ids=[f[0] for f in FIXTURES[:4]])
    def test_manifest_hashes_match_disk(self, stem, subcommand, expected, tmp_path):
        out = tmp_path / "out"
        run_cli(subcommand, CONFIG_DIR / f"{stem}.ini", out)
        manifest = manifest_of(out)
        names = [entry["name"] for entry in manifest["files"]]
        assert names == sorted(names), "manifest files not sorted by name"
        assert "manifest.json" not in names
        for entry in manifest["files"]:
            blob = (out / entry["name"]).read_bytes()
            assert len(blob) == entry["bytes"]
            digest = hashlib.sha256(blob).hexdigest()
            assert digest == entry["sha256"], f"{entry['name']} hash drifted"

    def test_figures_are_png(self, tmp_path):
        out = tmp_path / "out"
        run_cli("equilibria", CONFIG_DIR / "equilibria_e1.ini", out)
        figures = sorted(out.glob("fig_*.png"))
        assert figures, "no figures rendered"
        for path in figures:
            assert path.read_bytes()[:8] == PNG_MAGIC, f"{path.name} is not a PNG"

    def test_no_plots_flag_suppresses_figures(self, tmp_path):
        out = tmp_path / "out"
        code = run_cli("ode", CONFIG_DIR / "ode_coexistence.ini", out, "--no-plots")
        assert code == 0
        assert not list(out.glob("*.png"))
        names = {entry["name"] for entry in manifest_of(out)["files"]}
        assert names == {"ode.csv"}

    def test_manifest_echoes_raw_config(self, tmp_path):
        out = tmp_path / "out"
        run_cli("simulate", CONFIG_DIR / "simulate_e1.ini", out)
        manifest = manifest_of(out)
        assert manifest["tool"] == "dormrd"
        assert manifest["version"] == __version__
        assert manifest["config"]["params"]["h"] == "0.5"
        assert manifest["config"]["init"]["seed"] == "7"
        assert manifest["config_file"].endswith("simulate_e1.ini")
        assert manifest["wall_time_s"] >= 0.0

    def test_default_out_dir_is_config_stem(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code = main(["equilibria", "--config", str(CONFIG_DIR / "equilibria_e1.ini")])
        assert code == 0
        assert (tmp_path / "equilibria_e1.out" / "manifest.json").exists()

    def test_equilibria_csv_contains_stable_half_state(self, tmp_path):
        out = tmp_path / "out"
        run_cli("equilibria", CONFIG_DIR / "equilibria_e1.ini", out)
        rows = (out / "equilibria.csv").read_text().strip().splitlines()
        half = [r for r in rows if r.startswith("0.5,0.5,0.5,")]
        assert len(half) == 1, f"expected one half-state row, rows: {rows}"
        assert half[0].endswith(",stable")

    def test_tracked_flip_location_in_manifest(self, tmp_path):
        out = tmp_path / "out"
        run_cli("bifurcate", CONFIG_DIR / "bifurcate_tracked.ini", out)
        results = manifest_of(out)["results"]
        assert abs(results["h_star"] - 0.2351150) < 1e-5
        assert results["margin_lo"] * results["margin_hi"] < 0.0


class TestNegativeVerdicts:
    def test_e2_probe_exits_3_with_curve(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = run_cli("bifurcate", CONFIG_DIR / "bifurcate_e2.ini", out)
        assert code == 3
        assert "no sign change" in capsys.readouterr().err
        manifest = manifest_of(out)
        assert manifest["ok"] is False
        assert manifest["results"]["h_star"] is None
        assert (out / "bifurcation_curve.csv").exists()
        assert not (out / "bisection.csv").exists()

    def test_box_breach_exits_3(self, tmp_path):
        # predators pinned to zero, so logistic prey must cross the shrunk lid
        config = tmp_path / "breach.ini"
        config.write_text(
            "[params]\n"
            "d = 1.0\nh = 0.5\ngamma = 1.0\nalpha = 0.25\ntheta = 0.0\n"
            "m = 0.0\nrho = 0.25\nmu = 0.5\nnu = 0.5\n"
            "[grid]\nn = 32\n"
            "[time]\nt_end = 4.0\n"
            "[region]\nkind = custom\nlo = 0, 0, 0\nhi = 0.5, 0.0, 0.0\nn_samples = 3\n"
        )
        out = tmp_path / "out"
        code = run_cli("invariant", config, out)
        assert code == 3
        manifest = manifest_of(out)
        assert manifest["ok"] is False
        assert manifest["results"]["n_pass"] == 0
        body = (out / "verdicts.csv").read_text()
        assert ",u," in body, f"expected a prey exit row, got:\n{body}"


class TestExitCodes:
    def test_missing_config_file(self, tmp_path, capsys):
        code = run_cli("ode", tmp_path / "nope.ini", tmp_path / "out")
        assert code == 1
        assert "config error" in capsys.readouterr().err

    def test_malformed_config(self, tmp_path, capsys):
        config = tmp_path / "bad.ini"
        config.write_text("[params]\nthis is not a key value line\n")
        code = run_cli("equilibria", config, tmp_path / "out")
        assert code == 1
        assert "line 2" in capsys.readouterr().err

    def test_zero_diffusion_rejected(self, tmp_path, capsys):
        config = tmp_path / "d0.ini"
        config.write_text(
            "[params]\n"
            "d = 0.0\nh = 0.5\ngamma = 1.0\nalpha = 0.25\ntheta = 0.0\n"
            "m = 0.0\nrho = 0.25\nmu = 0.5\nnu = 0.5\n"
        )
        code = run_cli("equilibria", config, tmp_path / "out")
        assert code == 1
        assert "d must be positive" in capsys.readouterr().err

    def test_foreign_section_rejected(self, tmp_path, capsys):
        config = tmp_path / "mixed.ini"
        config.write_text(
            (CONFIG_DIR / "equilibria_e1.ini").read_text() + "[ode]\ny0 = 1, 0, 0\n"
        )
        code = run_cli("equilibria", config, tmp_path / "out")
        assert code == 1
        assert "does not apply" in capsys.readouterr().err

    def test_unconverged_picard_exits_2(self, tmp_path, capsys):
        config = tmp_path / "stall.ini"
        config.write_text(
            (CONFIG_DIR / "picard_bump.ini").read_text().replace(
                "tol = 1e-8", "tol = 1e-8\nmax_iter = 1"
            )
        )
        code = run_cli("picard", config, tmp_path / "out")
        assert code == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_subcommand_required(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2


class TestDeterminism:
    def test_rerun_is_byte_identical(self, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        for out in (first, second):
            code = run_cli("simulate", CONFIG_DIR / "simulate_e1.ini", out)
            assert code == 0
        names = sorted(p.name for p in first.glob("*.csv"))
        assert names, "no CSV outputs to compare"
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes(), (
                f"{name} differs between identical runs"
            )
        m1, m2 = manifest_of(first), manifest_of(second)
        m1.pop("wall_time_s"), m2.pop("wall_time_s")
        assert m1 == m2, "manifests differ beyond wall time"
