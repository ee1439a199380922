import csv
import os

import numpy as np
import pytest

import polarbin as pb
from polarbin.cli import main
from polarbin.config import (
    PRESET_NAMES,
    load_config,
    load_preset,
    parse_time,
)
from polarbin.errors import ConfigError
from polarbin.runs import run_converge, run_dynamics, run_oracle, run_spectrum, run_sweep

MINIMAL = """
[model]
omega0 = 0.10
omega_c = 0.11
omega_nu = 0.01
kappa = 0.006
v12 = 0.0025
s1 = -1
s2 = -4
coupling = 0.03
sigma = 0.0

[run]
t_final = 60 au
n_vib = 6
n_bins = auto
"""


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


class TestConfigParsing:
    def test_minimal_defaults(self):
        cfg = load_config(MINIMAL)
        assert cfg.spec.omega0 == 0.10
        assert cfg.n_bins is None
        assert cfg.n_vib == 6
        assert cfg.tolerance == 1e-9
        assert cfg.initial_state == "photonic"

    def test_parse_time_forms(self):
        assert parse_time("30 fs") == pytest.approx(1240.24, abs=0.01)
        assert parse_time("100 au") == 100.0
        assert parse_time("100") == 100.0
        with pytest.raises(ConfigError):
            parse_time("30 ps")
        with pytest.raises(ConfigError):
            parse_time("fast")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(MINIMAL + "\nomega_x = 1\n")

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unknown section"):
            load_config(MINIMAL + "\n[laser]\npower = 1\n")

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match="missing required"):
            load_config("[model]\nomega0 = 0.1\n[run]\nt_final = 1 fs\n")

    def test_bad_number(self):
        with pytest.raises(ConfigError, match="not a number"):
            load_config(MINIMAL.replace("0.006", "six"))

    def test_resonant_cavity_default(self):
        text = MINIMAL.replace("omega_c = 0.11\n", "")
        cfg = load_config(text)
        assert cfg.spec.omega_c == pytest.approx(0.11)

    def test_auto_bins_zero_sigma(self):
        cfg = load_config(MINIMAL)
        assert cfg.resolve_point().n_bins == 1

    def test_auto_bins_rule(self):
        cfg = load_config(MINIMAL.replace("sigma = 0.0", "sigma = 0.02")
                          .replace("t_final = 60 au", "t_final = 30 fs"))
        assert cfg.resolve_point().n_bins == 24

    def test_overrides(self):
        cfg = load_config(MINIMAL, overrides=["model.sigma=0.02",
                                              "run.n_vib=4"])
        assert cfg.spec.sigma == 0.02
        assert cfg.n_vib == 4

    def test_bad_override_target(self):
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(MINIMAL, overrides=["run.bogus=1"])
        with pytest.raises(ConfigError, match="section.key=value"):
            load_config(MINIMAL, overrides=["n_vib=4"])

    def test_sweep_points_sorted_product(self):
        cfg = load_config(
            MINIMAL + "\n[sweep]\nsigma = 0.02, 0.01\ncoupling = 0.03, 0\n"
        )
        points = cfg.sweep_points()
        assert points[0] == {"sigma": 0.01, "coupling": 0.0}
        assert len(points) == 4
        assert points == sorted(
            points, key=lambda p: (p["sigma"], p["coupling"])
        )

    def test_presets_all_load(self):
        for name in PRESET_NAMES:
            cfg = load_preset(name)
            assert cfg.t_final > 0

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            load_preset("fig99")

    def test_manifest_roundtrip_resolves_identically(self):
        cfg = load_config(MINIMAL + "\n[sweep]\nsigma = 0, 0.01\n")
        again = load_config(cfg.manifest_text("x"))
        assert cfg.sweep_points() == again.sweep_points()
        for point in cfg.sweep_points():
            assert cfg.resolve_point(point) == again.resolve_point(point)


class TestRunCommands:
    def test_spectrum_files(self, tmp_path):
        cfg = load_config(MINIMAL)
        out = tmp_path / "spec"
        run_spectrum(cfg, str(out))
        assert (out / "manifest.cfg").exists()
        rows = read_csv(out / "spectrum.csv")
        assert rows[0] == ["omega_au", "absorption"]
        assert len(rows) > 100
        assert (out / "autocorr.csv").exists()
        assert (out / "norms.csv").exists()

    def test_spectrum_requires_photonic(self, tmp_path):
        cfg = load_config(MINIMAL + "initial_state = bright\n")
        with pytest.raises(ConfigError):
            run_spectrum(cfg, str(tmp_path / "x"))

    def test_spectrum_sweep_writes_index(self, tmp_path):
        cfg = load_config(MINIMAL + "\n[sweep]\nsigma = 0, 0.005\n")
        out = tmp_path / "sweep_spec"
        run_spectrum(cfg, str(out))
        index = read_csv(out / "index.csv")
        assert index[0] == ["sigma", "coupling", "kappa", "delta2", "directory"]
        assert len(index) == 3
        for row in index[1:]:
            assert (out / row[-1] / "spectrum.csv").exists()

    def test_dynamics_files_and_columns(self, tmp_path):
        cfg = load_config(
            MINIMAL.replace("sigma = 0.0", "sigma = 0.01")
            .replace("n_bins = auto", "n_bins = 2")
            + "vib_energy_times = 50 au\n"
        )
        out = tmp_path / "dyn"
        run_dynamics(cfg, str(out))
        rows = read_csv(out / "populations.csv")
        assert rows[0][:6] == ["t_au", "photon", "norm2", "gamma",
                               "p_e1_total", "p_e2_total"]
        assert "p_e1_bin01" in rows[0]
        assert len(rows) == 62  # header + 61 samples
        vib = read_csv(out / "vib_energy.csv")
        assert vib[0][-1] == "status"

    def test_sweep_single_point_matches_dynamics(self, tmp_path):
        text = MINIMAL + "\n[sweep]\nsigma = 0.0\n"
        cfg = load_config(text)
        path = run_sweep(cfg, str(tmp_path / "sw"))
        rows = read_csv(path)
        assert len(rows) == 2
        sweep_yield = float(rows[1][rows[0].index("p_e2_final")])

        run_dynamics(load_config(MINIMAL), str(tmp_path / "dy"))
        pops = read_csv(tmp_path / "dy" / "populations.csv")
        dyn_yield = float(pops[-1][pops[0].index("p_e2_total")])
        assert sweep_yield == pytest.approx(dyn_yield, abs=1e-12)

    def test_sweep_parallel_matches_serial(self, tmp_path):
        text = MINIMAL + "\n[sweep]\nsigma = 0, 0.01\ncoupling = 0, 0.03\n"
        cfg = load_config(text)
        p1 = run_sweep(cfg, str(tmp_path / "serial"), threads=1)
        p2 = run_sweep(cfg, str(tmp_path / "parallel"), threads=2)
        assert open(p1).read() == open(p2).read()

    def test_sweep_records_row_failures(self, tmp_path):
        # explicit n_bins=2 with a sigma=0 grid point cannot bin: that row
        # fails, the others proceed
        text = (
            MINIMAL.replace("n_bins = auto", "n_bins = 2")
            + "\n[sweep]\nsigma = 0, 0.01\n"
        )
        cfg = load_config(text)
        rows = read_csv(run_sweep(cfg, str(tmp_path / "pf")))
        statuses = [row[-1] for row in rows[1:]]
        assert statuses[0].startswith("error:")
        assert statuses[1] == "ok"

    def test_byte_identical_reruns(self, tmp_path):
        cfg = load_config(MINIMAL)
        run_spectrum(cfg, str(tmp_path / "a"))
        run_spectrum(cfg, str(tmp_path / "b"))
        for name in ("spectrum.csv", "autocorr.csv", "norms.csv",
                     "manifest.cfg"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_manifest_rerun_reproduces_run(self, tmp_path):
        cfg = load_config(MINIMAL)
        run_spectrum(cfg, str(tmp_path / "a"))
        manifest = (tmp_path / "a" / "manifest.cfg").read_text()
        run_spectrum(load_config(manifest), str(tmp_path / "b"))
        assert (tmp_path / "a" / "spectrum.csv").read_bytes() == \
            (tmp_path / "b" / "spectrum.csv").read_bytes()

    def test_converge_needs_disorder(self, tmp_path):
        with pytest.raises(ConfigError):
            run_converge(load_config(MINIMAL), str(tmp_path / "c"))

    def test_converge_outputs(self, tmp_path):
        text = MINIMAL.replace("sigma = 0.0", "sigma = 0.01").replace(
            "t_final = 60 au", "t_final = 400 au"
        )
        out = tmp_path / "conv"
        steps = run_converge(load_config(text), str(out))
        assert len(steps) >= 1
        rows = read_csv(out / "convergence.csv")
        assert rows[0][0] == "n_bins_coarse"
        assert (out / "converge_runs.csv").exists()

    def test_oracle_output(self, tmp_path):
        text = (
            MINIMAL.replace("sigma = 0.0", "sigma = 0.01")
            .replace("n_vib = 6", "n_vib = 3")
            .replace("n_bins = auto", "n_bins = 2")
        )
        out = tmp_path / "orc"
        run_oracle(load_config(text), str(out))
        rows = read_csv(out / "oracle.csv")
        assert [row[0] for row in rows[1:]] == ["1", "2", "4"]
        deviations = [float(row[7]) for row in rows[1:]]  # p_e1_total_max
        assert deviations == sorted(deviations, reverse=True)


class TestCliEntry:
    def _write(self, tmp_path, text):
        path = tmp_path / "run.cfg"
        path.write_text(text)
        return str(path)

    def test_success_exit_zero(self, tmp_path, capsys):
        cfg = self._write(tmp_path, MINIMAL)
        code = main(["spectrum", "--config", cfg,
                     "--out", str(tmp_path / "out")])
        assert code == 0
        assert (tmp_path / "out" / "spectrum.csv").exists()

    def test_config_error_exit_one(self, tmp_path, capsys):
        cfg = self._write(tmp_path, MINIMAL + "\nbogus = 1\n")
        code = main(["spectrum", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 1
        assert "config error" in capsys.readouterr().err

    def test_missing_file_exit_one(self, tmp_path, capsys):
        code = main(["spectrum", "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(tmp_path / "o")])
        assert code == 1

    def test_bad_flag_exits_one(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["spectrum", "--bogus"])
        assert exc.value.code == 1

    def test_numerical_failure_exit_two(self, tmp_path, monkeypatch, capsys):
        import polarbin.cli as cli_mod

        def boom(cfg, out):
            raise pb.PropagationError("diverged")

        monkeypatch.setattr(cli_mod, "run_spectrum", boom)
        cfg = self._write(tmp_path, MINIMAL)
        code = main(["spectrum", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_override_flag(self, tmp_path):
        cfg = self._write(tmp_path, MINIMAL)
        out = tmp_path / "ov"
        code = main([
            "dynamics", "--config", cfg, "--out", str(out),
            "--override", "model.sigma=0.01",
            "--override", "run.n_bins=2",
        ])
        assert code == 0
        rows = read_csv(out / "populations.csv")
        assert "p_e1_bin01" in rows[0]

    def test_preset_flag(self, tmp_path):
        # override to a tiny grid so the preset runs fast
        out = tmp_path / "pre"
        code = main([
            "dynamics", "--preset", "fig6", "--out", str(out),
            "--override", "run.n_vib=4",
            "--override", "run.t_final=40 au",
            "--override", "run.n_bins=2",
        ])
        assert code == 0
        assert (out / "populations.csv").exists()

    def test_converge_command(self, tmp_path):
        cfg = self._write(
            tmp_path,
            MINIMAL.replace("sigma = 0.0", "sigma = 0.01")
            .replace("t_final = 60 au", "t_final = 400 au"),
        )
        out = tmp_path / "cv"
        code = main(["converge", "--config", cfg, "--out", str(out),
                     "--threads", "2"])
        assert code == 0
        assert (out / "convergence.csv").exists()

    def test_converge_without_disorder_exits_one(self, tmp_path, capsys):
        cfg = self._write(tmp_path, MINIMAL)
        assert main(["converge", "--config", cfg,
                     "--out", str(tmp_path / "cv")]) == 1

    def test_oracle_command(self, tmp_path):
        cfg = self._write(
            tmp_path,
            MINIMAL.replace("sigma = 0.0", "sigma = 0.01")
            .replace("n_vib = 6", "n_vib = 3")
            .replace("n_bins = auto", "n_bins = 2"),
        )
        out = tmp_path / "orc"
        code = main(["oracle", "--config", cfg, "--out", str(out)])
        assert code == 0
        assert (out / "oracle.csv").exists()

    def test_dynamics_sweep_points(self, tmp_path):
        cfg = self._write(tmp_path, MINIMAL + "\n[sweep]\ncoupling = 0, 0.03\n")
        out = tmp_path / "dsw"
        code = main(["dynamics", "--config", cfg, "--out", str(out)])
        assert code == 0
        for i in range(2):
            assert (out / f"point_{i:03d}" / "populations.csv").exists()


class TestYieldSheetFlattening:
    def test_yield_vs_disorder_flattens_beyond_coupling(self, tmp_path):
        # broadband yields at fixed strong coupling: the change per sigma
        # step collapses once 2 sigma exceeds the collective coupling
        text = """
[model]
omega0 = 0.10
omega_c = 0.11
omega_nu = 0.01
kappa = 0.006
v12 = 0.0025
s1 = -1
s2 = -4
coupling = 0.03
sigma = 0

[run]
t_final = 30 fs

[sweep]
sigma = 0.005, 0.01, 0.03, 0.04
"""
        path = run_sweep(load_config(text), str(tmp_path / "sheet"), threads=2)
        rows = read_csv(path)
        col = rows[0].index("p_e2_final")
        yields = {float(r[0]): float(r[col]) for r in rows[1:]}
        early = abs(yields[0.01] - yields[0.005])
        late = abs(yields[0.04] - yields[0.03])
        assert late < 0.1 * early


class TestFig3aPreset:
    def test_four_spectra_with_wider_disordered_splitting(self, tmp_path):
        # the full preset at production scale: every disordered spectrum
        # splits wider than the ordered one (at 2 sigma = 2 G the band tops
        # flatten and the two-maxima distance dips; see the notes ledger)
        out = tmp_path / "fig3a"
        code = main(["spectrum", "--preset", "fig3a", "--out", str(out)])
        assert code == 0
        index = read_csv(out / "index.csv")
        assert len(index) == 5  # header + 4 disorder values
        splittings = []
        for row in index[1:]:
            rows = read_csv(out / row[-1] / "spectrum.csv")
            omega = np.array([float(r[0]) for r in rows[1:]])
            values = np.array([float(r[1]) for r in rows[1:]])
            from polarbin.observables import Spectrum

            splittings.append(pb.rabi_splitting(Spectrum(omega, values)))
        assert all(s > splittings[0] for s in splittings[1:])
        assert splittings[0] < splittings[1] < splittings[2]
