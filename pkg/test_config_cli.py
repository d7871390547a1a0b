import json
from pathlib import Path

import pytest

from cli import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_DIVERGED, EXIT_OK, main
from config import Settings, load_config, parse_config_text, render_config
from errors import ConfigurationError
from presets import PRESETS, _stability_fit, get_preset, list_presets
from spectral import energy_space_norm

BASE = """\
experiment = mean-mode
model.gamma = 1.0
integrator.seed = 3
"""

DIVERGING = ["model.nonlinearity=0,0,-1", "initial.amplitude=10", "integrator.T=1", "grid.N=16"]


class TestParsing:
    def test_defaults_fill_in(self):
        config = parse_config_text(BASE)
        assert config.experiment == "mean-mode"
        assert config["grid.N"] == 64
        assert config["model.nonlinearity"] == (0.0, 0.0, 1.0)
        assert config.lines["model.gamma"] == 2

    def test_comments_and_lists(self):
        config = parse_config_text(BASE + "model.nonlinearity = -1, 0, 1   # a1, a3, a5\n"
                                          "experiment.windows = 2, 4\n")
        assert config["model.nonlinearity"] == (-1.0, 0.0, 1.0)
        assert config["experiment.windows"] == (2.0, 4.0)

    @pytest.mark.parametrize("extra, line", [
        ("colour = blue", 4),
        ("grid.N = many", 4),
        ("grid.dim = 4", 4),
        ("model.gamma = 2", 4),
        ("integrator.dt = 0", 4),
        ("\n\ngrid.kind = sphere", 6),
    ])
    def test_errors_name_the_line(self, extra, line):
        with pytest.raises(ConfigurationError) as info:
            parse_config_text(BASE + extra + "\n")
        assert info.value.line == line
        assert f"line {line}" in str(info.value)

    def test_missing_required_key(self):
        with pytest.raises(ConfigurationError, match="model.gamma"):
            parse_config_text("experiment = mean-mode\nintegrator.seed = 1\n")

    def test_random_data_needs_seeds(self):
        with pytest.raises(ConfigurationError, match="integrator.seed"):
            parse_config_text("experiment = mean-mode\nmodel.gamma = 1\n")
        with pytest.raises(ConfigurationError, match="model.forcing.seed"):
            parse_config_text(BASE + "model.forcing = random\n")

    def test_overrides_win(self):
        config = parse_config_text(BASE, ["grid.N=32", "tolerance.energy=1e-5"])
        assert config["grid.N"] == 32
        assert config.lines["grid.N"] is None
        assert config.tolerance("energy", 1.0) == 1e-5
        assert config.tolerance("other", 0.5) == 0.5

    def test_malformed_override(self):
        with pytest.raises(ConfigurationError):
            parse_config_text(BASE, ["grid.N"])

    def test_render_reads_back(self):
        values = parse_config_text(BASE + "ensemble.norms = 1.0, 10.0\n").values
        assert parse_config_text(render_config(values)).values == values

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="cannot read"):
            load_config(tmp_path / "absent.cfg")


class TestBuilders:
    def test_grid_errors_point_at_grid_keys(self):
        config = parse_config_text(BASE + "grid.N = 15\n")
        with pytest.raises(ConfigurationError) as info:
            config.grid()
        assert info.value.line == 4

    def test_bad_nonlinearity_is_anchored(self):
        with pytest.raises(ConfigurationError):
            parse_config_text(BASE + "model.nonlinearity = 1, 2\n")

    def test_params_and_forcing(self):
        config = parse_config_text(BASE + "grid.N = 16\nmodel.forcing = single-mode\nmodel.forcing.k = 2\n")
        params = config.build_params()
        assert params.grid.n == 16
        assert params.g.coeffs[2] == pytest.approx(0.5)

    def test_ensemble_is_rescaled(self):
        config = parse_config_text(BASE + "grid.N = 16\nensemble.size = 3\nensemble.norms = 1, 10\n")
        norms = [energy_space_norm(xi) for xi in config.ensemble()]
        assert norms == pytest.approx([1.0, 10.0, 1.0])

    def test_zero_state_cannot_be_rescaled(self):
        config = parse_config_text(BASE + "initial.kind = zero\nensemble.norms = 5\n")
        with pytest.raises(ConfigurationError):
            config.ensemble()

    def test_output_dir_precedence(self, tmp_path):
        settings = Settings(tmp_path / "env", 1, "INFO")
        assert parse_config_text(BASE).output_dir(settings) == tmp_path / "env"
        assert parse_config_text(BASE + f"output.dir = {tmp_path}\n").output_dir(settings) == tmp_path


class TestSettings:
    def test_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("DWSIM_OUTPUT_DIR", str(tmp_path))
        monkeypatch.setenv("DWSIM_WORKERS", "4")
        monkeypatch.setenv("LOG_LEVEL", "debug")
        settings = Settings.from_env()
        assert settings == Settings(tmp_path, 4, "DEBUG")

    def test_bad_worker_count(self, monkeypatch):
        monkeypatch.setenv("DWSIM_WORKERS", "several")
        with pytest.raises(ConfigurationError):
            Settings.from_env()


class TestPresets:
    def test_registry(self):
        assert len(list_presets()) == 14
        assert {"energy-equality", "attractor", "dirichlet-regularity"} <= set(PRESETS)

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError, match="unknown preset"):
            get_preset("warp-drive", line=1)

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_templates_validate(self, name):
        config = get_preset(name).config()
        assert config.experiment == name
        config.build_params()

    def test_uniqueness_needs_two_deltas(self):
        preset = get_preset("uniqueness")
        with pytest.raises(ConfigurationError, match="two perturbation sizes"):
            preset.run(preset.config(["experiment.deltas=1e-4", "grid.N=16"]))

    @pytest.mark.parametrize("values, passed", [
        ([1.0, 1.05], True),
        ([-0.5, -0.52], True),
        ([1.0, 2.0], False),
        ([0.0, 0.0], False),
    ])
    def test_stability_fit(self, values, passed):
        fit = _stability_fit("growth-rate-stability", values, 0.1)
        assert fit.passed == passed
        if not any(values):
            assert fit.notes == ["every fitted value is zero: nothing was compared"]


class TestCli:
    def test_list_presets(self, capsys):
        assert main(["list-presets"]) == EXIT_OK
        assert len(capsys.readouterr().out.strip().splitlines()) == 14

    def test_template(self, capsys):
        assert main(["template", "mean-mode"]) == EXIT_OK
        assert "experiment = mean-mode" in capsys.readouterr().out
        assert main(["template", "nope"]) == EXIT_CONFIG

    def test_missing_gamma(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("experiment = mean-mode\nintegrator.seed = 1\n")
        assert main(["run", str(cfg)]) == EXIT_CONFIG

    def test_unknown_experiment(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(BASE.replace("mean-mode", "warp-drive"))
        assert main(["run", str(cfg)]) == EXIT_CONFIG

    def test_preset_run_writes_the_report(self, tmp_path):
        code = main(["run", "--preset", "dirichlet-extension", "--output-dir", str(tmp_path),
                     "--override", "experiment.samples=5"])
        assert code == EXIT_OK
        out = tmp_path / "dirichlet-extension"
        report = json.loads((out / "report.json").read_text())
        assert report["status"] == "passed"
        assert report["schema_version"] == 1
        assert (out / "fits" / "extension-oddness.json").exists()

    def test_config_file_run_with_ledgers(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(BASE + "model.alpha = 0\nmodel.nonlinearity = 1, 0, 0\nmodel.forcing = constant\n"
                              "grid.N = 16\nintegrator.dt = 1e-2\nintegrator.T = 1\nintegrator.stride = 10\n"
                              "output.dump_coefficients = true\n")
        assert main(["run", str(cfg), "--output-dir", str(tmp_path)]) == EXIT_OK
        out = Path(tmp_path) / "mean-mode"
        assert (out / "trajectory.csv").exists()
        assert (out / "trajectory.bin").exists()
        assert json.loads((out / "trajectory.trajectory.json").read_text())["kind"] == "trajectory"

    def test_failed_check_exit(self, tmp_path):
        code = main(["run", "--preset", "mean-mode", "--output-dir", str(tmp_path),
                     "--override", "integrator.T=1", "--override", "grid.N=16",
                     "--override", "tolerance.mean_mode=-1"])
        assert code == EXIT_CHECK_FAILED
        report = json.loads((tmp_path / "mean-mode" / "report.json").read_text())
        assert "mean-mode" in report["failing"]

    def test_divergence_exit(self, tmp_path):
        argv = ["run", "--preset", "mean-mode", "--output-dir", str(tmp_path)]
        for item in DIVERGING:
            argv += ["--override", item]
        assert main(argv) == EXIT_DIVERGED
        report = json.loads((tmp_path / "mean-mode" / "report.json").read_text())
        assert report["status"] == "diverged"
        assert (tmp_path / "mean-mode" / "diverged.csv").exists()
