"""Config parsing, experiment commands, output format, exit codes."""

import numpy as np
import numpy.testing as npt
import pytest

import sampledkf as sk
from sampledkf.cli import (build_config, emit_plot_data, main,
                           parse_config_text)
from sampledkf.errors import ConfigError

CONVERGE_CFG = """\
# tiny convergence study
experiment = converge
model.kind = heat
model.num_modes = 4
model.horizon = 1.0
n_values = 2, 4
k_ref = 3
"""

SIMULATE_CFG = """\
experiment = simulate
model.kind = heat
model.num_modes = 3
model.horizon = 1.0
simulate_n = 4
trials = 50
seed = 3
"""


def write_cfg(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def data_lines(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return lines[0].split(","), [l.split(",") for l in lines[1:]]


class TestParseConfigText:
    def test_comments_and_blanks_are_skipped(self):
        raw = parse_config_text(CONVERGE_CFG)
        assert raw["experiment"] == "converge"
        assert raw["n_values"] == "2, 4"
        assert "model.q_scalar" not in raw

    def test_unknown_key_names_the_line(self):
        with pytest.raises(ConfigError, match="line 2: unknown key 'frobnicate'"):
            parse_config_text("experiment = converge\nfrobnicate = 3\n")

    def test_duplicate_key_names_the_line(self):
        with pytest.raises(ConfigError, match="line 3: duplicate key"):
            parse_config_text("experiment = converge\n\nexperiment = fit\n")

    def test_missing_equals_sign(self):
        with pytest.raises(ConfigError, match="expected 'key = value'"):
            parse_config_text("experiment converge\n")

    def test_empty_value(self):
        with pytest.raises(ConfigError, match="empty value for 'k_ref'"):
            parse_config_text("k_ref =\n")


class TestBuildConfig:
    def test_coercions(self):
        cfg = build_config(parse_config_text(
            "experiment = converge\nmodel.kind = heat\nmodel.num_modes = 4\n"
            "n_values = 2,4 8\nper_n_reference = yes\ncheck_reference = 0\n"))
        assert cfg.values["n_values"] == (2, 4, 8)
        assert cfg.values["per_n_reference"] is True
        assert cfg.values["check_reference"] is False

    def test_bad_bool(self):
        with pytest.raises(ConfigError, match="per_n_reference: expected true/false"):
            build_config({"experiment": "converge", "model.kind": "heat",
                          "model.num_modes": "4", "n_values": "2",
                          "per_n_reference": "maybe"})

    def test_bad_choice(self):
        with pytest.raises(ConfigError, match="expected one of heat, wave"):
            build_config({"experiment": "converge", "model.kind": "plasma",
                          "model.num_modes": "4", "n_values": "2"})

    def test_required_keys_per_experiment(self):
        base = {"experiment": "converge", "model.kind": "heat",
                "model.num_modes": "4"}
        with pytest.raises(ConfigError, match="n_values: required for experiment"):
            build_config(base)
        with pytest.raises(ConfigError, match="theorems: required for experiment"):
            build_config({**base, "experiment": "bounds", "n_values": "2"})

    def test_positive_sample_counts(self):
        with pytest.raises(ConfigError, match="entries must be positive integers"):
            build_config({"experiment": "converge", "model.kind": "heat",
                          "model.num_modes": "4", "n_values": "0, 4"})


class TestConvergeCommand:
    def test_csv_layout(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CONVERGE_CFG)
        out = tmp_path / "run.csv"
        assert main(["converge", "--config", cfg, "--out", str(out)]) == 0
        err = capsys.readouterr().err
        assert "elapsed " in err

        text = out.read_text()
        head = text.splitlines()
        assert head[0] == f"# sampledkf {sk.__version__}"
        assert head[1] == "# config:"
        commented = [l for l in head[2:] if l.startswith("# ")]
        assert commented == sorted(commented)
        assert not any(l.startswith("# out") for l in head)

        cols, rows = data_lines(out)
        assert cols == ["model", "n", "K_ref", "trace_n", "trace_ref",
                        "discrepancy"]
        assert [r[1] for r in rows] == ["2", "4"]
        for r in rows:
            npt.assert_allclose(float(r[5]), float(r[3]) - float(r[4]),
                                rtol=1e-12)
            assert float(r[5]) > 0

    def test_reruns_are_byte_identical(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CONVERGE_CFG)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["converge", "--config", cfg, "--out", str(out1)])
        main(["converge", "--config", cfg, "--out", str(out2)])
        assert out1.read_bytes() == out2.read_bytes()

    def test_stdout_when_no_out(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CONVERGE_CFG)
        assert main(["converge", "--config", cfg]) == 0
        captured = capsys.readouterr()
        assert "discrepancy" in captured.out
        assert "elapsed" not in captured.out


class TestSimulateCommand:
    def test_layout_and_determinism(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, SIMULATE_CFG)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        cols, rows = data_lines(out1)
        assert cols == ["model", "n", "trials", "seed", "empirical_mean",
                        "std_error", "trace_err", "z_score"]
        assert rows[0][1:4] == ["4", "50", "3"]

    def test_seed_override_lands_in_header_and_data(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, SIMULATE_CFG)
        out = tmp_path / "s.csv"
        main(["simulate", "--config", cfg, "--out", str(out), "--seed", "99"])
        text = out.read_text()
        assert "# seed = 99" in text
        _, rows = data_lines(out)
        assert rows[0][3] == "99"


class TestBoundsCommand:
    def test_rows_and_plot_blocks(self, tmp_path, capsys):
        plot = tmp_path / "plot.dat"
        cfg = write_cfg(tmp_path, (
            "experiment = bounds\nmodel.kind = heat\nmodel.num_modes = 4\n"
            "n_values = 2, 4\nk_ref = 3\ntheorems = 2, 3\n"
            f"plot_out = {plot}\n"))
        out = tmp_path / "bounds.csv"
        assert main(["bounds", "--config", cfg, "--out", str(out)]) == 0
        cols, rows = data_lines(out)
        assert cols == ["theorem", "n", "bound", "measured", "pass"]
        assert {r[0] for r in rows} == {"2", "3"}
        assert all(r[4] in ("true", "false") for r in rows)
        assert all(float(r[2]) >= float(r[3]) for r in rows if r[4] == "true")

        blocks = plot.read_text().split("\n\n")
        names = [b.splitlines()[0] for b in blocks]
        assert names == ["# series: discrepancy", "# series: theorem2-bound",
                         "# series: theorem3-bound"]


class TestOtherCommands:
    def test_telescope(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, (
            "experiment = telescope\nmodel.kind = heat\nmodel.num_modes = 4\n"
            "telescope_n = 2\ntelescope_levels = 2\n"))
        out = tmp_path / "t.csv"
        assert main(["telescope", "--config", cfg, "--out", str(out)]) == 0
        cols, rows = data_lines(out)
        assert cols == ["model", "n", "levels", "trace_drop", "increment_sum",
                        "residual"]
        assert float(rows[0][5]) < 1e-7

    def test_levelsum(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, (
            "experiment = levelsum\nmodel.kind = heat\nmodel.num_modes = 4\n"
            "levelsum_n = 2\nlevelsum_levels = 3\nlevelsum_weights = domain\n"))
        out = tmp_path / "l.csv"
        assert main(["levelsum", "--config", cfg, "--out", str(out)]) == 0
        cols, rows = data_lines(out)
        assert cols == ["model", "n", "level", "h", "value"]
        assert [r[2] for r in rows] == ["1", "2", "3"]
        values = [float(r[4]) for r in rows]
        assert values == sorted(values, reverse=True)

    def test_fit(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, (
            "experiment = fit\nmodel.kind = heat\nmodel.num_modes = 4\n"
            "n_values = 2, 4, 8\nk_ref = 3\n"))
        out = tmp_path / "f.csv"
        assert main(["fit", "--config", cfg, "--out", str(out)]) == 0
        cols, rows = data_lines(out)
        assert cols == ["model", "n_min", "n_max", "slope", "intercept",
                        "r_squared", "points"]
        assert float(rows[0][3]) < -1.0
        assert float(rows[0][5]) <= 1.0

    def test_validate_config(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CONVERGE_CFG)
        assert main(["validate-config", "--config", cfg]) == 0
        err = capsys.readouterr().err
        assert f"ok: {cfg} (experiment converge)" in err


class TestFailureModes:
    def test_experiment_subcommand_mismatch(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CONVERGE_CFG)
        assert main(["bounds", "--config", cfg]) == 2
        err = capsys.readouterr().err
        assert ("config error: experiment: config requests 'converge' "
                "but the subcommand is 'bounds'") in err

    def test_shaky_reference_exits_three(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, (
            "experiment = converge\nmodel.kind = wave\nmodel.num_modes = 8\n"
            "n_values = 2, 4\nk_ref = 1\n"))
        assert main(["converge", "--config", cfg]) == 3
        assert "numerical error:" in capsys.readouterr().err

    def test_unwritable_output_exits_one(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CONVERGE_CFG)
        code = main(["converge", "--config", cfg,
                     "--out", str(tmp_path / "missing" / "x.csv")])
        assert code == 1
        assert "io error:" in capsys.readouterr().err

    def test_config_error_exits_two(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "experiment = converge\nbogus = 1\n")
        assert main(["converge", "--config", cfg]) == 2
        assert "config error: line 2" in capsys.readouterr().err

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert f"sampledkf {sk.__version__}" in capsys.readouterr().out


class TestPlotData:
    def test_log_log_series(self):
        n = np.array([10, 100, 1000])
        curve = sk.DiscrepancyCurve(
            label="synthetic", horizon=1.0, n_values=n,
            values=1.0 / n.astype(float), coarse_traces=np.ones(3),
            reference_traces=np.ones(3), reference_trace=1.0,
            reference_points=64000, reference_level=6)
        block = emit_plot_data(curve).strip().splitlines()
        assert block[0] == "# series: discrepancy"
        for line, k in zip(block[1:], (1.0, 2.0, 3.0)):
            x, y = (float(p) for p in line.split())
            npt.assert_allclose(x, k, rtol=1e-15)
            npt.assert_allclose(y, -k, rtol=1e-15)
