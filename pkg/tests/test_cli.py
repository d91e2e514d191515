import json

from isacopt.cli import main


def write_config(tmp_path, **overrides):
    cfg = {
        "kind": "convergence",
        "scene": {"n_tx": 3, "n_rx": 3, "n_users": 2, "irs_rows": 2,
                  "irs_cols": 2, "alpha_mag": 0.1},
        "solver": {"t_max": 3, "n_g": 10},
        "beta_values": [0.5],
        "trials": 2,
        "master_seed": 1,
        "output_dir": str(tmp_path / "default_out"),
    }
    cfg.update(overrides)
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    return path


class TestRun:
    def test_successful_run(self, tmp_path, capsys):
        config = write_config(tmp_path)
        out = tmp_path / "results"
        code = main(["run", "--config", str(config), "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out.strip().splitlines()
        assert any("convergence_beta0.5.csv" in line for line in printed)
        assert (out / "convergence_beta0.5.csv").exists()

    def test_seed_and_trials_override(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "results"
        code = main(["run", "--config", str(config), "--out", str(out),
                     "--seed", "9", "--trials", "1"])
        assert code == 0
        meta = json.loads(
            (out / "convergence_beta0.5.csv.meta.json").read_text())
        assert meta["config"]["master_seed"] == 9
        assert meta["config"]["trials"] == 1

    def test_bad_config_exits_2(self, tmp_path, capsys):
        config = write_config(tmp_path, kind="unheard-of")
        assert main(["run", "--config", str(config)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2

    def test_unknown_scene_key_exits_2(self, tmp_path):
        config = write_config(tmp_path, scene={"n_tx": 3, "n_rx": 3,
                                               "mystery": 1})
        assert main(["run", "--config", str(config)]) == 2


class TestBench:
    def test_bench_runs(self, tmp_path, capsys):
        config = write_config(tmp_path)
        out = tmp_path / "bench"
        code = main(["bench", "--config", str(config), "--out", str(out)])
        assert code == 0
        assert (out / "bench.csv").exists()
        assert (out / "bench_timing.csv").exists()


class TestPlotdata:
    def test_emits_gnuplot_columns(self, tmp_path, capsys):
        config = write_config(tmp_path)
        out = tmp_path / "results"
        main(["run", "--config", str(config), "--out", str(out)])
        csv_path = out / "convergence_beta0.5.csv"
        assert main(["plotdata", "--csv", str(csv_path)]) == 0
        dat = csv_path.with_suffix(".dat").read_text().splitlines()
        assert dat[0].startswith("# iteration mean_objective")
        assert len(dat[1].split()) == 5

    def test_missing_csv_exits_2(self, tmp_path):
        assert main(["plotdata", "--csv", str(tmp_path / "nope.csv")]) == 2


class TestValidateConfig:
    def test_valid_config(self, tmp_path, capsys):
        config = write_config(tmp_path)
        assert main(["validate-config", "--config", str(config)]) == 0
        captured = capsys.readouterr()
        assert "config ok" in captured.err
        resolved = json.loads(captured.out)
        assert resolved["scene"]["n_tx"] == 3

    def test_spacing_warning(self, tmp_path, capsys):
        config = write_config(
            tmp_path, scene={"n_tx": 3, "n_rx": 3,
                             "spacing_over_lambda": 0.25})
        assert main(["validate-config", "--config", str(config)]) == 0
        assert "spacing" in capsys.readouterr().err

    def test_invalid_exits_2(self, tmp_path):
        config = write_config(tmp_path, trials=0)
        assert main(["validate-config", "--config", str(config)]) == 2
