import json

import pytest

from gdcv import cli, io


def _write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


TINY_CUSTOM = {
    "kind": "custom",
    "model": {
        "n": 40,
        "p": 20,
        "covariance": {"kind": "isotropic"},
        "signal": {"kind": "random_sphere", "norm": 1.0},
        "response": {"kind": "linear"},
        "noise": {"kind": "gaussian", "variance": 1.0},
    },
    "schedule": {"step_size": 0.05, "n_steps": 25},
    "seeds": [0, 1],
}


class TestConfigHandling:
    def test_empty_config_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("", encoding="utf-8")
        assert cli.main(["run", str(path)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_unknown_kind_exits_2(self, tmp_path):
        path = _write_config(tmp_path, {"kind": "figure-9000"})
        assert cli.main(["run", str(path)]) == 2

    def test_bad_model_block_exits_2(self, tmp_path):
        cfg = json.loads(json.dumps(TINY_CUSTOM))
        cfg["model"]["noise"] = {"kind": "student_t", "dof": "five"}
        path = _write_config(tmp_path, cfg)
        assert cli.main(["run", str(path)]) == 2

    def test_preset_merging_keeps_overrides(self, tmp_path):
        path = _write_config(
            tmp_path, {"kind": "fig1", "model": {"n": 50, "p": 25}}
        )
        cfg = cli.load_config(path)
        assert cfg["model"]["n"] == 50
        assert cfg["model"]["covariance"] == {"kind": "isotropic"}
        assert cfg["schedule"]["n_steps"] == 200


class TestRunCustom:
    def test_end_to_end_and_manifest(self, tmp_path):
        path = _write_config(tmp_path, TINY_CUSTOM)
        out = tmp_path / "artifacts"
        assert cli.main(["run", str(path), "--out", str(out)]) == 0
        for seed in (0, 1):
            csv = out / f"risk_curves_seed{seed}.csv"
            assert csv.exists()
            header = csv.read_text(encoding="utf-8").splitlines()[0]
            assert header == "k,value,label"
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["seeds"] == [0, 1]
        assert manifest["config_sha256"] == io.config_digest(manifest["config"])

    def test_rerun_byte_identical(self, tmp_path):
        path = _write_config(tmp_path, TINY_CUSTOM)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli.main(["run", str(path), "--out", str(out1)]) == 0
        assert cli.main(["run", str(path), "--out", str(out2)]) == 0
        for seed in (0, 1):
            name = f"risk_curves_seed{seed}.csv"
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_threads_do_not_change_output(self, tmp_path):
        path = _write_config(tmp_path, TINY_CUSTOM)
        out1, out2 = tmp_path / "t1", tmp_path / "t4"
        assert cli.main(["run", str(path), "--out", str(out1), "--threads", "1"]) == 0
        assert cli.main(["run", str(path), "--out", str(out2), "--threads", "4"]) == 0
        for seed in (0, 1):
            name = f"risk_curves_seed{seed}.csv"
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_seeds_flag_overrides_config(self, tmp_path):
        path = _write_config(tmp_path, TINY_CUSTOM)
        out = tmp_path / "s"
        assert cli.main(["run", str(path), "--out", str(out), "--seeds", "7"]) == 0
        assert (out / "risk_curves_seed7.csv").exists()
        assert not (out / "risk_curves_seed0.csv").exists()

    def test_env_var_out_dir(self, tmp_path, monkeypatch):
        env_dir = tmp_path / "från-env"
        monkeypatch.setenv("GDCV_OUT", str(env_dir))
        path = _write_config(tmp_path, TINY_CUSTOM)
        assert cli.main(["run", str(path)]) == 0
        assert (env_dir / "risk_curves_seed0.csv").exists()

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    @pytest.mark.filterwarnings("ignore:largest step size")
    def test_numerical_failure_exits_3(self, tmp_path, capsys):
        cfg = json.loads(json.dumps(TINY_CUSTOM))
        cfg["schedule"] = {"step_size": 500.0, "n_steps": 400}
        path = _write_config(tmp_path, cfg)
        assert cli.main(["run", str(path), "--out", str(tmp_path / "x")]) == 3
        assert "numerical failure" in capsys.readouterr().err


class TestOtherKinds:
    def test_fig1_columns(self, tmp_path):
        cfg = {
            "kind": "fig1",
            "model": {"n": 60, "p": 40},
            "schedule": {"step_size": 0.02, "n_steps": 15},
            "seeds": [0],
        }
        path = _write_config(tmp_path, cfg)
        out = tmp_path / "f1"
        assert cli.main(["run", str(path), "--out", str(out)]) == 0
        lines = (out / "fig1_seed0.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "k,true_risk,gcv,loocv"
        assert len(lines) == 17

    def test_fig2_coverage_columns(self, tmp_path):
        cfg = {
            "kind": "fig2-coverage",
            "model": {"n": 50, "p": 30},
            "schedule": {"step_size": 0.02, "n_steps": 20},
            "record_every": 10,
            "n_test": 300,
            "levels": [0.8],
            "seeds": [0],
        }
        path = _write_config(tmp_path, cfg)
        out = tmp_path / "f2"
        assert cli.main(["run", str(path), "--out", str(out)]) == 0
        lines = (out / "coverage_seed0.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "k,nominal,coverage,stderr,mean_length"
        assert len(lines) == 4  # header + ks {0, 10, 20}

    def test_fig3_outputs(self, tmp_path):
        cfg = {
            "kind": "fig3-distributions",
            "model": {"n": 40, "p": 20},
            "schedule": {"step_size": 0.02, "n_steps": 8},
            "n_test": 200,
            "seeds": [2],
        }
        path = _write_config(tmp_path, cfg)
        out = tmp_path / "f3"
        assert cli.main(["run", str(path), "--out", str(out)]) == 0
        assert (out / "errors_seed2.csv").exists()
        ks_lines = (out / "ks_seed2.csv").read_text(encoding="utf-8").splitlines()
        assert ks_lines[0] == "k,ks_statistic"

    def test_limits_mismatch_contour_data(self, tmp_path):
        cfg = {
            "kind": "limits-mismatch",
            "grid": {
                "time": [0.0, 0.5, 1.0],
                "zeta": [0.5, 2.0],
                "signal_energy": 1.0,
                "noise_variance": 1.0,
            },
        }
        path = _write_config(tmp_path, cfg)
        out = tmp_path / "lm"
        assert cli.main(["run", str(path), "--out", str(out)]) == 0
        lines = (out / "limit_curves.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "T,zeta,value,label"
        assert len(lines) == 1 + 2 * 3 * 3
        zetas = {line.split(",")[1] for line in lines[1:]}
        assert zetas == {"0.5", "2.0"}

    def test_bench_outputs(self, tmp_path):
        cfg = {
            "kind": "shortcut-bench",
            "bench": {"n": 40, "k_values": [5, 10], "step_size": 0.05},
        }
        path = _write_config(tmp_path, cfg)
        out = tmp_path / "b"
        assert cli.main(["run", str(path), "--out", str(out)]) == 0
        lines = (out / "bench.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("n,k,naive_seconds,shortcut_seconds")
        assert len(lines) == 3


class TestAccept:
    def test_unknown_suite_exits_2(self, capsys):
        assert cli.main(["accept", "nope"]) == 2
        assert "unknown suite" in capsys.readouterr().err

    def test_mp_moments_suite_passes_with_report(self, tmp_path, capsys):
        assert cli.main(["accept", "mp-moments", "--out", str(tmp_path)]) == 0
        captured = capsys.readouterr().out
        assert "[PASS] criterion 2" in captured
        report = json.loads(
            (tmp_path / "acceptance_mp-moments.json").read_text(encoding="utf-8")
        )
        assert report[0]["passed"] is True
        assert report[0]["criterion"] == 2
