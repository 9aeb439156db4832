"""Command-line driver: subcommands, configuration, and error funnel."""

import json

import numpy as np
import pytest

from ssgpr.cli import load_config, main
from ssgpr.offline import MaterialPool


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_params_default_accepts(capsys):
    code, out, _ = run_cli(["validate-params"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["accepted"] is True
    assert report["required_lf"] == pytest.approx(5.25 * np.log2(np.e))


def test_analyze_leakage_worked_example(capsys):
    code, out, _ = run_cli(["analyze-leakage", "--m-u", "3", "--m-r", "5"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["expected_leakage"] == "7/15"
    assert report["p_secure"] == "3/5"
    assert report["matches_closed_form"] is True


def test_analyze_leakage_bad_regime_fails(capsys):
    code, _, err = run_cli(["analyze-leakage", "--m-u", "9", "--m-r", "5"], capsys)
    assert code == 2
    assert "failed" in err


def test_bench_exp_round_and_volume(capsys):
    code, out, _ = run_cli(["bench-exp", "--sizes", "64"], capsys)
    assert code == 0
    entry = json.loads(out)["results"][0]
    assert entry["rounds"] == 1 == entry["rounds_expected"]
    assert entry["volume_bits"] == 2 * 64 * 64 == entry["volume_bits_expected"]
    assert entry["max_abs_error"] <= 4 * 2.0 ** -26


def test_bench_matinv_rounds(capsys):
    code, out, _ = run_cli(["bench-matinv", "--sizes", "8", "--runs", "2"], capsys)
    assert code == 0
    entry = json.loads(out)["results"][0]
    assert entry["rounds"] == 170 == entry["rounds_expected"]
    assert entry["loss_mi_mean"] <= 1e-3


def test_run_gpr_end_to_end(tmp_path, capsys):
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.25, 0.25, (12, 2))
    y = 10.0 + np.sin(x.sum(axis=1))
    rows = "\n".join(",".join(f"{v:.8f}" for v in (*xi, yi)) for xi, yi in zip(x, y))
    data = tmp_path / "train.csv"
    data.write_text(rows + "\n")
    out_path = tmp_path / "report.json"
    code, _, err = run_cli(["run-gpr", "--data", str(data), "--test-size", "2",
                            "--seed", "0", "--out", str(out_path)], capsys)
    assert code == 0, err
    report = json.loads(out_path.read_text())
    assert report["n"] == 10 and report["n_test"] == 2
    assert report["loss_mu_mean"] <= 1e-4
    assert report["loss_var_mean"] <= 1e-3
    run = report["runs"][0]
    assert run["matinv_rounds_recorded"] == run["matinv_rounds_expected"]


def test_run_gpr_scenario_flag(tmp_path, capsys):
    rng = np.random.default_rng(1)
    x = rng.uniform(-0.25, 0.25, (8, 2))
    y = 10.0 + np.sin(x.sum(axis=1))
    data = tmp_path / "train.csv"
    data.write_text("\n".join(",".join(f"{v:.8f}" for v in (*xi, yi))
                              for xi, yi in zip(x, y)) + "\n")
    code, out, err = run_cli(["run-gpr", "--data", str(data), "--test-size", "2",
                              "--scenario", "pds"], capsys)
    assert code == 0, err
    assert json.loads(out)["scenario"] == "pds"


def test_run_gpr_missing_file_funnels_error(capsys):
    code, _, err = run_cli(["run-gpr", "--data", "/nonexistent.csv"], capsys)
    assert code == 2
    assert "run-gpr failed" in err


def test_gen_offline_writes_pools(tmp_path, capsys):
    prefix = str(tmp_path / "pool")
    code, out, _ = run_cli(["gen-offline", "--prefix", prefix, "--triples", "2",
                            "--triple-shape", "3", "--matrix-dims", "2,2,2",
                            "--masks", "1"], capsys)
    assert code == 0
    report = json.loads(out)
    pools = [MaterialPool.load(p) for p in report["files"]]
    assert len(pools[0].triples) == 2
    assert len(pools[0].matrix_triples) == 1
    assert len(pools[1].exp_masks) == 1


def test_config_file_parsing(tmp_path):
    path = tmp_path / "cfg"
    path.write_text("lf = 20  # fewer fraction bits\nseeds = 1,2\nnormalize = off\n")
    cfg = load_config(str(path))
    assert cfg["lf"] == 20
    assert cfg["seeds"] == [1, 2]
    assert cfg["normalize"] is False


def test_config_unknown_key_rejected(tmp_path):
    path = tmp_path / "cfg"
    path.write_text("bogus = 1\n")
    with pytest.raises(ValueError, match="unknown key"):
        load_config(str(path))


def test_config_flag_overrides(tmp_path, capsys):
    path = tmp_path / "cfg"
    path.write_text("lf = 29\nu_min = -4\nr_max = 16\n")
    code, out, _ = run_cli(["validate-params", "--config", str(path)], capsys)
    assert code == 0
    assert json.loads(out)["accepted"] is True
