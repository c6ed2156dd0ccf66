import json
from pathlib import Path

import pytest

from padnas.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, main

from conftest import quantile_band, toy_space

from padnas import synth_latency_table


@pytest.fixture()
def toy_cfg_path(tmp_path):
    space = toy_space("basic", reps=(1, 2, 2))
    table = synth_latency_table(space, rng=1)
    band = quantile_band(space, table, n=300)
    cfg = {
        "space_profile": space.to_profile(),
        "stages": 3,
        "lat_min": band.lat_min,
        "lat_max": band.lat_max,
        "ces": {"population_size": 16, "iterations": 4},
        "seed": 5,
        "top_n": 3,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_run_subcommand_end_to_end(toy_cfg_path, tmp_path, capsys):
    out_dir = tmp_path / "out"
    code = main(["run", "--config", str(toy_cfg_path), "--out", str(out_dir)])
    assert code == EXIT_OK
    printed = capsys.readouterr().out
    assert "completed 3 stages" in printed
    assert (out_dir / "summary.json").exists()
    assert (out_dir / "stages" / "stage-3.json").exists()
    # resume of the finished run is a no-op that still exits cleanly
    assert main(["run", "--config", str(toy_cfg_path), "--resume", str(out_dir)]) == EXIT_OK


def test_run_band_override_can_make_infeasible(toy_cfg_path):
    code = main([
        "run", "--config", str(toy_cfg_path), "--lat-min", "0", "--lat-max", "0.001",
    ])
    assert code == EXIT_INFEASIBLE


def test_config_errors_exit_2(tmp_path):
    missing = tmp_path / "none.json"
    assert main(["run", "--config", str(missing)]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"stages": 1}))
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG


def test_baseline_modes(toy_cfg_path, capsys):
    assert main(["baseline", "--mode", "random", "--config", str(toy_cfg_path), "--n", "4"]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["n"] == 4 and "mean_true_accuracy" in summary

    assert main(["baseline", "--mode", "spos", "--config", str(toy_cfg_path), "--n", "2"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and "acc=" in lines[0]

    assert main(["baseline", "--mode", "i-supernet", "--config", str(toy_cfg_path)]) == EXIT_OK
    assert "acc=" in capsys.readouterr().out


def test_space_export_round_trip(tmp_path, capsys):
    out = tmp_path / "basic.json"
    assert main(["space", "--profile", "basic", "--out", str(out)]) == EXIT_OK
    from padnas import build_space

    assert build_space(str(out)).size() == 3 * 6**6 * 7**15
    assert main(["space", "--profile", "large"]) == EXIT_OK
    printed = capsys.readouterr().out
    assert '"layers"' in printed


def test_distmatrix_renders_csv(toy_cfg_path, tmp_path):
    out_dir = tmp_path / "out"
    main(["run", "--config", str(toy_cfg_path), "--out", str(out_dir)])
    matrix = tmp_path / "matrix.csv"
    code = main([
        "distmatrix", "--stage-report", str(out_dir / "stages" / "stage-2.json"),
        "--out", str(matrix),
    ])
    assert code == EXIT_OK
    lines = matrix.read_text().strip().splitlines()
    assert lines[0].startswith("op,layer0,")
    assert len(lines) > 3
