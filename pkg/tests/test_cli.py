import csv
import json

import numpy as np
import pytest
import yaml

from actuator_guidance.cli import EXIT_CONFIG, EXIT_OK, EXIT_ORDERING, build_parser, main, resolve_config

SMALL = {
    "n_modes": 3,
    "grid_steps": 60,
    "raster": 11,
    "convergence_modes": [2, 3, 4],
    "optimizer": {"max_iters": 3},
}


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    return lines[0].split("=", 1)[1], list(csv.DictReader(lines[1:]))


def test_validate(capsys, small_cfg):
    assert main(["validate", "--config", str(small_cfg)]) == EXIT_OK
    assert "config_hash=" in capsys.readouterr().out


def test_validate_rejects(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("sigma: -0.05\n")
    assert main(["validate", "--config", str(bad)]) == EXIT_CONFIG
    assert "kernel width" in capsys.readouterr().err
    assert main(["validate", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG


def test_flags_override_config(small_cfg):
    args = build_parser().parse_args(
        ["solve", "--config", str(small_cfg), "--bc", "neumann", "--no-disturbance",
         "--grid-steps", "40", "--max-iters", "2", "--n-modes", "5"]
    )
    cfg = resolve_config(args)
    assert cfg.bc == "neumann" and cfg.preset == "neumann-paper"
    assert cfg.disturbance.enabled is False
    assert (cfg.grid_steps, cfg.optimizer.max_iters, cfg.n_modes) == (40, 2, 5)


def test_env_override(small_cfg, monkeypatch):
    monkeypatch.setenv("ACTGUIDE_GRID_STEPS", "30")
    cfg = resolve_config(build_parser().parse_args(["validate", "--config", str(small_cfg)]))
    assert cfg.grid_steps == 30


def test_solve_outputs(tmp_path, small_cfg):
    out = tmp_path / "run"
    assert main(["solve", "--config", str(small_cfg), "--out", str(out)]) == EXIT_OK
    meta = json.loads((out / "metadata.json").read_text())
    for name in ("trajectory.csv", "guidance.csv", "control.csv", "norm.csv", "cost_history.csv"):
        h, rows = read_csv(out / name)
        assert h == meta["config_hash"]
        assert rows
    _, ctrl = read_csv(out / "control.csv")
    assert len(ctrl) == 61 and set(ctrl[0]) == {"t", "u1", "u2", "u3", "u4"}
    _, traj = read_csv(out / "trajectory.csv")
    assert float(traj[0]["x1"]) == 0.1 and float(traj[0]["y4"]) == 0.125
    assert meta["optimizer"]["iterations"] <= 3
    assert meta["config"]["n_modes"] == 3


def test_solve_is_reproducible(tmp_path, small_cfg):
    for tag in ("a", "b"):
        assert main(["solve", "--config", str(small_cfg), "--out", str(tmp_path / tag)]) == EXIT_OK
    for name in ("trajectory.csv", "guidance.csv", "control.csv", "norm.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_full_precision_numbers(tmp_path, small_cfg):
    main(["solve", "--config", str(small_cfg), "--out", str(tmp_path)])
    _, rows = read_csv(tmp_path / "norm.csv")
    assert any(len(r["norm"].replace(".", "").lstrip("0")) >= 15 for r in rows)


def test_bench_outputs(tmp_path, small_cfg):
    code = main(["bench", "--config", str(small_cfg), "--out", str(tmp_path)])
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert code == (EXIT_OK if meta["ordering_ok"] else EXIT_ORDERING)
    _, rows = read_csv(tmp_path / "table.csv")
    assert [r["strategy"] for r in rows] == ["opt. feedback", "opt. open-loop", "semi-naive", "naive", "no control"]
    assert float(rows[-1]["total_percent"]) == 100.0
    assert float(rows[-1]["J_m"]) == 0.0
    _, norms = read_csv(tmp_path / "norms.csv")
    assert len(norms) == 61
    _, snap = read_csv(tmp_path / "snapshots" / "no_control_t0.2.csv")
    assert len(snap) == 11 * 11
    z = np.array([float(r["z"]) for r in snap])
    assert np.abs(z).max() > 0


def test_converge_outputs(tmp_path, small_cfg):
    assert main(["converge", "--config", str(small_cfg), "--out", str(tmp_path)]) == EXIT_OK
    _, rows = read_csv(tmp_path / "convergence.csv")
    assert [int(r["N"]) for r in rows] == [2, 3, 4]
    assert float(rows[-1]["normalized_percent"]) == 100.0


def test_unwritable_output(tmp_path, small_cfg):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["solve", "--config", str(small_cfg), "--out", str(blocker / "sub")]) == EXIT_CONFIG
