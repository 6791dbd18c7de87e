import json

import pandas as pd
import pytest

from config import load_config
from engine import DET_COLUMNS, ExperimentEngine, run_command
from errors import ConfigError

WELL = {"kind": "square-well", "depth": -1.0, "width": 1.0}


@pytest.fixture
def load(write_config, tmp_path):
    def build(data, out="out"):
        return load_config(write_config(data), output_dir=str(tmp_path / out))

    return build


def read_errors(cfg):
    with open(f"{cfg.output_dir}/errors.json", encoding="utf-8") as f:
        return json.load(f)


def test_det_keeps_going_past_failed_tasks(load):
    cfg = load({"potential": WELL, "R": [2], "z": [-1, 2], "nystrom_nodes": 64})
    engine = ExperimentEngine(cfg)
    assert engine.run("det") == 1
    frame = pd.read_csv(f"{cfg.output_dir}/det.csv")
    assert list(frame.columns) == DET_COLUMNS
    assert len(frame) == 6
    errors = read_errors(cfg)
    assert len(errors) == 2
    assert all("halfline" in e["task"] and "DomainError" in e["error"] for e in errors)
    stats = engine.get_stats()
    assert stats["tasks_run"] == 8 and stats["tasks_failed"] == 2


def test_det_records_unexpected_exceptions(load, monkeypatch):
    import engine

    def broken(*args, **kwargs):
        raise RuntimeError("nodes exhausted")

    monkeypatch.setattr(engine, "det_nystrom", broken)
    cfg = load({"potential": {"kind": "zero"}, "R": [2], "z": [-1], "nystrom_nodes": 32})
    assert run_command("det", cfg) == 1
    frame = pd.read_csv(f"{cfg.output_dir}/det.csv")
    assert set(frame["method"]) == {"wronskian"} and len(frame) == 2
    errors = read_errors(cfg)
    assert len(errors) == 2
    assert all(e["task"].endswith(":nystrom") and e["error"] == "RuntimeError: nodes exhausted" for e in errors)


def test_det_on_zero_potential(load):
    cfg = load({"potential": {"kind": "zero"}, "R": [2], "z": [-1, [1, 1]], "nystrom_nodes": 32})
    assert run_command("det", cfg) == 0
    frame = pd.read_csv(f"{cfg.output_dir}/det.csv")
    assert (frame["det_re"] == 1.0).all() and (frame["det_im"] == 0.0).all()
    assert read_errors(cfg) == []


def test_det_output_does_not_depend_on_threads(load):
    data = {"potential": WELL, "R": [2, 3], "z": [-1, [1, 1]], "nystrom_nodes": 64}
    first, second = load(data, "one"), load(data, "two")
    assert run_command("det", first, threads=1) == 0
    assert run_command("det", second, threads=3) == 0
    for name in ("det.csv", "det.json"):
        with open(f"{first.output_dir}/{name}", "rb") as a, open(f"{second.output_dir}/{name}", "rb") as b:
            assert a.read() == b.read()


def test_xi_outputs(load):
    cfg = load({"potential": WELL, "R": [5], "lambda_grid": {"lambda_max": 30}})
    assert run_command("xi", cfg) == 0
    with open(f"{cfg.output_dir}/xi_summary.json", encoding="utf-8") as f:
        summary = json.load(f)
    assert [g["csv"] for g in summary["grids"]] == ["xi_R5.csv", "xi_halfline.csv"]
    assert summary["halfline_eigenvalues"] == []
    grid = pd.read_csv(f"{cfg.output_dir}/xi_R5.csv")
    assert list(grid.columns) == ["lambda", "xi"]
    assert (grid["xi"] <= 0).all()


def test_scan_needs_lengths_and_halfline(load):
    with pytest.raises(ConfigError):
        run_command("scan", load({"potential": WELL}))
    with pytest.raises(ConfigError):
        run_command("scan", load({"potential": WELL, "R": [2], "halfline": False}, "other"))


def test_scan_on_zero_potential(load):
    cfg = load({"potential": {"kind": "zero"}, "R": [2, 4]})
    assert run_command("scan", cfg) == 0
    frame = pd.read_csv(f"{cfg.output_dir}/scan.csv")
    assert list(frame.columns) == ["R", "quantity", "value", "reference", "error"]
    assert sorted(frame["R"].unique()) == [2.0, 4.0]
    assert (frame["error"] == 0.0).all()


def test_decompose_needs_split(load):
    with pytest.raises(ConfigError):
        run_command("decompose", load({"potential": WELL, "R": [4]}))


def test_decompose_on_zero_potential(load):
    cfg = load({"potential": {"kind": "zero"}, "R": [4], "halfline": False, "split": {"R1": 2, "R2": 4},
                "lambda_grid": {"lambda_max": 30}})
    assert run_command("decompose", cfg) == 0
    with open(f"{cfg.output_dir}/decompose_summary.json", encoding="utf-8") as f:
        summary = json.load(f)
    assert summary["split"] == {"R1": 2.0, "R2": 4.0}
    assert [g["csv"] for g in summary["grids"]] == ["xi_direct_sum.csv", "split_correction.csv",
                                                    "split_correction_phase.csv"]
    krein = pd.read_csv(f"{cfg.output_dir}/krein_split.csv")
    assert len(krein) == 3 and (krein["residual"] <= 1e-10).all()


def test_unknown_command(load):
    with pytest.raises(ConfigError):
        run_command("plot", load({"potential": WELL}))


@pytest.mark.slow
def test_check_suite_on_zero_potential(load):
    cfg = load({"potential": {"kind": "zero"}, "R": [2, 4], "lambda_grid": {"lambda_max": 40}, "nystrom_nodes": 64})
    assert run_command("check", cfg) == 0
    frame = pd.read_csv(f"{cfg.output_dir}/checks.csv")
    assert list(frame.columns) == ["name", "passed", "detail"]
    assert frame["passed"].all()
    # no split and no Cesàro block: those checks are left out
    assert "decomposition.identity" not in set(frame["name"])
    assert "convergence.cesaro" not in set(frame["name"])

