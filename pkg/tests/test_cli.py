import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from steerfid import cli
from steerfid.errors import SolverError
from steerfid.qcore import DensityMatrix, Layout, projector, random_pure
from steerfid.states import state_to_json

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_state(path, rho):
    path.write_text(json.dumps(state_to_json(rho)))
    return str(path)


def small_config(tmp_path, **vqsa):
    data = {"vqsa": {"iterations": 30, "shots": 64, **vqsa}, "oracle": {"restarts": 4}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return str(path)


def test_partition_parsing():
    assert cli.parse_partition("A1,A2|B1,B2") == [["A1", "A2"], ["B1", "B2"]]
    with pytest.raises(ValueError):
        cli.parse_partition("A1,A2")


def test_estimate_writes_outputs(tmp_path):
    out = tmp_path / "run"
    code = cli.main(["estimate", "--state", "bell-mixture", "--config", small_config(tmp_path), "--out", str(out), "--seed", "3"])
    assert code == 0
    rows = list(csv.reader((out / "trace.csv").open()))
    assert rows[0] == ["iteration", "reward", "best_reward"] and len(rows) == 31
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary) == {"final", "best", "config", "seed"}
    assert summary["seed"] == 3 and summary["config"]["iterations"] == 30


def test_estimate_is_reproducible(tmp_path):
    cfg = small_config(tmp_path)
    for name in ("a", "b"):
        assert cli.main(["estimate", "--state", "bell-mixture", "--config", cfg, "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_estimate_product_state(tmp_path):
    rng = np.random.default_rng(4)
    v = np.kron(random_pure(2, rng), random_pure(2, rng))
    state = write_state(tmp_path / "prod.json", DensityMatrix(projector(v), Layout([("A", 2), ("B", 2)])))
    out = tmp_path / "run"
    code = cli.main(["estimate", "--state", state, "--config", str(CONFIGS / "bell_mixture.json"), "--out", str(out)])
    assert code == 0
    assert json.loads((out / "summary.json").read_text())["best"] >= 0.98


def test_estimate_bell_mixture_config(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["estimate", "--state", "bell-mixture", "--config", str(CONFIGS / "bell_mixture.json"), "--out", str(out)]) == 0
    assert abs(json.loads((out / "summary.json").read_text())["best"] - 0.93) < 0.01


def test_invalid_layout_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"layout": [["A", 2], ["A", 2]], "matrix": np.eye(4).tolist()}))
    assert cli.main(["estimate", "--state", str(bad), "--out", str(tmp_path)]) == 2
    assert "duplicate labels" in capsys.readouterr().err


def test_unknown_config_key_exit_code(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"vqsa": {"layerz": 2}}))
    assert cli.main(["estimate", "--state", "bell-mixture", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_benchmark_outputs(tmp_path):
    code = cli.main(["benchmark", "--state", "bell-mixture", "--k", "2", "--out", str(tmp_path)])
    assert code == 0
    data = json.loads((tmp_path / "benchmark.json").read_text())
    assert abs(data["value"] - 0.93) < 0.005
    assert data["k"] == 2 and data["solver_status"] == "optimal"
    assert set(data["residuals"]) == {"primal_infeasibility", "dual_infeasibility", "gap"}
    assert len(data["bounds"]) == 2


def test_benchmark2_product_state(tmp_path):
    rng = np.random.default_rng(8)
    v = np.kron(random_pure(2, rng), random_pure(2, rng))
    state = write_state(tmp_path / "prod.json", DensityMatrix(projector(v), Layout([("A", 2), ("B", 2)])))
    assert cli.main(["benchmark", "--state", state, "--variant", "2", "--k", "1", "--out", str(tmp_path)]) == 0
    assert abs(json.loads((tmp_path / "benchmark.json").read_text())["value"] - 1) < 1e-5


def test_benchmark_k_guard(tmp_path):
    assert cli.main(["benchmark", "--state", "bell-mixture", "--k", "5", "--out", str(tmp_path)]) == 2


def test_solver_failure_exit_code(tmp_path, monkeypatch, capsys):
    def fail(*args, **kwargs):
        raise SolverError("stopped with status max_iter (residuals {'gap': 0.1})")

    monkeypatch.setattr(cli, "solve_benchmark1", fail)
    assert cli.main(["benchmark", "--state", "bell-mixture", "--out", str(tmp_path)]) == 3
    assert "residuals" in capsys.readouterr().err


def test_oracle_command(tmp_path):
    assert cli.main(["oracle", "--state", "ghz3", "--out", str(tmp_path)]) == 0
    assert abs(json.loads((tmp_path / "oracle.json").read_text())["value"] - 0.5) < 1e-6


def test_compare_bell_mixture(tmp_path):
    assert cli.main(["compare", "--state", "bell-mixture", "--config", small_config(tmp_path), "--out", str(tmp_path)]) == 0
    values = json.loads((tmp_path / "compare.json").read_text())["values"]
    exact = [values["oracle"], values["benchmark1_k2"], values["benchmark2_k2"]]
    assert max(exact) - min(exact) < 0.01
    rows = list(csv.reader((tmp_path / "compare.csv").open()))
    assert rows[0] == ["method", "value"] and len(rows) == 5


def test_compare_separable_state(tmp_path):
    rng = np.random.default_rng(2)
    m = np.zeros((4, 4), dtype=complex)
    for q in rng.dirichlet(np.ones(3)):
        m += q * projector(np.kron(random_pure(2, rng), random_pure(2, rng)))
    state = write_state(tmp_path / "sep.json", DensityMatrix(m, Layout([("A", 2), ("B", 2)])))
    assert cli.main(["compare", "--state", state, "--k", "1", "--out", str(tmp_path)]) == 0
    values = json.loads((tmp_path / "compare.json").read_text())["values"]
    assert min(values.values()) >= 0.99


def test_compare_phi_plus(tmp_path):
    assert cli.main(["compare", "--state", "phi-plus", "--out", str(tmp_path)]) == 0
    values = json.loads((tmp_path / "compare.json").read_text())["values"]
    assert abs(values["oracle"] - 0.5) < 1e-6
    assert values["benchmark1_k2"] >= 0.5 - 1e-6 and values["benchmark2_k2"] >= 0.5 - 1e-6


def test_compare_ordering_violation(tmp_path, monkeypatch):
    real = cli._benchmark

    def low(exp, variant, k):
        res = real(exp, variant, k)
        res.value -= 0.1
        return res

    monkeypatch.setattr(cli, "_benchmark", low)
    assert cli.main(["compare", "--state", "bell-mixture", "--out", str(tmp_path)]) == 4


def test_console_script(tmp_path):
    exe = shutil.which("steerfid")
    cmd = [exe] if exe else [sys.executable, "-m", "steerfid.cli"]
    proc = subprocess.run(cmd + ["benchmark", "--state", "phi-plus", "--k", "1", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run(cmd + ["estimate", "--state", "nowhere.json"], capture_output=True, text=True)
    assert proc.returncode == 2
