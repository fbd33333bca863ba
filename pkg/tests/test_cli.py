import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from ca_alloc import cli
from ca_alloc.alloc import SolverFailure
from ca_alloc.model import load_scenario, save_scenario
from ca_alloc.solver import INFEASIBLE

from conftest import make_scenario


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def tiny_file(tmp_path):
    path = tmp_path / "tiny.json"
    assert run("gen", "--preset", "tiny", "--seed", 3, "-o", path) == 0
    return path


def test_gen_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("gen", "--preset", "paper8", "--seed", 1, "-o", a) == 0
    assert run("gen", "--preset", "paper8", "--seed", 1, "-o", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert load_scenario(a).n_carriers == 16


def test_gen_unknown_preset():
    with pytest.raises(SystemExit) as e:
        run("gen", "--preset", "nope")
    assert e.value.code == 2


def test_rates_csv(tiny_file, tmp_path):
    out = tmp_path / "rates.csv"
    assert run("rates", tiny_file, "-o", out) == 0
    rows = read_csv(out)
    s = load_scenario(tiny_file)
    assert rows[0][0] == "carrier" and len(rows) == s.n_carriers + 1
    got = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    np.testing.assert_allclose(got, s.rate_matrix_override / 1e6, atol=1e-6)
    assert b"\r\n" in out.read_bytes()


def test_solve_and_report(tmp_path):
    s = make_scenario([[100, 100]], [60, 60])
    path = tmp_path / "s.json"
    save_scenario(s, path)
    out, log = tmp_path / "r.json", tmp_path / "nodes.txt"
    assert run("solve", path, "-o", out, "--node-log", log) == 0
    doc = json.loads(out.read_text())
    assert doc["type"] == "solve"
    assert doc["ca"]["psi"] == pytest.approx(5 / 6, abs=1e-9)
    assert doc["baseline"]["kind"] == "baseline"
    assert log.read_text().startswith("node 1 ")
    users = tmp_path / "users.csv"
    assert run("report", out, "-o", users) == 0
    rows = read_csv(users)
    assert rows[0] == cli.REPORT_COLUMNS
    assert rows[1][0] == "0"
    assert float(rows[1][1]) == pytest.approx(60.0)
    assert float(rows[1][2]) == pytest.approx(50.0, abs=1e-5)
    assert float(rows[1][3]) == pytest.approx(50.0, abs=1e-5)
    assert float(rows[1][4]) == pytest.approx(10.0, abs=1e-5)


def test_report_rejects_other_documents(tmp_path, tiny_file):
    assert run("report", tiny_file) == 2
    assert run("report", tmp_path / "missing.json") == 2


def test_baseline_command(tiny_file, tmp_path):
    out = tmp_path / "b.json"
    assert run("baseline", tiny_file, "-o", out) == 0
    assert json.loads(out.read_text())["status"] == "baseline"


def test_validation_exit_code(tmp_path):
    s = make_scenario([[100]], [40])
    path = tmp_path / "s.json"
    save_scenario(s, path)
    doc = json.loads(path.read_text())
    doc["users"][0]["max_carriers"] = 2
    path.write_text(json.dumps(doc))
    assert run("solve", path) == 2
    assert run("solve", tmp_path / "missing.json") == 2


def test_infeasible_exit_code(tiny_file, monkeypatch):
    def boom(*a, **k):
        raise SolverFailure(INFEASIBLE)

    monkeypatch.setattr(cli, "allocate_ca", boom)
    assert run("solve", tiny_file) == 3


def test_time_limit_exit_code(tmp_path):
    path = tmp_path / "p8.json"
    run("gen", "--preset", "paper8", "--seed", 1, "-o", path)
    assert run("solve", path, "--time-limit", 1e-9, "--no-baseline", "-o", tmp_path / "r.json") == 4


def test_evolve_command(tmp_path):
    s = make_scenario([[200, 40], [60, 180]], [50, 50], caps=[2, 2])
    s = replace(s, demand_profiles=np.array([[150e6, 20e6], [20e6, 170e6]]))
    path = tmp_path / "e.json"
    save_scenario(s, path)
    out = tmp_path / "trace.json"
    assert run("evolve", path, "--q", 0, "-o", out) == 0
    doc = json.loads(out.read_text())
    assert doc["q"] == 0 and len(doc["epochs"]) == 2
    assert doc["epochs"][1]["result"]["swap_count"] == 0


def _evo_file(tmp_path):
    s = make_scenario([[200, 40, 120], [60, 180, 90]], [50, 50, 50], caps=[2, 2, 1])
    s = replace(s, demand_profiles=np.array([[150, 20, 60], [20, 170, 60]]) * 1e6)
    path = tmp_path / "evo.json"
    save_scenario(s, path)
    return path


def test_sweep_rows_ordered(tmp_path):
    path = _evo_file(tmp_path)
    out = tmp_path / "t.csv"
    assert run("sweep-q", path, "--q", "3,0,1", "-o", out) == 0
    rows = read_csv(out)
    assert rows[0] == cli.SWEEP_COLUMNS
    assert [r[0] for r in rows[1:]] == ["3", "0", "1"]


def test_sweep_parallel_matches_serial(tmp_path):
    path = _evo_file(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("sweep-q", path, "--q", "0,1,2", "-o", a) == 0
    assert run("sweep-q", path, "--q", "0,1,2", "--jobs", 2, "-o", b) == 0
    assert a.read_bytes() == b.read_bytes()
    psi = [float(r[1]) for r in read_csv(a)[1:]]
    assert psi == sorted(psi)


def test_sweep_timing_column(tmp_path):
    path = _evo_file(tmp_path)
    out = tmp_path / "t.csv"
    assert run("sweep-q", path, "--q", "0", "--timing", "-o", out) == 0
    assert read_csv(out)[0][-1] == "wall_s"


def test_sweep_bad_list(tmp_path):
    path = _evo_file(tmp_path)
    assert run("sweep-q", path, "--q", "a,b") == 2
    assert run("sweep-q", path, "--q", "") == 2
    assert run("sweep-q", path, "--q", "-1") == 2


def test_solve_byte_identical(tiny_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("solve", tiny_file, "-o", a) == 0
    assert run("solve", tiny_file, "-o", b) == 0
    assert a.read_bytes() == b.read_bytes()
