import json
import math

import pytest

from locwp.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _ini(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SINGLE = {"vertices": [0], "edges": [], "outcomes": [{"p": 0.5, "values": [-1]}, {"p": 0.5, "values": [1]}]}
PAIR = {"vertices": [0, 1], "edges": [],
        "outcomes": [{"p": 0.25, "values": [a, b]} for a in (-1, 1) for b in (-1, 1)]}


def test_selftest_passes(capsys):
    code, out, _ = _run(capsys, "selftest")
    assert code == 0 and json.loads(out)["passed"]


def test_selftest_corrupted_golden(tmp_path, capsys):
    bad = tmp_path / "golden.json"
    bad.write_text('{"checks": {"normal_moment_6": {"value": 14, "tol": 0}}}')
    code, out, _ = _run(capsys, "selftest", "--golden", str(bad))
    rows = {r["check"]: r for r in json.loads(out)["checks"]}
    assert code == 3
    assert not rows["normal_moment_6"]["passed"] and "off by" in rows["normal_moment_6"]["note"]
    assert rows["compositions_count_5"]["note"] == "golden entry missing or malformed"
    bad.write_text("{not json")
    code, out, _ = _run(capsys, "selftest", "--golden", str(bad))
    assert code == 3 and "golden file unreadable" in out


def test_bound_single_vertex(tmp_path, capsys):
    (tmp_path / "m.json").write_text(json.dumps(SINGLE))
    cfg = _ini(tmp_path, "[bound]\nmodel = m.json\np = 1\n")
    code, out, _ = _run(capsys, "bound", "--config", cfg)
    rep = {r["tag"]: r for r in json.loads(out)["reports"]}
    assert code == 0 and rep["localwp"]["value"] == 2.0


def test_bound_two_vertices_p2(tmp_path, capsys):
    (tmp_path / "m.json").write_text(json.dumps(PAIR))
    cfg = _ini(tmp_path, "[bound]\nmodel = m.json\np = 2\n")
    code, out, _ = _run(capsys, "bound", "--config", cfg)
    rep = {r["tag"]: r for r in json.loads(out)["reports"]}
    assert rep["localwp"]["value"] == pytest.approx(math.sqrt(2) + math.sqrt(1.5), abs=1e-14)


def test_bound_missing_model(tmp_path, capsys):
    cfg = _ini(tmp_path, "[bound]\nmodel = nowhere.json\np = 1\n")
    code, _, err = _run(capsys, "bound", "--config", cfg)
    assert code == 2 and "'model'" in err


def test_bad_numbers_name_the_key(tmp_path, capsys):
    cfg = _ini(tmp_path, "[match]\np = two\n")
    code, _, err = _run(capsys, "match", "--config", cfg)
    assert code == 2 and "'p'" in err
    code, _, err = _run(capsys, "match", "--config", cfg, "--seed", "-1")
    assert code == 2


def test_simulate_malformed_sizes(tmp_path, capsys):
    cfg = _ini(tmp_path, "[simulate]\nkind = mdep\nsizes = 64, 32, x\n")
    code, _, err = _run(capsys, "simulate", "--config", cfg)
    assert code == 2 and "'sizes'" in err
    cfg = _ini(tmp_path, "[simulate]\nkind = mdep\nsizes = 64, 32, 16\n")
    code, _, err = _run(capsys, "simulate", "--config", cfg)
    assert code == 2 and "'sizes'" in err


def test_match_outputs(tmp_path, capsys):
    code, out, _ = _run(capsys, "match", "--config", _ini(tmp_path, "[match]\np = 2\nu = 0.01\n"))
    assert code == 0 and json.loads(out)["q"] == 2500
    code, out, _ = _run(capsys, "match", "--config", _ini(tmp_path, "[match]\np = 3\nu = 0, 0\n"))
    assert code == 0 and json.loads(out)["gaussian_branch"]
    code, _, err = _run(capsys, "match", "--config", _ini(tmp_path, "[match]\np = 2\nu = 3\n"))
    assert code == 3 and "too large" in err


def test_tail_grid(tmp_path, capsys):
    cfg = _ini(tmp_path, "[tail]\np = 1\nbeta = 1\nwp = 0\nt = 0.5:3:6\n")
    code, out, _ = _run(capsys, "tail", "--config", cfg, "--format", "csv")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0].startswith("t,upper,lower,condition_ok")
    assert all(row.split(",")[1] == "0" and row.split(",")[2] == "0" for row in lines[1:])
    assert lines[1].split(",")[3] == "False" and lines[-1].split(",")[3] == "True"


def test_stein_command(tmp_path, capsys):
    cfg = _ini(tmp_path, "[stein]\nh = t2\nw = -1, 0.5\ndistribution = rademacher\n")
    code, out, _ = _run(capsys, "stein", "--config", cfg)
    rec = json.loads(out)
    assert code == 0 and [r["f"] for r in rec["rows"]] == pytest.approx([1.0, -0.5], abs=1e-10)
    assert abs(rec["residual"]) <= 1e-6
    code, _, err = _run(capsys, "stein", "--config", _ini(tmp_path, "[stein]\nh = zeta\n"))
    assert code == 2 and "'h'" in err


def test_output_dir_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("OUTPUT_DIR", str(tmp_path / "out"))
    cfg = _ini(tmp_path, "[simulate]\nkind = mdep\nsizes = 8, 16, 32\nreps = 2000\nbatches = 4\n")
    code, out, _ = _run(capsys, "simulate", "--config", cfg, "--format", "csv")
    assert code == 0
    assert (tmp_path / "out" / "simulate.csv").read_text() == out
    assert len((tmp_path / "out" / "simulate_p1.dat").read_text().splitlines()) == 3


def test_bundled_config_names(capsys):
    code, out, _ = _run(capsys, "bound", "--config", "mdep_m1_p1")
    assert code == 0 and json.loads(out)["exact_backend"]
    code, _, err = _run(capsys, "bound", "--config", "no_such_config")
    assert code == 2
