import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from tuplan import cli, petri, spec


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def env_file(tmp_path):
    p = tmp_path / "env.json"
    assert run("gen", "--width", 10, "--height", 10, "--regions", 6, "--robots", 6, "--density", 0.15, "--seed", 3, "-o", p) == 0
    return p


def test_gen_deterministic(tmp_path, env_file):
    other = tmp_path / "again.json"
    run("gen", "--width", 10, "--height", 10, "--regions", 6, "--robots", 6, "--density", 0.15, "--seed", 3, "-o", other)
    assert other.read_bytes() == env_file.read_bytes()
    assert json.loads(env_file.read_text())["seed"] == 3


def test_gen_without_seed(tmp_path):
    p = tmp_path / "e.json"
    assert run("gen", "--width", 4, "--height", 4, "--regions", 1, "--robots", 1, "-o", p) == 0
    assert isinstance(json.loads(p.read_text())["seed"], int)


def test_gen_usage_error(tmp_path):
    assert run("gen", "--width", 2, "--height", 2, "--regions", 3, "--robots", 3) == 1
    with pytest.raises(SystemExit) as exc:
        run("gen", "--width", 2)
    assert exc.value.code == 1


def test_plan_outputs(tmp_path, env_file):
    out = tmp_path / "out.json"
    plots = tmp_path / "figs"
    trajs = tmp_path / "paths.json"
    assert run("plan", "--env", env_file, "--seed", 1, "-o", out, "--plot", plots, "--paths", trajs) == 0
    doc = json.loads(out.read_text())
    assert doc["status"] == "solved" and doc["seed"] == 1
    svgs = sorted(plots.glob("stage_*.svg"))
    assert len(svgs) == len(doc["stages"])
    root = ET.parse(svgs[-1]).getroot()
    rects = [r for r in root.iter() if r.tag.endswith("rect")]
    assert len(rects) == 100
    assert json.loads(trajs.read_text())["seed"] == 1


def test_plan_collision_none_single_stage(tmp_path, env_file):
    out = tmp_path / "o.json"
    assert run("plan", "--env", env_file, "--collision", "none", "--seed", 0, "-o", out) == 0
    assert len(json.loads(out.read_text())["stages"]) == 1


def test_plan_bad_cnf(tmp_path, env_file):
    bad = tmp_path / "bad.cnf"
    bad.write_text("p cnf 6 1\n1 9 0\n")
    assert run("plan", "--env", env_file, "--cnf", bad) == 1
    assert run("plan", "--env", tmp_path / "missing.json") == 1


def test_plan_infeasible_exit(tmp_path, env_file):
    cnf = tmp_path / "u.cnf"
    cnf.write_text(spec.to_dimacs(spec.CnfFormula(6, (frozenset({1}), frozenset({-1})))))
    out = tmp_path / "o.json"
    assert run("plan", "--env", env_file, "--cnf", cnf, "--seed", 2, "-o", out) == 2
    doc = json.loads(out.read_text())
    assert doc["phase"] == "boolean-task" and doc["seed"] == 2


def test_check_tu(tmp_path):
    net = tmp_path / "n.json"
    petri.save(petri.four_cell_net(), net)
    rep = tmp_path / "r.json"
    assert run("check-tu", "--net", net, "--seed", 0, "-o", rep) == 0
    doc = json.loads(rep.read_text())
    assert doc["certified"] and doc["seed"] == 0
    assert [r["layout"] for r in doc["reports"]] == ["theorem1", "theorem2"]
    assert run("check-tu", "--net", net, "--stages", 3, "-o", rep) == 0
    assert json.loads(rep.read_text())["reports"][1]["matrix_shape"] == [24, 36]


def test_check_tu_corrupted(tmp_path):
    data = petri.to_dict(petri.four_cell_net())
    data["transitions"][0]["pre"] = [0, 2]
    net = tmp_path / "n.json"
    net.write_text(json.dumps(data))
    rep = tmp_path / "r.json"
    assert run("check-tu", "--net", net, "-o", rep) == 2
    doc = json.loads(rep.read_text())
    assert not doc["certified"] and "counterexample" in doc["reports"][0]


def test_check_tu_falls_back_to_sampling(tmp_path, env_file, caplog):
    rep = tmp_path / "r.json"
    assert run("check-tu", "--env", env_file, "--budget", 100, "--samples", 50, "--seed", 1, "-o", rep) == 0
    doc = json.loads(rep.read_text())
    assert {r["method"] for r in doc["reports"]} == {"partition-sampling"}
    assert "sampled" in caplog.text


def test_bench_csv(tmp_path):
    out = tmp_path / "b.csv"
    assert run("bench", "--robots", 4, "--scenarios", 2, "--repeats", 2, "--seed", 1, "--no-timings", "--with-oracle", "-o", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# tuplan-bench v1 seed=1"
    assert lines[1].split(",")[:3] == ["row", "scenario", "repeat"]
    assert len(lines) == 2 + 2 * 3
    rows = [l.split(",") for l in lines[2:]]
    header = lines[1].split(",")
    rel = header.index("relative_error")
    assert all(r[rel] == "0" for r in rows)
    assert sum(r[0] == "mean" for r in rows) == 2


def test_bench_boolean_and_usage(tmp_path):
    assert run("bench", "--robots", 4, "--repeats", 0) == 1
    assert run("bench", "--kind", "boolean", "--robots", 4) == 1
    out = tmp_path / "b.csv"
    assert run("bench", "--kind", "boolean", "--robots", 5, "--symbols", 4, "--scenarios", 1, "--repeats", 2, "--seed", 3, "-o", out) == 0
    assert len(out.read_text().splitlines()) == 5
