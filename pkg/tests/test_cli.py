import io
import json
import subprocess
import sys

from sepshift.cli import main
from sepshift.ldiagram import ldiagram_from_obj
from sepshift.suite import fixture_path


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def data(name):
    return str(fixture_path(name))


def test_validate_passes_on_a_fixture():
    code, text = run("validate", data("gfs6x4"))
    assert code == 0
    rep = json.loads(text)
    assert rep["status"] == "pass"
    assert set(rep) >= {"check", "status", "witness", "runtime_ms"}


def test_validate_reports_a_broken_file(tmp_path):
    obj = json.loads(open(data("gfs2x1")).read())
    obj["separation"]["v"][0].append("beta0")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    code, text = run("validate", str(bad))
    assert code == 1
    assert json.loads(text)["status"] == "fail"


def test_parse_error_exits_one_with_a_position(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "digraph", "vertices": ["x"],\n "edges": [{"id": "a", "src": "x", "tgt": "y"}]}')
    code, text = run("validate", str(bad))
    assert code == 1
    rep = json.loads(text)
    assert rep["status"] == "error"
    assert rep["witness"]["error"] == "UnknownReference"


def test_usage_errors_exit_two(capsys):
    assert run("no-such-command")[0] == 2
    assert run("matrices")[0] == 2
    assert run("suite", "--seed", "x")[0] == 2


def test_matrices_csv():
    code, text = run("matrices", data("gfs6x4"), "--which", "A")
    assert code == 0
    assert text.splitlines()[0] == "1,1,1,0"
    assert len(text.splitlines()) == 6


def test_higher_edge_pipeline_through_stdin():
    exe = [sys.executable, "-m", "sepshift.cli"]
    first = subprocess.run(exe + ["higher-edge", data("no000"), "--n", "1"], capture_output=True, text=True, check=True)
    second = subprocess.run(exe + ["gfs-from-digraph", "-"], input=first.stdout, capture_output=True, text=True, check=True)
    g = json.loads(second.stdout)
    assert g["kind"] == "gfs"
    assert len(g["top"]) == 7
    assert len(json.loads(first.stdout)["vertices"]) == 7


def test_resolution_and_recursion(tmp_path):
    code, text = run("resolve", data("gfs6x4"), "--depth", "3")
    assert code == 0
    path = tmp_path / "r.json"
    path.write_text(text)
    assert run("check-recursion", str(path), "--j", "0")[0] == 0
    obj = json.loads(text)
    lay = obj["layers"][2]
    red = next(e for e in lay["edges"] if e["color"] == "red")
    lay["edges"].append(dict(red, id=red["id"] + "x"))
    path.write_text(json.dumps(obj))
    code, text = run("check-recursion", str(path), "--j", "0")
    assert code == 1
    assert json.loads(text)["witness"]["mismatch"] is not None


def test_resolution_against_higher_edge():
    code, text = run("check-resolution-vs-higher-edge", data("no000"), "--n", "1")
    assert code == 0


def test_build_telescope_and_shift(tmp_path):
    code, text = run("build", "--system", "full2:2", "--depth", "4")
    assert code == 0
    path = tmp_path / "f2.json"
    path.write_text(text)
    code, t2 = run("telescope", str(path), "--seq", "0,1,2,3")
    assert code == 0
    assert ldiagram_from_obj(json.loads(t2)) == ldiagram_from_obj(json.loads(text)).truncate(3)
    v = json.loads(text)["layers"][3]["bottom"][0]
    code, s = run("shift", str(path), "--vertex", v)
    assert code == 0
    rep = json.loads(s)
    assert rep["shift"]["depth"] == 3


def test_shift_rejects_an_unknown_vertex():
    code, text = run("shift", "--system", "full2:2", "--depth", "4", "--vertex", "x")
    assert code == 1
    assert json.loads(text)["status"] == "error"


def test_telescope_rejects_a_bad_sequence():
    code, text = run("telescope", "--system", "full1:2", "--depth", "4", "--seq", "1,2")
    assert code == 1
    assert json.loads(text)["witness"]["error"] == "CRViolated"


def test_config_ball_json_and_dot(tmp_path):
    code, text = run("resolve", data("gfs2x1"), "--depth", "4")
    path = tmp_path / "x.json"
    path.write_text(text)
    v = json.loads(text)["layers"][3]["bottom"][0]
    code, out = run("config-ball", str(path), "--vertex", v, "--radius", "2", "--alias", "beta0=a,beta1=b,beta2=c")
    assert code == 0
    assert "1" in json.dumps(json.loads(out))
    code, dot = run("config-ball", str(path), "--vertex", v, "--radius", "2", "--dot")
    assert code == 0
    assert dot.lstrip().startswith("digraph")


def test_algebra_commands():
    code, text = run("alg", "mul", "--system", "full1:2", "--depth", "5", "-e", "1", "-e", "(star 1)")
    assert code == 0
    assert text.strip().startswith("(+ (p ")
    code, text = run("alg", "mul", "--system", "full1:2", "--depth", "5", "-e", "(+ 1")
    assert code == 1
    assert "line 1, column" in json.loads(text)["witness"]["message"]


def test_suite_budget_zero_skips_everything():
    code, text = run("--budget", "0", "suite", "--stable")
    assert code == 0
    rep = json.loads(text)
    assert {r["status"] for r in rep["witness"]} == {"skipped: budget"}
    assert rep["seed"] == 0


def test_suite_names_the_failing_check_on_a_tampered_fixture(tmp_path):
    obj = json.loads(open(data("gfs6x4")).read())
    red = next(e for e in obj["edges"] if e["color"] == "red")
    red["tgt"] = next(v for v in obj["top"] if v != red["tgt"])
    bad = tmp_path / "gfs6x4.json"
    bad.write_text(json.dumps(obj))
    code, text = run("suite", "--stable", "--only", "gfs6x4-matrices", "--data", f"gfs6x4={bad}")
    assert code == 1
    (res,) = json.loads(text)["witness"]
    assert res["check"] == "gfs6x4-matrices" and res["status"] == "fail"


def test_suite_output_is_byte_stable():
    a = run("suite", "--stable", "--seed", "3", "--only", "level-counts", "--only", "tameness")
    b = run("suite", "--stable", "--seed", "3", "--only", "level-counts", "--only", "tameness")
    assert a == b
    assert a[0] == 0
    assert json.loads(a[1])["seed"] == 3


def test_suite_text_format():
    code, text = run("suite", "--format", "text", "--only", "level-counts")
    assert code == 0
    assert text == "PASS  level-counts\n"
