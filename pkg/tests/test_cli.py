import json
from pathlib import Path

import pytest

from folia.cli import SessionConfig, UsageError, main

GOLDEN = Path(__file__).parent / "golden" / "paper_suite.json"


def run(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr().out
    return rc, json.loads(out) if out.strip() else None


def test_member_reports_failure_degree(capsys):
    rc, d = run(capsys, "member", "--module", "circles", "--field", "eul")
    assert rc == 0 and d["member"] is False and d["fail_degree"] == 1
    assert d["config"] == {"order": 12, "tol": 1e-9, "angle_window": 3}


def test_member_coefficients(capsys):
    rc, d = run(capsys, "member", "--module", "circles", "--field", "r2 rot", "--order", "6")
    assert rc == 0 and d["member"] is True


def test_bracket_infers_variables_jointly(capsys):
    rc, d = run(capsys, "bracket", "--field", "x dy", "--field", "y dx", "--order", "4")
    assert rc == 0
    assert d["bracket"] == {"dx": {"x": 1}, "dy": {"y": -1}}


def test_exp_and_log(capsys):
    rc, d = run(capsys, "exp", "--field", "0 dx + 0 dy", "--vars", "x,y", "--order", "4")
    assert rc == 0 and d["diffeo"] == {"x": {"x": 1}, "y": {"y": 1}}
    rc, d = run(capsys, "log", "--diffeo", "(x + x^3, y)", "--order", "5")
    assert rc == 0 and d["field"]["dx"]["x^3"] == 1


def test_torus_triple_and_holonomy(capsys):
    rc, d = run(capsys, "torus-triple", "--leaf", "ext")
    assert rc == 0 and d["kappa_tangent_order"] == 10 and d["inner_certificate"]["found"]
    rc, d = run(capsys, "holonomy", "--leaf", "ext", "--loop", "2")
    assert rc == 0 and d["diffeo"]["t"] == {"t": 1, "t^6": 1, "t^11": 3} and len(d["notes"]) == 1
    rc, d = run(capsys, "holonomy", "--leaf", "ext", "--turns", "2")
    assert rc == 0 and d["notes"] == []


def test_outer_holonomy_keeps_notes_outside_the_report(capsys):
    rc, d = run(capsys, "outer-holonomy", "--leaf", "ext")
    assert rc == 0 and len(d["loops"]) == 2 and len(d["notes"]) == 2


def test_lift_cocycle_escape(capsys):
    rc, d = run(capsys, "lift-cocycle", "--module", "circles", "--sigma", "0,1=exp(0.37 r2 eul)", "--order", "8")
    assert rc == 0 and d["success"] is False
    s = d["obstruction"]
    assert (s["kind"], s["level"], s["degree"], s["triple"]) == ("defect-escape", 2, 3, [0, 1, 4])
    assert s["residual_norm"] == pytest.approx(0.37)


def test_defs_file_is_loaded(tmp_path, capsys):
    defs = tmp_path / "m.folia"
    defs.write_text("vars u, v\nmodule hyp = [ u du - v dv ]\n")
    rc, d = run(capsys, "dims", "--module", "hyp", "--defs", str(defs), "--order", "3")
    assert rc == 0 and d["degree_dimensions"] == [0, 1, 2, 3]


@pytest.mark.parametrize(
    "argv,code",
    [
        (["bogus"], "usage"),
        (["member", "--module", "circles"], "usage"),
        (["dims", "--module", "circles", "--order", "1"], "usage"),
        (["dims", "--module", "circles", "--defs", "/nonexistent/x"], "usage"),
        (["exp", "--field", "x +"], "parse"),
        (["member", "--module", "nope", "--field", "eul"], "domain"),
        (["log", "--diffeo", "rotation07"], "domain"),
        (["inner-geq-k", "--module", "circles", "--k", "1", "--diffeo", "rotation07"], "domain"),
    ],
)
def test_errors_are_json_with_exit_code_two(capsys, argv, code):
    rc, d = run(capsys, *argv)
    assert rc == 2
    assert d["error"]["code"] == code and d["error"]["message"]


def test_parse_error_details_carry_position(capsys):
    rc, d = run(capsys, "exp", "--field", "x $ y")
    assert rc == 2 and d["error"]["details"] == {"line": 1, "column": 3}


def test_json_output_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    rc = main(["dims", "--module", "circles", "--order", "3", "--json", str(out)])
    assert rc == 0 and capsys.readouterr().out == ""
    assert json.loads(out.read_text())["degree_dimensions"] == [0, 1, 2, 3]


def test_paper_suite_check(tmp_path, capsys):
    out = tmp_path / "s.json"
    assert main(["paper-suite", "--check", str(GOLDEN), "--json", str(out)]) == 0
    assert out.read_text() == GOLDEN.read_text()
    bad = tmp_path / "bad.json"
    bad.write_text("{}\n")
    assert main(["paper-suite", "--check", str(bad), "--json", str(out)]) == 1
    assert json.loads(capsys.readouterr().out)["error"]["code"] == "golden-mismatch"


def test_session_config_validation():
    with pytest.raises(UsageError):
        SessionConfig(order=40)
    with pytest.raises(UsageError):
        SessionConfig(tol=-1.0)
    with pytest.raises(UsageError):
        SessionConfig(angle_window=-1)


SCHEMA = json.loads((Path(__file__).parents[1] / "docs" / "report.schema.json").read_text())
COMMANDS = [
    ["bracket", "--field", "rot", "--field", "eul"],
    ["exp", "--field", "r2 rot"],
    ["log", "--diffeo", "radial"],
    ["member", "--module", "circles", "--field", "eul"],
    ["member", "--module", "circles", "--field", "r2 rot"],
    ["sym", "--module", "circles", "--diffeo", "shear"],
    ["inner", "--module", "circles", "--diffeo", "rotation07"],
    ["inner", "--module", "circles", "--diffeo", "reflection"],
    ["inner-geq-k", "--module", "spirals", "--k", "2", "--diffeo", "exp(2 pi (rot + r2 eul))"],
    ["out-class", "--module", "circles", "--invariant", "r2", "--diffeo", "radial"],
    ["holonomy", "--leaf", "ext"],
    ["torus-triple", "--leaf", "ext"],
    ["outer-holonomy", "--leaf", "susp_radial", "--invariant", "r2"],
    ["redefine", "--leaf", "ext", "--lambda", "t^10 dt", "--lambda", "0 dt"],
    ["lift-cocycle", "--module", "circles", "--order", "5"],
    ["lift-cocycle", "--module", "circles", "--sigma", "0,1=exp(0.37 r2 eul)", "--order", "5"],
    ["dims", "--module", "allfields"],
    ["exp", "--field", "dx"],
    ["nonsense"],
]


@pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: " ".join(a[:3]))
def test_reports_follow_the_published_schema(capsys, argv):
    jsonschema = pytest.importorskip("jsonschema")
    _, d = run(capsys, *argv)
    jsonschema.validate(d, SCHEMA)


def test_golden_suite_follows_the_published_schema():
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.validate(json.loads(GOLDEN.read_text()), SCHEMA)
