import csv
import json
import math
import subprocess
import sys

import jsonschema
import pytest

from hadamard_flow import export
from hadamard_flow.cli import main


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr().out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def validate(path, name):
    doc = json.loads(path.read_text())
    jsonschema.validate(doc, export.schema(name))
    return doc


def test_flow_quadratic_example(tmp_path, capsys):
    code, _ = run(["flow", "--instance", "euclid.quadratic", "--x0", "1", "--T", "1", "--tol", "1e-4",
                   "--out", str(tmp_path)], capsys)
    assert code == 0
    rows = read_csv(tmp_path / "flow-euclid.quadratic.csv")
    v0, vT = float(rows[0]["value"]), float(rows[-1]["value"])
    # Value of 1/2 x^2 along x_t = e^-t: final value is e^-2 times the initial one.
    assert abs(math.sqrt(vT / v0) - math.exp(-1)) <= 2e-4
    doc = validate(tmp_path / "flow-euclid.quadratic.json", "flow")
    assert doc["final_point"][0] == pytest.approx(math.exp(-1), abs=2e-4)
    assert doc["trajectory"]["cauchy_gaps"][-1] < 1e-4


def test_flow_toric_calabi_column_decreases(tmp_path, capsys):
    code, _ = run(["flow", "--instance", "toric.N256.a2.0", "--T", "5", "--out", str(tmp_path)], capsys)
    assert code == 0
    calabi = [float(r["calabi"]) for r in read_csv(tmp_path / "flow-toric.N256.a2.0.csv")]
    assert all(b <= a + 1e-12 for a, b in zip(calabi, calabi[1:]))
    assert calabi[-1] < calabi[0]
    snap = read_csv(tmp_path / "flow-toric.N256.a2.0-snapshot.csv")
    assert list(snap[0]) == ["x", "u", "phi", "S", "w"] and len(snap) == 257
    validate(tmp_path / "flow-toric.N256.a2.0.json", "flow")


def test_destabilize_linear(tmp_path, capsys):
    code, out = run(["destabilize", "--instance", "euclid.linear.3.4", "--out", str(tmp_path)], capsys)
    assert code == 0 and "Escaping" in out
    doc = validate(tmp_path / "destabilize-euclid.linear.3.4.json", "report")
    rep = doc["report"]
    assert rep["B"] == pytest.approx(5.0, abs=1e-6) and abs(rep["gap"]) <= 1e-3
    summary = read_csv(tmp_path / "destabilize-euclid.linear.3.4-summary.csv")
    assert summary[0]["case"] == "Escaping" and summary[0]["unstable"] == "true"
    for suffix in ("-trajectory.csv", "-ray.csv", "-plot.py"):
        assert (tmp_path / f"destabilize-euclid.linear.3.4{suffix}").exists()
    compile((tmp_path / "destabilize-euclid.linear.3.4-plot.py").read_text(), "plot", "exec")


def test_destabilize_toric_unstable(tmp_path, capsys):
    code, _ = run(["destabilize", "--instance", "toric.N256.a3.0", "--out", str(tmp_path)], capsys)
    assert code == 0
    rep = validate(tmp_path / "destabilize-toric.N256.a3.0.json", "report")["report"]
    assert rep["B"] >= 1 - 1e-2 and abs(rep["gap"]) <= 2e-2
    prof = read_csv(tmp_path / "destabilize-toric.N256.a3.0-ray.csv")
    assert list(prof[0]) == ["x", "f"] and len(prof) == 257


def test_destabilize_tripod_uniqueness(tmp_path, capsys):
    code, _ = run(["destabilize", "--instance", "tripod.-1.2.2", "--starts", "3", "--out", str(tmp_path)], capsys)
    assert code == 0
    doc = validate(tmp_path / "destabilize-tripod.-1.2.2.json", "report")
    assert doc["uniqueness"]["value"] <= 1e-3 and doc["uniqueness"]["starts"] == 3


def test_destabilize_bounded_has_trivial_ray(tmp_path, capsys):
    code, _ = run(["destabilize", "--instance", "euclid.quadratic", "--out", str(tmp_path)], capsys)
    assert code == 0
    doc = validate(tmp_path / "destabilize-euclid.quadratic.json", "report")
    assert doc["report"]["ray"] == "Trivial" and doc["report"]["case"] == "Bounded"
    assert not (tmp_path / "destabilize-euclid.quadratic-ray.csv").exists()


@pytest.mark.parametrize("suite, iid", [("cat0", "tripod.-1.2.2"), ("evi", "euclid.quadratic"),
                                        ("moment-weight", "toric.N256.a2.0")])
def test_check_examples(suite, iid, tmp_path, capsys):
    code, out = run(["check", "--suite", suite, "--instance", iid, "--out", str(tmp_path)], capsys)
    assert code == 0 and "all suites pass" in out
    doc = validate(tmp_path / "check.json", "check")
    assert doc["passed"] and doc["results"][0]["suite"] == suite


def test_check_moment_weight_gap_reported(tmp_path, capsys):
    run(["check", "--suite", "moment-weight", "--instance", "toric.N256.a2.0", "--out", str(tmp_path)], capsys)
    metrics = json.loads((tmp_path / "check.json").read_text())["results"][0]["metrics"]
    assert metrics["gap"] >= -1e-6


def test_list(capsys):
    code, out = run(["list"], capsys)
    assert code == 0 and "euclid.linear.3.4" in out.split() and "toric.N256.a3.0" in out.split()


@pytest.mark.parametrize("argv, kind", [
    (["flow", "--instance", "euclid.nope"], "unknown_instance"),
    (["destabilize", "--instance", "toric.N8.a2.0"], "unknown_instance"),
    (["flow", "--instance", "euclid.quadratic", "--T", "-1"], "config"),
    (["flow", "--instance", "euclid.quadratic", "--bogus"], "config"),
    (["check", "--suite", "nope", "--instance", "euclid.abs"], "config"),
    (["flow", "--instance", "euclid.quadratic", "--x0", "[1, 2]"], "config"),
    (["destabilize", "--instance", "euclid.linear.3.4", "--starts", "9"], "config"),
    ([], "config"),
])
def test_config_errors_exit_two(argv, kind, tmp_path, capsys):
    code, out = run(argv + ["--out", str(tmp_path)] if argv else argv, capsys)
    assert code == 2
    doc = json.loads(out)
    assert doc["error"] == kind
    jsonschema.validate(doc, export.schema("error"))


def test_error_json_written_to_out(tmp_path, capsys):
    run(["flow", "--instance", "euclid.nope", "--out", str(tmp_path)], capsys)
    validate(tmp_path / "error.json", "error")


def test_numerical_failure_exits_three(tmp_path, capsys):
    code, out = run(["flow", "--instance", "euclid.quadratic", "--tol", "1e-12", "--m-cap", "64",
                     "--out", str(tmp_path)], capsys)
    assert code == 3
    doc = json.loads(out)
    assert doc["error"] == "numerical" and doc["details"]["residual"] > 1e-12
    validate(tmp_path / "error.json", "error")


def test_config_file_with_cli_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# quadratic decay\ninstance = euclid.quadratic\nT = 2\ntol = 1e-3\nx0 = 1\n")
    code, _ = run(["flow", "--config", str(cfg), "--T", "1", "--out", str(tmp_path)], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "flow-euclid.quadratic.json").read_text())
    assert doc["config"]["T"] == 1.0 and doc["config"]["tol"] == 1e-3
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    code, out = run(["flow", "--config", str(bad), "--out", str(tmp_path)], capsys)
    assert code == 2 and json.loads(out)["error"] == "config"


def _outputs(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def _run_all(out, jobs, capsys):
    for argv in (["flow", "--instance", "toric.N64.a2.0", "--T", "1"],
                 ["destabilize", "--instance", "euclid.linear.3.4", "--starts", "3"],
                 ["destabilize", "--instance", "toric.N64.a3.0", "--starts", "2"],
                 ["check", "--suite", "cat0", "--instance", "all", "--seed", "7"]):
        code, _ = run(argv + ["--out", str(out), "--jobs", str(jobs)], capsys)
        assert code == 0
    return _outputs(out)


def test_outputs_are_byte_identical(tmp_path, capsys):
    a = _run_all(tmp_path / "a", 1, capsys)
    b = _run_all(tmp_path / "b", 1, capsys)
    c = _run_all(tmp_path / "c", 2, capsys)
    assert a == b == c and len(a) >= 10


def test_seed_changes_randomised_suites(tmp_path, capsys):
    run(["check", "--suite", "cat0", "--instance", "euclid.abs", "--seed", "1", "--out", str(tmp_path / "s1")], capsys)
    run(["check", "--suite", "cat0", "--instance", "euclid.abs", "--seed", "2", "--out", str(tmp_path / "s2")], capsys)
    assert (tmp_path / "s1" / "check.json").read_bytes() != (tmp_path / "s2" / "check.json").read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hadamard_flow", "flow", "--instance", "euclid.nope",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2 and json.loads(proc.stdout)["error"] == "unknown_instance"


def test_schemas_are_valid_documents():
    for name in export.SCHEMA_NAMES:
        jsonschema.Draft202012Validator.check_schema(export.schema(name))


def test_json_encodes_non_finite_values():
    text = export.dumps({"a": math.inf, "b": -math.inf, "c": math.nan})
    assert json.loads(text) == {"a": "inf", "b": "-inf", "c": "nan"}
