import csv
import hashlib
import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from xinform.cli import main
from xinform.models import AxisTree, ConstantModel, Leaf, Split
from xinform.rademacher import CSV_COLUMNS

from conftest import unit

SCHEMAS = json.loads((Path(__file__).resolve().parents[1] / "docs" / "schemas.json").read_text())


def check_schema(doc, name):
    schema = dict(SCHEMAS)
    schema["$ref"] = f"#/$defs/{name}"
    jsonschema.Draft202012Validator(schema).validate(doc)


def _write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


@pytest.fixture
def files(tmp_path):
    tree = AxisTree(2, Split(0, 0.5, Leaf(-1.0), Split(1, 0.5, Leaf(0.5), Leaf(1.0))))
    return {
        "model": _write(tmp_path, "model.json", tree.to_json()),
        "dist": _write(tmp_path, "dist.json", unit(2).to_json()),
        "big": _write(tmp_path, "big.json", ConstantModel(13, 0.2).to_json()),
        "big_dist": _write(tmp_path, "big_dist.json", unit(13).to_json()),
        "grid": _write(tmp_path, "grid.json", {"kind": "grid", "k": 2}),
        "predict": _write(tmp_path, "predict.json", [{"kind": "value-at", "point": [0.7, 0.7], "value": 1.0}]),
        "explain": _write(tmp_path, "explain.json", [{"kind": "value-at", "point": [0.7, 0.7], "value": 1.0},
                                                     {"kind": "sign-at", "point": [0.2, 0.2], "sign": -1}]),
    }


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("method", ["gradient", "topgrad", "shap", "anchor", "cf-strong", "cf-axis"])
def test_explain_methods(capsys, files, method):
    code, out, _ = run(capsys, "explain", "--model", files["model"], "--dist", files["dist"],
                       "--point", "0.7,0.7", "--method", method)
    assert code == 0
    doc = json.loads(out)
    check_schema(doc, "explain-output")
    assert doc["label"] == 1


def test_explain_shap_with_oracle(capsys, files):
    code, out, _ = run(capsys, "explain", "--model", files["model"], "--dist", files["dist"],
                       "--point", "0.7,0.2", "--method", "shap", "--oracle")
    doc = json.loads(out)
    assert code == 0 and doc["explanation"]["oracle_max_discrepancy"] <= 1e-9


def test_explain_weak_counterfactual_needs_seed(capsys, files):
    args = ["explain", "--model", files["model"], "--dist", files["dist"], "--point", "0.7,0.7", "--method", "cf-weak"]
    assert run(capsys, *args)[0] == 2
    code, out, _ = run(capsys, *args, "--seed", "3")
    assert code == 0 and json.loads(out)["explanation"]["cf_kind"] == "weak"


def test_explain_dimension_budget(capsys, files):
    code, _, err = run(capsys, "explain", "--model", files["big"], "--dist", files["big_dist"],
                       "--point", ",".join(["0.5"] * 13), "--method", "shap")
    assert code == 1
    doc = json.loads(err)
    check_schema(doc, "error")
    assert doc["error"] == "dimension-too-large"


def test_usage_errors_exit_two(capsys, files):
    assert run(capsys, "frobnicate")[0] == 2
    code, _, err = run(capsys, "gap", "--class", files["grid"], "--predict", files["predict"],
                       "--explain", files["explain"], "--dist", files["dist"], "-n", "3")
    assert code == 2 and json.loads(err)["error"] == "usage"
    assert run(capsys, "explain", "--model", files["model"], "--dist", files["dist"], "--point", "0.1",
               "--method", "shap")[0] in (1, 2)


def test_missing_file_is_a_domain_error(capsys, files):
    code, _, err = run(capsys, "explain", "--model", "/nonexistent.json", "--dist", files["dist"],
                       "--point", "0.1,0.1", "--method", "shap")
    assert code == 1 and json.loads(err)["error"] == "io-error"


def test_rademacher_command(capsys, files, tmp_path):
    out = tmp_path / "est.json"
    code, _, _ = run(capsys, "rademacher", "--class", files["grid"], "--constraints", files["predict"],
                     "--dist", files["dist"], "-n", "3", "--trials", "20", "--seed", "1", "--out", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    check_schema(doc, "rademacher-estimate")
    manifest = json.loads((tmp_path / "est.json.manifest.json").read_text())
    check_schema(manifest, "manifest")
    assert manifest["outputs"][str(out)] == hashlib.sha256(out.read_bytes()).hexdigest()


def test_gap_appends_csv_rows(capsys, files, tmp_path):
    table = tmp_path / "rows.csv"
    args = ["gap", "--class", files["grid"], "--predict", files["predict"], "--explain", files["explain"],
            "--dist", files["dist"], "-n", "3", "--trials", "20", "--seed", "2", "--csv", str(table)]
    code, out, _ = run(capsys, *args)
    assert code == 0
    check_schema(json.loads(out), "gap-report")
    assert run(capsys, *args)[0] == 0
    rows = list(csv.DictReader(table.open()))
    assert len(rows) == 2 and tuple(rows[0]) == CSV_COLUMNS
    assert rows[0] == rows[1]
    assert rows[0]["runtime_ms"] == ""


def test_scenario_run_appends_one_row(capsys, tmp_path):
    table = tmp_path / "out.csv"
    code, out, _ = run(capsys, "scenario", "run", "shap-grid", "--csv", str(table))
    assert code == 0
    doc = json.loads(out)
    check_schema(doc, "scenario-outcome")
    assert doc["conforms"] and doc["headline"]["verdict"] == "informative"
    assert len(list(csv.DictReader(table.open()))) == 1
    manifest = json.loads((tmp_path / "out.csv.manifest.json").read_text())
    assert manifest["seed"] == 7


def test_scenario_list_and_plot(capsys):
    code, out, _ = run(capsys, "scenario", "list")
    assert code == 0
    doc = json.loads(out)
    check_schema(doc, "scenario-list")
    assert len(doc) == 22
    code, out, _ = run(capsys, "scenario", "plot-data", "grad-linear", "--ns", "2,3", "--set", "trials=10")
    assert code == 0 and out.startswith("n\tgap_mean")


def test_scenario_argument_errors(capsys):
    assert run(capsys, "scenario", "run")[0] == 2
    assert run(capsys, "scenario", "run", "grad-linear", "--all")[0] == 2
    assert run(capsys, "scenario", "run", "grad-linear", "--set", "n")[0] == 2
    code, _, err = run(capsys, "scenario", "run", "grad-linear", "--set", "n=99")
    assert code == 1 and json.loads(err)["error"] == "budget"
    code, _, err = run(capsys, "scenario", "run", "no-such-thing")
    assert code == 1 and json.loads(err)["error"] == "not-found"


def test_manifest_reproduces_its_outputs(capsys, tmp_path):
    out = tmp_path / "lin.json"
    assert run(capsys, "scenario", "run", "grad-linear", "--set", "trials=15", "--seed", "3",
               "--out", str(out))[0] == 0
    manifest = json.loads((tmp_path / "lin.json.manifest.json").read_text())
    first = dict(manifest["outputs"])
    shutil.move(str(out), str(tmp_path / "old.json"))
    assert run(capsys, *manifest["command"])[0] == 0
    again = json.loads((tmp_path / "lin.json.manifest.json").read_text())
    assert again["outputs"] == first
    assert manifest["config"]["params"]["grad-linear"]["seed"] == 3


def test_oracle_command(capsys):
    code, out, _ = run(capsys, "oracle", "shap-permutation", "--set", "count=5")
    assert code == 0
    doc = json.loads(out)
    check_schema(doc, "oracle-report")
    assert doc["passed"]
    assert run(capsys, "oracle", "cf-scan", "--set", "step=1e-4")[0] == 1


def test_models_validate(capsys, files, tmp_path):
    code, out, _ = run(capsys, "models", "validate", files["model"])
    assert code == 0
    doc = json.loads(out)
    check_schema(doc, "model-validation")
    assert doc["valid"]
    bad = _write(tmp_path, "bad.json", {"kind": "tree", "d": 1, "root": {"value": 3}})
    code, out, err = run(capsys, "models", "validate", bad)
    assert code == 1 and not json.loads(out)["valid"]
    assert json.loads(err)["error"] == "invalid-model"


def test_report_summarises_csv(capsys, files, tmp_path):
    table = tmp_path / "rows.csv"
    run(capsys, "gap", "--class", files["grid"], "--predict", files["predict"], "--explain", files["explain"],
        "--dist", files["dist"], "-n", "3", "--trials", "10", "--seed", "2", "--csv", str(table))
    with table.open("a") as fh:
        fh.write("# summary comment\n")
    code, out, _ = run(capsys, "report", str(table))
    assert code == 0
    doc = json.loads(out)
    check_schema(doc, "results-summary")
    assert doc["rows"] == 1
    junk = tmp_path / "junk.csv"
    junk.write_text("a,b\n1,2\n")
    junk = str(junk)
    assert run(capsys, "report", junk)[0] == 1


def test_console_entry_point(tmp_path):
    exe = shutil.which("xinform")
    cmd = [exe] if exe else [sys.executable, "-m", "xinform.cli"]
    done = subprocess.run(cmd + ["scenario", "list"], capture_output=True, text=True, env={**os.environ})
    assert done.returncode == 0 and len(json.loads(done.stdout)) == 22
    done = subprocess.run(cmd + ["bogus"], capture_output=True, text=True)
    assert done.returncode == 2
