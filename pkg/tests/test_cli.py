"""End-to-end checks of the command-line front end."""

import json
import math
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest

from ckreg.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def load_schema(name):
    path = resources.files("ckreg") / "schemas" / name
    return json.loads(path.read_text(encoding="utf-8"))


def strip_timing(doc):
    if isinstance(doc, dict):
        return {k: strip_timing(v) for k, v in doc.items() if k != "timing"}
    if isinstance(doc, list):
        return [strip_timing(v) for v in doc]
    return doc


@pytest.fixture(scope="module")
def s1_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "s1.csv"
    code = main(["simulate", "--setting", "s1", "--n", "300",
                 "--seed", "7", "--output", str(path)])
    assert code == 0
    return str(path)


@pytest.fixture(scope="module")
def s1_fit(tmp_path_factory, s1_csv):
    path = tmp_path_factory.mktemp("fits") / "fit.json"
    code = main(["fit", s1_csv, "--design-points", "grid:0.05:0.95:20",
                 "--output", str(path)])
    assert code == 0
    return str(path)


def test_simulate_writes_header_and_meta(s1_csv):
    lines = open(s1_csv, encoding="utf-8").read().splitlines()
    meta = json.loads(lines[0].lstrip("# "))
    assert meta["cli"]["setting"] == "s1" and meta["cli"]["n"] == 300
    assert lines[1] == "x1,x2,z1"
    assert len(lines) == 302
    values = [float(v) for v in lines[2].split(",")]
    assert len(values) == 3


def test_simulate_is_deterministic(tmp_path, s1_csv):
    again = tmp_path / "again.csv"
    assert main(["simulate", "--setting", "s1", "--n", "300",
                 "--seed", "7", "--output", str(again)]) == 0
    ours = again.read_text(encoding="utf-8")
    theirs = open(s1_csv, encoding="utf-8").read()
    # identical apart from the echoed output path in the meta line
    assert ours.splitlines()[1:] == theirs.splitlines()[1:]


def test_fit_document_validates_and_has_12_coefficients(s1_fit):
    doc = json.load(open(s1_fit, encoding="utf-8"))
    jsonschema.validate(doc, load_schema("fit_result.schema.json"))
    assert len(doc["beta"]) == 12
    assert doc["lambda"] >= 0
    assert doc["cli"]["command"] == "fit"
    assert doc["config"]["lambda_requested"] == "cv"


def test_fit_rerun_is_byte_identical_apart_from_timing(tmp_path, s1_csv, s1_fit):
    again = tmp_path / "fit.json"
    assert main(["fit", s1_csv, "--design-points", "grid:0.05:0.95:20",
                 "--output", str(again)]) == 0
    a = json.load(open(s1_fit, encoding="utf-8"))
    b = json.loads(again.read_text(encoding="utf-8"))
    a["cli"].pop("output"), b["cli"].pop("output")
    assert json.dumps(strip_timing(a), sort_keys=True) == \
        json.dumps(strip_timing(b), sort_keys=True)


def test_fit_predictions_file(tmp_path, s1_csv):
    pred = tmp_path / "pred.csv"
    code = main(["fit", s1_csv, "--design-points", "grid:0.1:0.9:9",
                 "--output", str(tmp_path / "f.json"),
                 "--predictions", str(pred)])
    assert code == 0
    lines = pred.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "z1,tau_hat"
    assert len(lines) == 10
    taus = [float(line.split(",")[1]) for line in lines[1:]]
    assert all(-1.0 <= t <= 1.0 for t in taus)


def test_predict_at_new_points(capsys, s1_fit):
    code, out, _ = run(capsys, "predict", "--fit", s1_fit,
                       "--points", "grid:0.2:0.8:4")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "z1,tau_hat"
    assert len(lines) == 5
    zs = [float(line.split(",")[0]) for line in lines[1:]]
    assert zs == pytest.approx([0.2, 0.4, 0.6, 0.8])


def test_predict_matches_library(capsys, s1_fit):
    from ckreg.cli import _fit_from_doc
    from ckreg.pipeline import predict

    code, out, _ = run(capsys, "predict", "--fit", s1_fit,
                       "--points", "grid:0.3:0.7:3")
    assert code == 0
    got = [float(line.split(",")[1]) for line in out.splitlines()[1:]]
    fit = _fit_from_doc(json.load(open(s1_fit, encoding="utf-8")))
    want = predict(fit, np.array([[0.3], [0.5], [0.7]]))
    assert got == pytest.approx(list(want), abs=1e-12)


def test_test_sa_document(capsys, s1_csv):
    code, out, _ = run(capsys, "test-sa", s1_csv,
                       "--design-points", "grid:0.05:0.95:20")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, load_schema("wald_result.schema.json"))
    assert 0.0 <= doc["p_value"] <= 1.0
    assert doc["variant"] == "as_printed"
    jsonschema.validate(doc["fit"], load_schema("fit_result.schema.json"))


def test_cv_document(capsys, s1_csv):
    code, out, _ = run(capsys, "cv", s1_csv,
                       "--design-points", "grid:0.05:0.95:20")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, load_schema("cv_result.schema.json"))
    assert doc["lambda_cv"] > 0
    assert len(doc["cv_errors"]) == len(doc["lambda_grid"])
    assert doc["config"]["kernel"]["bandwidth"] > 0


def test_missing_z_column_exits_3(capsys, tmp_path):
    bad = tmp_path / "noz.csv"
    bad.write_text("x1,x2,w\n1,2,3\n4,5,6\n", encoding="utf-8")
    code, _, err = run(capsys, "fit", str(bad))
    assert code == 3
    msg = json.loads(err)
    assert msg["error"] == "data"


def test_missing_file_exits_3(capsys, tmp_path):
    code, _, err = run(capsys, "fit", str(tmp_path / "absent.csv"))
    assert code == 3
    assert json.loads(err)["error"] == "data"


def test_missing_header_exits_3(capsys, tmp_path):
    bad = tmp_path / "raw.csv"
    bad.write_text("1,2,3\n4,5,6\n", encoding="utf-8")
    code, _, err = run(capsys, "fit", str(bad))
    assert code == 3
    assert "header" in json.loads(err)["message"]


def test_usage_errors_exit_2(capsys, s1_csv):
    code, _, err = run(capsys, "fit", s1_csv, "--kernel", "box")
    assert code == 2
    assert json.loads(err)["error"] == "usage"
    code, _, err = run(capsys, "fit", s1_csv, "--design-points", "grid:bad")
    assert code == 2
    code, _, err = run(capsys, "fit", s1_csv, "--lambda", "-1")
    assert code == 2


def test_numerical_failure_exits_4(capsys, s1_csv):
    # compact kernel with an absurdly small bandwidth: no design point
    # keeps enough neighbors, so estimation is impossible
    code, _, err = run(capsys, "fit", s1_csv, "--kernel", "epanechnikov",
                       "--bandwidth", "1e-9")
    assert code == 4
    assert json.loads(err)["error"] == "numerical"


def test_column_flags(capsys, tmp_path, s1_csv):
    renamed = tmp_path / "renamed.csv"
    rows = open(s1_csv, encoding="utf-8").read().splitlines()
    renamed.write_text(
        "\n".join(["a,b,c"] + rows[2:]) + "\n", encoding="utf-8"
    )
    code, out, _ = run(capsys, "fit", str(renamed), "--x1", "a", "--x2", "b",
                       "--z", "c", "--design-points", "grid:0.05:0.95:15")
    assert code == 0
    assert len(json.loads(out)["beta"]) == 12


def test_input_box_rescaling(capsys, tmp_path, s1_csv):
    scaled = tmp_path / "scaled.csv"
    lines = open(s1_csv, encoding="utf-8").read().splitlines()
    out_rows = ["x1,x2,z1"]
    for line in lines[2:]:
        x1, x2, z1 = line.split(",")
        out_rows.append(f"{x1},{x2},{5.0 * float(z1)}")
    scaled.write_text("\n".join(out_rows) + "\n", encoding="utf-8")
    code, out, _ = run(capsys, "fit", str(scaled), "--input-box", "auto")
    assert code == 0
    doc = json.loads(out)
    pts = np.array(doc["design_points"])
    assert pts.min() >= 0.0 and pts.max() <= 5.0
    assert doc["dictionary"]["input_box"] is not None


def test_points_csv_for_predict(capsys, tmp_path, s1_fit):
    pts = tmp_path / "pts.csv"
    pts.write_text("z1\n0.25\n0.5\n0.75\n", encoding="utf-8")
    code, out, _ = run(capsys, "predict", "--fit", s1_fit,
                       "--points", str(pts))
    assert code == 0
    assert len(out.splitlines()) == 4


def test_bench_power_level_one_rejects_everything(capsys):
    code, out, _ = run(capsys, "bench", "--mode", "power", "--settings", "s5",
                       "--n", "150", "--replications", "2", "--level", "1")
    assert code == 0
    lines = out.splitlines()
    meta = json.loads(lines[0].lstrip("# "))
    assert meta["cli"]["mode"] == "power"
    header = json.loads(lines[1].lstrip("# "))
    assert "h_multiplier" in header["config"]
    rows = [line for line in lines if line.startswith("s5,")]
    assert rows and float(rows[0].split(",")[4]) == 100.0


def test_bench_table_oracle_is_zero(capsys):
    code, out, _ = run(capsys, "bench", "--settings", "s5", "--estimators",
                       "oracle", "--n", "200", "--replications", "2",
                       "--format", "long")
    assert code == 0
    for line in out.splitlines():
        parts = line.split(",")
        if parts[0] == "s5" and parts[3] in ("IBias", "IVar", "ISd", "IMSE"):
            assert float(parts[4]) == 0.0


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "ckreg.cli", "simulate", "--setting", "s5",
         "--n", "5", "--seed", "1"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1] == "x1,x2,z1"


def test_non_finite_first_stage_serializes_as_null(capsys, tmp_path, s1_csv):
    # a bandwidth small enough that some (not all) design points fail
    code, out, _ = run(capsys, "fit", s1_csv, "--kernel", "epanechnikov",
                       "--bandwidth", "0.005",
                       "--design-points", "grid:0.02:0.98:49",
                       "--lambda", "0.05")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, load_schema("fit_result.schema.json"))
    assert not all(doc["first_stage"]["valid"])
    dropped = [v for v, ok in zip(doc["first_stage"]["tau"],
                                  doc["first_stage"]["valid"]) if not ok]
    assert all(v is None or isinstance(v, float) for v in dropped)
    assert math.isfinite(sum(filter(None, doc["beta"])))
