import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from blocktau.cli import ParseError, main, read_csv_matrix
from blocktau.estimator import inverse_sine_transform

DATA = Path(__file__).parent / "data"


def write_csv(path, X, header=None):
    lines = [",".join(header)] if header else []
    lines += [",".join(repr(float(v)) for v in row) for row in X]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_golden_report_is_reproduced(monkeypatch, capsys):
    monkeypatch.chdir(DATA)
    code, out, _ = run(["fit", "--input", "golden_40x4.csv", "--shrinkage", "0.5",
                        "--emit-matrices"], capsys)
    assert code == 0
    assert out == (DATA / "golden_report.json").read_text()


def test_report_contents(monkeypatch, capsys):
    monkeypatch.chdir(DATA)
    code, out, _ = run(["fit", "--input", "golden_40x4.csv"], capsys)
    rep = json.loads(out)
    assert rep["schema_version"] == "1.0"
    assert rep["data"] == {"n": 40, "d": 4, "columns": ["a", "b", "c", "d"]}
    assert [s["i"] for s in rep["path"]["steps"]] == [4, 3, 2, 1]
    assert rep["path"]["mode"] == "diag" and rep["path"]["w"] == 1.0
    assert "correlation" not in rep
    i = rep["selection"]["i"]
    step = rep["path"]["steps"][4 - i]
    assert step["partition"] == rep["selection"]["partition"]
    assert step["alpha"] >= 0.05
    T = np.array(rep["tau_tilde"])
    assert np.array_equal(T, T.T) and np.all(np.diag(T) == 1)


def test_two_concordant_variables(tmp_path, capsys):
    x = np.linspace(0, 1, 12)
    f = write_csv(tmp_path / "two.csv", np.column_stack([x, x ** 2 + 0.01 * np.sin(9 * x)]))
    code, out, _ = run(["fit", "--input", f, "--alpha", "0.01"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["selection"]["partition"] == [[1, 2]]
    assert rep["tau_tilde"][0][1] == rep["tau_hat"]["matrix"][0][1]


def test_output_file_and_header_flags(tmp_path, capsys):
    X = np.random.default_rng(0).normal(size=(20, 3))
    f = write_csv(tmp_path / "x.csv", X)
    out = tmp_path / "r.json"
    assert main(["fit", "--input", f, "--no-header", "--output", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["data"]["columns"] is None and rep["data"]["n"] == 20
    g = tmp_path / "semi.csv"
    g.write_text(Path(f).read_text().replace(",", ";"))
    assert main(["fit", "--input", str(g), "--delimiter", ";", "--output", str(out)]) == 0


def test_malformed_row_reports_line(tmp_path, capsys):
    f = tmp_path / "bad.csv"
    f.write_text("a,b\n1,2\n3,4\n5,x\n7,8\n")
    code, _, err = run(["fit", "--input", str(f)], capsys)
    assert code == 2 and "line 4" in err
    f.write_text("1,2\n3,4,5\n6,7\n")
    code, _, err = run(["fit", "--input", str(f)], capsys)
    assert code == 2 and "line 2" in err


@pytest.mark.parametrize("text", ["", "a,b\n", "1,2\n3,4\n", "1\n2\n3\n"])
def test_too_small_inputs(tmp_path, text):
    f = tmp_path / "s.csv"
    f.write_text(text)
    with pytest.raises(ParseError):
        read_csv_matrix(str(f))


def test_argument_ranges(capsys):
    f = str(DATA / "golden_40x4.csv")
    assert run(["fit", "--input", f, "--shrinkage", "1.5"], capsys)[0] == 2
    assert run(["fit", "--input", f, "--alpha", "1"], capsys)[0] == 2
    assert run(["fit", "--input", "/nonexistent.csv"], capsys)[0] == 2


def test_ties_exit_code_and_opt_in(tmp_path, capsys):
    X = np.random.default_rng(1).normal(size=(15, 3))
    X[3, 1] = X[9, 1]
    f = write_csv(tmp_path / "t.csv", X)
    code, _, err = run(["fit", "--input", f], capsys)
    assert code == 3 and "column 2" in err
    with pytest.warns(UserWarning):
        assert run(["fit", "--input", f, "--break-ties"], capsys)[0] == 0


def test_capacity_exit_code(tmp_path, capsys):
    X = np.random.default_rng(2).normal(size=(4, 142))
    f = write_csv(tmp_path / "wide.csv", X)
    code, _, err = run(["fit", "--input", f, "--mode", "full"], capsys)
    assert code == 5 and "diag" in err.lower()


def test_transform_identity_and_one_third(tmp_path, capsys):
    f = tmp_path / "eye.json"
    f.write_text(json.dumps(np.eye(3).tolist()))
    code, out, _ = run(["transform", "--input", str(f)], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["correlation"] == np.eye(3).tolist()
    assert rep["precision"] == np.eye(3).tolist()

    T = np.full((4, 4), 1 / 3)
    np.fill_diagonal(T, 1.0)
    g = tmp_path / "third.csv"
    g.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in T))
    code, out, _ = run(["transform", "--input", str(g), "--partition", "[[1,2,3,4]]"], capsys)
    P = np.array(json.loads(out)["correlation"])
    assert np.allclose(P[~np.eye(4, dtype=bool)], 0.5, atol=1e-15)
    # back through the inverse map
    assert np.allclose(inverse_sine_transform(P), T, atol=1e-15)


def test_transform_singular_needs_shrink_flag(tmp_path, capsys):
    f = tmp_path / "ones.json"
    f.write_text(json.dumps({"matrix": np.ones((3, 3)).tolist()}))
    code, _, err = run(["transform", "--input", str(f)], capsys)
    assert code == 4 and "shrinkage" in err
    code, _, _ = run(["transform", "--input", str(f), "--shrink-correlation"], capsys)
    assert code == 0


def test_transform_bad_partition(tmp_path, capsys):
    f = tmp_path / "eye.json"
    f.write_text(json.dumps(np.eye(3).tolist()))
    assert run(["transform", "--input", str(f), "--partition", "[[1,2]]"], capsys)[0] == 2
    f.write_text("[1, 2")
    assert run(["transform", "--input", str(f)], capsys)[0] == 2


def test_simulate_preset_and_summary(tmp_path, capsys):
    summ = tmp_path / "s.json"
    code, out, _ = run(["simulate", "--preset", "example10", "--replicates", "2",
                        "--n", "120", "--summary", str(summ)], capsys)
    assert code == 0
    recs = [json.loads(line) for line in out.splitlines()]
    assert [r["replicate"] for r in recs] == [0, 1]
    agg = json.loads(summ.read_text())["aggregates"]
    assert agg["replicates"] == 2
    assert agg["nu2_mean"] == pytest.approx(np.mean([r["nu2"] for r in recs]))


def test_simulate_scenario_file(tmp_path, capsys):
    sc = {"true_tau": [[1, 0.3, 0.3], [0.3, 1, 0.3], [0.3, 0.3, 1]],
          "partition": [[1, 2, 3]], "n": 50, "replicates": 0, "seed": 4}
    f = tmp_path / "sc.json"
    f.write_text(json.dumps(sc))
    code, out, _ = run(["simulate", str(f)], capsys)
    assert code == 0 and out == ""
    sc["replicates"] = 2
    f.write_text(json.dumps(sc))
    _, a, _ = run(["simulate", str(f), "--workers", "1"], capsys)
    _, b, _ = run(["simulate", str(f), "--workers", "3"], capsys)
    assert a == b and len(a.splitlines()) == 2


@pytest.mark.parametrize("text", ["{not json", "[1, 2]", '{"n": 5}',
                                  '{"preset": "example10", "family": "weird"}'])
def test_simulate_bad_scenarios(tmp_path, capsys, text):
    f = tmp_path / "bad.json"
    f.write_text(text)
    assert run(["simulate", str(f)], capsys)[0] == 2


def test_simulate_needs_a_source(capsys):
    assert run(["simulate"], capsys)[0] == 2
    assert run(["simulate", "--preset", "missing"], capsys)[0] == 2


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "blocktau", "fit", "--input", "golden_40x4.csv",
         "--shrinkage", "0.5", "--emit-matrices"],
        cwd=DATA, capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    assert proc.stdout == (DATA / "golden_report.json").read_text()
