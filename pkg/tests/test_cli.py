import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from driftwatch.cli import parse_and_dispatch, read_series
from driftwatch.exceptions import DataError
from driftwatch.experiments import preset


def run(argv, capsys):
    code = parse_and_dispatch(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def series(tmp_path, capsys):
    path = tmp_path / "path.csv"
    code, _, _ = run(["simulate", "--model", "ou-centered", "--theta", "1", "--sigma", "1",
                      "--n", "300", "--seed", "4", "--out", str(path)], capsys)
    assert code == 0
    return path


def test_help_exits_zero(capsys):
    code, out, _ = run(["test", "--help"], capsys)
    assert code == 0 and "--trim" in out


def test_missing_model_is_usage_error(series, capsys):
    code, out, err = run(["estimate", "--in", str(series)], capsys)
    assert code == 1 and out == "" and "--model" in err


def test_unknown_subcommand(capsys):
    assert run(["frobnicate"], capsys)[0] == 1


def test_non_numeric_cell_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x\n1.0\n2.0\nabc\n3.0\n")
    code, out, err = run(["estimate", "--model", "ou-centered", "--in", str(bad), "--h", "0.1"], capsys)
    assert code == 2 and out == ""
    assert "line 4" in err


def test_estimation_failure_exit_code(tmp_path, capsys):
    big = tmp_path / "big.csv"
    big.write_text("x\n0\n1e200\n-1e200\n1e200\n-1e200\n0\n")
    code, _, err = run(["estimate", "--model", "ou-centered", "--in", str(big), "--h", "0.1"], capsys)
    assert code == 3 and "estimation failure" in err


def test_single_column_needs_h(tmp_path, capsys):
    f = tmp_path / "x.csv"
    f.write_text("x\n" + "\n".join(str(v) for v in np.sin(np.arange(50))) + "\n")
    assert run(["estimate", "--model", "ou-centered", "--in", str(f)], capsys)[0] == 1
    assert run(["estimate", "--model", "ou-centered", "--in", str(f), "--h", "0.01"], capsys)[0] == 0


def test_read_series_checks_spacing(tmp_path):
    ok = tmp_path / "ok.csv"
    ok.write_text("t,x\n0,1\n0.5,2\n1.0,1.5\n1.5,1\n")
    p = read_series(ok)
    assert p.step == pytest.approx(0.5) and p.n == 3
    uneven = tmp_path / "uneven.csv"
    uneven.write_text("t,x\n0,1\n0.5,2\n1.1,1.5\n")
    with pytest.raises(DataError):
        read_series(uneven)
    header = tmp_path / "header.csv"
    header.write_text("time,value\n0,1\n1,2\n")
    with pytest.raises(DataError):
        read_series(header)


def test_simulate_output_and_determinism(series, tmp_path, capsys):
    rows = list(csv.reader(series.open()))
    assert rows[0] == ["t", "x"] and len(rows) == 302
    assert float(rows[1][1]) == 0.0
    code, out, _ = run(["simulate", "--model", "ou-centered", "--theta", "1", "--sigma", "1",
                        "--n", "300", "--seed", "4"], capsys)
    assert code == 0 and out == series.read_text()


def test_simulate_requires_seed(capsys):
    code, _, err = run(["simulate", "--model", "ou-centered", "--theta", "1", "--sigma", "1",
                        "--n", "30"], capsys)
    assert code == 1 and "--seed" in err


def test_simulate_change_and_contamination(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = run(["simulate", "--model", "ou-mean-reverting", "--theta", "2", "1", "--sigma", "1",
                      "--n", "200", "--seed", "1", "--change", "0.5,2,1,3",
                      "--contaminate", "0.05,1", "--out", str(out)], capsys)
    assert code == 0 and read_series(out).n == 200
    code, _, err = run(["simulate", "--model", "ou-centered", "--theta", "1", "--sigma", "1",
                        "--n", "200", "--seed", "1", "--change", "0.5,1"], capsys)
    assert code == 1


def test_estimate_json(series, capsys):
    code, out, _ = run(["estimate", "--model", "ou-centered", "--in", str(series), "--alpha", "0.2"], capsys)
    d = json.loads(out)
    assert code == 0
    assert set(d) == {"theta_hat", "sigma_hat", "alpha", "objective", "converged"}
    assert 0.7 < d["sigma_hat"] < 1.3 and d["alpha"] == 0.2


def test_test_json(series, capsys):
    code, out, _ = run(["test", "--model", "ou-centered", "--in", str(series),
                        "--alpha", "0.2", "--trim", "hard", "--M", "3.84"], capsys)
    d = json.loads(out)
    assert code == 0
    assert d["trim"] == "hard" and d["M"] == 3.84
    assert d["reject"] == (d["p_value"] < 0.05)
    assert 1 <= d["k_hat"] <= 300


def test_bad_trim_constant(series, capsys):
    code, _, _ = run(["test", "--model", "ou-centered", "--in", str(series), "--M", "-1"], capsys)
    assert code == 1


def test_segment_json(tmp_path, capsys):
    f = tmp_path / "seg.csv"
    run(["simulate", "--model", "ou-centered", "--theta", "1", "--sigma", "1", "--n", "1000",
         "--seed", "9", "--change", "0.5,1,2.5", "--out", str(f)], capsys)
    code, out, _ = run(["segment", "--model", "ou-centered", "--in", str(f), "--alphas", "0,0.2"], capsys)
    d = json.loads(out)
    assert code == 0
    assert any(abs(c - 500) < 50 for c in d["change_points"])
    assert len(d["segments"]) == len(d["change_points"]) + 1
    assert all([e["alpha"] for e in s["estimates"]] == [0.0, 0.2] for s in d["segments"])


def test_forecast_outputs(tmp_path, capsys):
    f = tmp_path / "mr.csv"
    run(["simulate", "--model", "ou-mean-reverting", "--theta", "30", "15", "--sigma", "10",
         "--n", "300", "--h", str(1 / 252), "--x0", "15", "--seed", "2", "--out", str(f)], capsys)
    rec = tmp_path / "rec.csv"
    code, out, _ = run(["forecast", "--model", "ou-mean-reverting", "--in", str(f), "--eval-start", "280",
                        "--refit-every", "5", "--out", str(rec)], capsys)
    d = json.loads(out)
    assert code == 0 and d["count"] == 20
    rows = list(csv.DictReader(rec.open()))
    assert list(rows[0]) == ["t", "actual", "predicted", "pi_lo", "pi_hi"]
    assert len(rows) == 20
    err = np.array([float(r["actual"]) - float(r["predicted"]) for r in rows])
    assert d["rmse"] == pytest.approx(float(np.sqrt(np.mean(err ** 2))), rel=1e-12)


def test_forecast_bad_eval_start(series, capsys):
    code, _, _ = run(["forecast", "--model", "ou-centered", "--in", str(series), "--eval-start", "999"], capsys)
    assert code == 1


def test_mc_config_round_trip(tmp_path, capsys):
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps({"n_list": [200], "reps": 3, "alphas": [0.2],
                               "trims": [{"variant": "tent", "m": 6.63}], "base_seed": 1}))
    out = tmp_path / "t.csv"
    code, stdout, _ = run(["mc", "--config", str(cfg), "--out", str(out)], capsys)
    assert code == 0 and stdout == ""
    rows = list(csv.DictReader(out.open()))
    assert [r["test_id"] for r in rows] == ["T2", "Tn"]
    code, stdout, _ = run(["mc", "--config", str(cfg)], capsys)
    assert stdout == out.read_text()


def test_mc_argument_errors(tmp_path, capsys):
    assert run(["mc"], capsys)[0] == 1
    assert run(["mc", "--preset", "table1"], capsys)[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"replications": 4}')
    assert run(["mc", "--config", str(bad)], capsys)[0] == 2


def test_mc_preset_small(capsys):
    code, out, _ = run(["mc", "--preset", "table1", "--reps", "1", "--seed", "0", "--format", "text"], capsys)
    (spec,), _ = preset("table1")
    per_n = 1 + len(spec.alphas) * len(spec.trims)
    assert code == 0
    assert len(out.strip().splitlines()) == 1 + len(spec.n_list) * per_n


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "driftwatch.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "simulate" in res.stdout
