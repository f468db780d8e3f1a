import csv
import json

import numpy as np
import pytest

from sssl import FORMAT_VERSION
from sssl.cli import main, resolve_seed, stream

CHAIN = ["--iterations", "60", "--burnin", "20", "--trace-subset", "5"]


def simulate(tmp_path, *extra):
    out = tmp_path / "data.csv"
    code = main(["simulate", "--truth", "paper-p12", "--n", "80", "--seed", "1", "--out", str(out), *extra])
    assert code == 0
    return out


def test_simulate_then_fit_round_trip(tmp_path):
    data = simulate(tmp_path, "--truth-out", str(tmp_path / "truth.csv"))
    out = tmp_path / "fit.json"
    assert main(["fit", "--input", str(data), "--seed", "7", "--out", str(out), *CHAIN]) == 0
    res = json.loads(out.read_text())
    assert res["format_version"] == FORMAT_VERSION and res["seed"] == 7
    assert res["p"] == 12 and res["n"] == 80 and res["model"] == "covariance"
    prob = np.array(res["edge_prob"])
    assert prob.shape == (12, 12) and np.array_equal(prob, prob.T)
    assert res["theta"]["pi"] == pytest.approx(2 / 11)
    assert len(res["timing"]["sweep_seconds"]) == 60
    assert "max_drift_after_refresh" in res["diagnostics"]

    m_out = tmp_path / "m.json"
    assert main(["metrics", "--result", str(out), "--truth", str(tmp_path / "truth.csv"), "--out", str(m_out)]) == 0
    counts = json.loads(m_out.read_text())
    assert counts["tp"] + counts["fp"] + counts["fn"] + counts["tn"] == 66


def test_fit_is_reproducible_apart_from_timing(tmp_path):
    data = simulate(tmp_path)
    runs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        main(["fit", "--input", str(data), "--model", "concentration", "--seed", "3", "--out", str(out), *CHAIN])
        res = json.loads(out.read_text())
        res.pop("timing")
        runs.append(res)
    assert runs[0] == runs[1]


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("SSSL_SEED", "42")
    assert resolve_seed(None) == 42
    assert resolve_seed(5) == 5
    a = stream(42, 1).standard_normal(3)
    b = np.random.default_rng(np.random.SeedSequence(42).spawn(2)[1]).standard_normal(3)
    assert np.array_equal(a, b)


def test_fit_rejects_single_column(tmp_path, capsys):
    path = tmp_path / "one.csv"
    path.write_text("1\n2\n3\n")
    assert main(["fit", "--input", str(path), "--seed", "1", *CHAIN]) == 2
    assert "dimension must be at least 2" in capsys.readouterr().err


def test_fit_reports_bad_cell(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\nx,3\n4,5\n")
    assert main(["fit", "--input", str(path), *CHAIN]) == 2
    assert "row 2, column 1" in capsys.readouterr().err


def test_pi_auto_needs_four_columns(tmp_path, capsys):
    path = tmp_path / "three.csv"
    np.savetxt(path, np.random.default_rng(0).standard_normal((20, 3)), delimiter=",")
    assert main(["fit", "--input", str(path), "--seed", "1", *CHAIN]) == 2
    assert "--pi" in capsys.readouterr().err
    assert main(["fit", "--input", str(path), "--seed", "1", "--pi", "0.3", "--out",
                 str(tmp_path / "ok.json"), *CHAIN]) == 0


def test_fit_abort_writes_state(tmp_path, monkeypatch, capsys):
    from sssl import covariance

    data = simulate(tmp_path)
    monkeypatch.setattr(covariance, "sample_gig", lambda *a, **k: -1.0)
    dump = tmp_path / "state.npz"
    assert main(["fit", "--input", str(data), "--seed", "1", "--state-dump", str(dump), *CHAIN]) == 3
    assert dump.exists()
    with np.load(dump) as z:
        assert "matrix" in z.files
    assert "state written" in capsys.readouterr().err


def test_calibrate_with_target(tmp_path):
    out = tmp_path / "cal.json"
    args = ["calibrate", "--p", "5", "--v0", "0.1", "--h", "10", "--pi", "0.1,0.3,0.5",
            "--iterations", "300", "--seed", "2", "--out", str(out)]
    assert main(args + ["--target", "0.15"]) == 0
    res = json.loads(out.read_text())
    assert len(res["rows"]) == 3
    assert 0.1 <= res["calibrated_pi"] <= 0.5
    assert main(args + ["--target", "0.95"]) == 2


def test_calibrate_grid_over_h(tmp_path):
    out = tmp_path / "grid.json"
    assert main(["calibrate", "--p", "4", "--h", "10,50", "--pi", "0.3", "--iterations", "100",
                 "--seed", "2", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())["rows"]
    assert [r["theta"]["h"] for r in rows] == [10.0, 50.0]


def test_benchmark_csv(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["benchmark", "--p", "5,8", "--sweeps", "10", "--seed", "0", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [(r["p"], r["model"]) for r in rows] == [
        ("5", "concentration"), ("5", "covariance"), ("8", "concentration"), ("8", "covariance")]
    assert all(float(r["seconds_per_1000_sweeps"]) > 0 for r in rows)


def test_rolling_windows_written(tmp_path):
    data = tmp_path / "panel.csv"
    assert main(["simulate", "--truth", "tridiag", "--p", "4", "--n", "120", "--start-date", "2020-01-01",
                 "--seed", "3", "--out", str(data)]) == 0
    outdir = tmp_path / "roll"
    assert main(["rolling", "--input", str(data), "--time-column", "date", "--window", "60d", "--step", "30d",
                 "--out-dir", str(outdir), "--seed", "4", *CHAIN]) == 0
    index = json.loads((outdir / "index.json").read_text())
    assert len(index["windows"]) == 3
    first = json.loads((outdir / index["windows"][0]["result"]).read_text())
    assert first["n"] == 60 and first["window_start"] == "2020-01-01"
    assert [w["stream"] for w in index["windows"]] == [0, 1, 2]


def test_simulate_identity_needs_p(tmp_path):
    assert main(["simulate", "--truth", "identity", "--n", "5", "--out", str(tmp_path / "x.csv")]) == 2
