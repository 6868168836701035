import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from bregsaddle.cli import main

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_minimal_smoke(tmp_path):
    assert main(["solve", str(CONFIGS / "minimal_xy.json"), "--out-dir", str(tmp_path), "--quiet"]) == 0
    rows = read_rows(tmp_path / "trace.csv")
    assert rows[0] == ["k", "alpha", "beta", "resid_norm", "value_error", "gap_bound", "dist_to_saddle",
                       "sparsity_fraction"]
    assert len(rows) == 102
    summary = json.loads((tmp_path / "summary.json").read_text())
    for key in ("final_residual", "iterations", "value_error_series_summary", "all_inequalities_pass", "wall_time"):
        assert key in summary
    assert summary["iterations"] == 100 and summary["all_inequalities_pass"]
    assert (tmp_path / "diagnostics.csv").exists()
    vectors = json.loads((tmp_path / "trace.json").read_text())
    assert len(vectors["records"]) == 101


def test_bad_schedule_exits_1(tmp_path, capsys):
    code = main(["solve", str(CONFIGS / "xy_bad_schedule.json"), "--out-dir", str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err
    assert "schedule violates" in err and "k=0" in err
    assert not (tmp_path / "trace.csv").exists()


def test_unreadable_config(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.json"), "--quiet"]) == 1
    assert "cannot read config" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", str(bad), "--quiet"]) == 1
    missing = tmp_path / "noproblem.json"
    missing.write_text(json.dumps({"method": "beg"}))
    assert main(["solve", str(missing), "--quiet"]) == 1
    assert "'problem'" in capsys.readouterr().err
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"method": "newton", "problem": {"kind": "bilinear", "m": 2, "n": 2, "seed": 0}}))
    assert main(["solve", str(unknown), "--quiet"]) == 1
    assert "method" in capsys.readouterr().err


def test_check_override(tmp_path):
    out = tmp_path / "none"
    assert main(["solve", str(CONFIGS / "minimal_xy.json"), "--out-dir", str(out), "--check", "none", "--quiet"]) == 0
    assert read_rows(out / "diagnostics.csv") == [["inequality_name", "k", "lhs", "rhs", "residual", "pass"]]
    out = tmp_path / "some"
    main(["solve", str(CONFIGS / "minimal_xy.json"), "--out-dir", str(out), "--check", "regret,distance", "--quiet"])
    names = {r[0] for r in read_rows(out / "diagnostics.csv")[1:]}
    assert names == {"beg_regret", "beg_distance"}


def test_golden_byte_identical(tmp_path):
    assert main(["solve", str(CONFIGS / "golden_bilinear_10x10.json"), "--out-dir", str(tmp_path), "--quiet"]) == 0
    for name in ("trace.csv", "summary.json", "diagnostics.csv"):
        assert (tmp_path / name).read_bytes() == (GOLDEN / name).read_bytes(), name


@pytest.mark.parametrize("a,b", [("equiv_beg", "equiv_eg_reference"), ("equiv_bep", "equiv_ogda_reference")])
def test_compare_equivalence_pairs(a, b, capsys):
    code = main(["compare", str(CONFIGS / f"{a}.json"), str(CONFIGS / f"{b}.json"), "--tol", "1e-12", "--quiet"])
    out = json.loads(capsys.readouterr().out)
    assert code == 0
    assert out["judged"] and out["pass"] and out["max_divergence"] <= 1e-12
    assert out["iterations"] == 100


def test_compare_different_methods_not_judged(capsys):
    code = main(["compare", str(CONFIGS / "equiv_beg.json"), str(CONFIGS / "equiv_bep.json"), "--quiet"])
    out = json.loads(capsys.readouterr().out)
    assert code == 0
    assert out["max_divergence"] > 0 and out["pass"] is None


def test_compare_dimension_mismatch():
    assert main(["compare", str(CONFIGS / "minimal_xy.json"), str(CONFIGS / "equiv_beg.json"), "--quiet"]) == 1


def test_validate_schedule(capsys):
    assert main(["validate-schedule", str(CONFIGS / "minimal_xy.json"), "--horizon", "1000", "--quiet"]) == 0
    assert json.loads(capsys.readouterr().out)["valid"]
    assert main(["validate-schedule", str(CONFIGS / "xy_bad_schedule.json"), "--horizon", "10", "--quiet"]) == 2
    rep = json.loads(capsys.readouterr().out)
    assert rep["k"] == 0 and not rep["valid"]


def test_jobs_match_sequential(tmp_path):
    cfgs = [str(CONFIGS / n) for n in ("minimal_xy.json", "equiv_bep.json", "sparse_l1_quadratic.json")]
    assert main(["solve", *cfgs, "--out-dir", str(tmp_path / "seq"), "--quiet"]) == 0
    assert main(["solve", *cfgs, "--out-dir", str(tmp_path / "par"), "--jobs", "3", "--quiet"]) == 0
    for c in cfgs:
        stem = Path(c).stem
        seq = (tmp_path / "seq" / stem / "trace.csv").read_bytes()
        assert seq == (tmp_path / "par" / stem / "trace.csv").read_bytes()


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "bregsaddle", "solve", str(CONFIGS / "minimal_xy.json"), "--out-dir", str(tmp_path),
         "--quiet"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr


def test_sparse_config_reports_sparsity(tmp_path):
    assert main(["solve", str(CONFIGS / "sparse_l1_quadratic.json"), "--out-dir", str(tmp_path), "--quiet"]) == 0
    rows = read_rows(tmp_path / "trace.csv")
    fractions = [float(r[7]) for r in rows[1:]]
    assert all(0.0 <= f <= 1.0 for f in fractions)
