import csv
import io
import json
import subprocess
import sys

import pytest

from rhdet.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main, run


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("RHDET_CACHE", str(tmp_path / "cache"))
    return tmp_path / "cache"


def _strip(report):
    return {k: v for k, v in report.items() if k != "timestamps"}


def test_report_schema(capsys):
    code, report = run(["wr-poly", "--r", "3", "--prec", "40"])
    assert code == EXIT_OK
    assert set(report) == {"command", "params", "precision_used", "results", "error_bounds", "timestamps",
                           "tool_version"}
    out = json.loads(capsys.readouterr().out)
    assert out["command"] == "wr-poly"


def test_det_small_minor(capsys):
    code, report = run(["det", "--n", "1", "--r", "3", "--prec", "40"])
    assert code == EXIT_OK
    assert json.dumps(report["results"])


def test_conj3_r2_passes():
    assert main(["conj3", "--r", "2", "--prec", "40"]) == EXIT_OK


@pytest.mark.parametrize("argv", [["bogus"], ["conj3", "--r", "9"], ["det", "--n", "1"],
                                  ["phi", "--u", "abc"], ["beta", "--prec", "5"]])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == EXIT_USAGE


def test_failed_check_exits_1(capsys):
    # q is positive on the grid, so the negativity check fails
    code, _ = run(["q-scan", "--prec", "40", "--u-min", "0.2", "--u-max", "0.6", "--step", "0.2"])
    assert code == EXIT_FAIL


def test_csv_scan_rows(capsys):
    code, _ = run(["wronskian-scan", "--prec", "40", "--r", "2", "--u-max", "0.2", "--step", "0.1",
                   "--format", "csv"])
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows and {"u", "p", "m", "value", "sign"} <= set(rows[0])
    assert {r["u"] for r in rows} == {"0.0", "0.1", "0.2"}


def test_deterministic_apart_from_timestamps(capsys):
    argv = ["beta", "--n", "5", "--prec", "40"]
    _, a = run(argv)
    _, b = run(argv)
    assert json.dumps(_strip(a), sort_keys=True) == json.dumps(_strip(b), sort_keys=True)


def test_beta_cache_written(isolated_cache, capsys):
    assert main(["beta", "--n", "4", "--prec", "40"]) == EXIT_OK
    path = isolated_cache / "beta_table.json"
    assert path.exists()
    doc = json.loads(path.read_text())
    assert [e["n"] for e in doc["entries"]] == [0, 1, 2, 3, 4]


def test_out_file(tmp_path, capsys):
    target = tmp_path / "sub" / "r.json"
    assert main(["delta-poly", "--r", "3", "--prec", "40", "--out", str(target)]) == EXIT_OK
    assert json.loads(target.read_text())["command"] == "delta-poly"
    assert capsys.readouterr().out == ""


def test_verify_all_subset(capsys):
    code, report = run(["verify-all", "--criteria", "1", "2", "--prec", "40"])
    assert code == EXIT_OK


def test_module_entry_point(isolated_cache):
    proc = subprocess.run([sys.executable, "-m", "rhdet", "cvpoly", "--k", "2", "--prec", "40"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "cvpoly"
