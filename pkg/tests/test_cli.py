import csv
import hashlib
import json
import subprocess
import sys

import pytest

from gfmstab.cli import EXIT_INPUT, EXIT_OK, main
from gfmstab.io import config_document
from gfmstab.params import reference_converter, reference_grid

SMALL_DOA = ["--delta-count", "10", "--omega-count", "3"]


@pytest.fixture(autouse=True)
def _pinned_clock(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _snapshot(folder):
    return {p.name: p.read_bytes() for p in sorted(folder.iterdir())}


def test_analyze_stdout(capsys):
    assert main(["analyze", "--beta", "-30"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["beta"] == -30.0
    assert doc["delta_sat"] == pytest.approx(32.0432, abs=1e-4)
    assert doc["returning_set"]["closed_form"] == [[-45.5351, 45.5351]]
    assert doc["entering_set"] == [[32.0432, 327.9568]]
    assert doc["equilibria"]["delta_ue1"] == 75.7785
    assert doc["c1"] is False and doc["c2_static"] is False


def test_analyze_to_directory(tmp_path):
    assert main(["analyze", "--beta", "-90", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "analysis.json").read_text())
    assert doc["c1"] is True
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["outputs"] == ["analysis.json"]
    assert manifest["timestamp"] == "2023-11-14T22:13:20Z"


def test_sets_default_has_91_rows(capsys):
    assert main(["sets"]) == EXIT_OK
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["beta_deg", "delta_sat_deg", "delta_d_p_deg", "delta_q_p_deg",
                       "r_lo_deg", "r_hi_deg"]
    assert len(rows) == 92
    assert {r[1] for r in rows[1:]} == {"32.0432"}
    b30 = next(r for r in rows[1:] if r[0] == "-30.0000")
    assert (b30[4], b30[5]) == ("-45.5351", "45.5351")


def test_sets_exact_method_near_minus_45(tmp_path):
    args = ["sets", "--beta-from", "-46", "--beta-to", "-44", "--steps", "3", "--method"]
    main(args + ["closed_form", "--out", str(tmp_path / "a")])
    main(args + ["exact", "--out", str(tmp_path / "b")])
    a = _read_csv(tmp_path / "a" / "sets.csv")
    b = _read_csv(tmp_path / "b" / "sets.csv")
    assert a[2][4:] != b[2][4:]


def test_case_outputs(tmp_path):
    out = tmp_path / "b"
    assert main(["case", "--id", "b", "--out", str(out)]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == [
        "manifest.json", "summary.json", "trajectory.csv"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["case_id"] == "B"
    assert summary["outcome"] == "ConvergedSEP"
    assert "slip_count" not in summary and "cause" not in summary
    assert summary["delta_af_deg"] == pytest.approx(34.93, abs=1.0)
    assert [e["to"] for e in summary["mode_events"]][:2] == ["Saturated", "Normal"]
    rows = _read_csv(out / "trajectory.csv")
    assert rows[0][0] == "time_s" and rows[1][0] == "0.000000"
    assert rows[-1][0] == "10.000000"


def test_case_pole_slip_summary(tmp_path):
    assert main(["case", "--id", "G", "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["outcome"] == "PoleSlipResync"
    assert summary["slip_count"] == 1
    lo, hi = summary["negative_power_interval_s"]
    assert 0.9 <= hi - lo <= 1.6


def test_case_outputs_are_byte_stable(tmp_path):
    main(["case", "--id", "E", "--out", str(tmp_path / "1")])
    main(["case", "--id", "E", "--out", str(tmp_path / "2")])
    a, b = _snapshot(tmp_path / "1"), _snapshot(tmp_path / "2")
    assert a.keys() == b.keys()
    for name in a:
        if name == "manifest.json":
            ma, mb = json.loads(a[name]), json.loads(b[name])
            ma.pop("command"), mb.pop("command")
            assert ma == mb
        else:
            assert a[name] == b[name], name


def test_simulate_manifest_digest_matches_config(tmp_path):
    doc = config_document(reference_grid(), reference_converter(beta=-90.0))
    doc["sim"]["t_max"] = 3.0
    doc["events"] = [{"t": 0.05, "type": "voltage_step", "v_g": 0.05},
                     {"t": 0.15, "type": "voltage_step", "v_g": 1.0}]
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc, indent=1))
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_digest"] == "sha256:" + hashlib.sha256(cfg.read_bytes()).hexdigest()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["outcome"] == "ConvergedSatSEP" and summary["cause"] == "C1"
    assert "case_id" not in summary


def test_doa_and_portrait(tmp_path):
    out = tmp_path / "doa"
    assert main(["doa", "--out", str(out), *SMALL_DOA]) == EXIT_OK
    rows = _read_csv(out / "doa.csv")
    assert rows[0] == ["delta_deg", "omega_dev_pu", "label", "cause"]
    assert len(rows) == 31
    labels = {r[2] for r in rows[1:]}
    assert "ConvergedSEP" in labels
    assert _read_csv(out / "boundary.csv")[0] == ["segment_id", "delta_deg", "omega_dev_pu"]

    out = tmp_path / "portrait"
    assert main(["portrait", "--out", str(out), "--unsaturated", *SMALL_DOA]) == EXIT_OK
    names = json.loads((out / "manifest.json").read_text())["outputs"]
    assert names == ["boundary.csv", "doa.csv", "vector_field.csv"]
    assert len(_read_csv(out / "vector_field.csv")) == 31


@pytest.mark.parametrize("argv", [
    ["case", "--id", "Q", "--out", "unused"],
    ["analyze", "--beta", "15"],
    ["analyze", "--config", "/nonexistent/cfg.json"],
    ["sets", "--steps", "1"],
    ["doa", "--out", "unused", "--delta-count", "1"],
])
def test_input_errors_exit_1(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_bad_config_reports_pointer(tmp_path, capsys):
    doc = config_document(reference_grid(), reference_converter())
    del doc["converter"]["beta"]
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    assert main(["analyze", "--config", str(cfg)]) == EXIT_INPUT
    assert "/converter/beta" in capsys.readouterr().err


def test_usage_errors_exit_1():
    for argv in (["bogus"], [], ["case", "--out", "x"]):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == EXIT_INPUT


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gfmstab", "analyze", "--beta", "-6"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["returning_set"]["exact"] == [[-23.8003, 23.8003]]
