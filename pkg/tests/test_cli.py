import csv
import json
import math

import pytest

from nlsinflate.cli import (CONFIG_SCHEMA, NORMS_COLUMNS, SWEEP_COLUMNS, fit_exponent, main,
                            parse_norm, svg_loglog)
from nlsinflate.norms import NormSpec
from nlsinflate.scenarios import Scenario


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_run_outputs(tmp_path, capsys):
    code = main(["run", "--case", "case6", "--N", "64", "128", "--K", "5", "--out", str(tmp_path),
                 "--emit", "csv,svg,jsonl"])
    assert code == 0
    header, rows = read_csv(tmp_path / "norms.csv")
    assert header == NORMS_COLUMNS
    assert [r[1] for r in rows] == ["64", "128"]
    assert (tmp_path / "ratio.svg").read_text().startswith("<svg")
    lines = (tmp_path / "report.jsonl").read_text().splitlines()
    assert len(lines) == 2
    sc = Scenario.from_dict(json.loads(lines[0])["scenario"])
    assert sc.case_id == "case6" and sc.N == 64
    assert "case6 N=64" in capsys.readouterr().out


def test_scenario_file_roundtrip(tmp_path):
    assert main(["run", "--case", "case6", "--N", "64", "--K", "5", "--out", str(tmp_path)]) == 0
    line = (tmp_path / "report.jsonl").read_text().splitlines()[0]
    scen = tmp_path / "scen.jsonl"
    scen.write_text(json.dumps(json.loads(line)["scenario"]) + "\n")
    out2 = tmp_path / "again"
    assert main(["run", "--scenario", str(scen), "--K", "5", "--out", str(out2)]) == 0
    _, a = read_csv(tmp_path / "norms.csv")
    _, b = read_csv(out2 / "norms.csv")
    assert a == b


@pytest.mark.parametrize("argv", [["run", "--case", "case6", "--N"],
                                  ["run", "--case", "case6", "--N", "48"],
                                  ["run", "--case", "nope", "--N", "64"],
                                  ["run", "--N", "64"],
                                  ["run", "--case", "case6", "--N", "64", "--emit", "pdf"],
                                  ["run", "--case", "case6", "--N", "64", "--norm", "Besov:1"]])
def test_config_errors_exit_one(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == 1


def test_divergence_exit_two(tmp_path):
    code = main(["run", "--case", "case6", "--N", "64", "--K", "5", "--r", "5", "--out", str(tmp_path)])
    assert code == 2
    # the report is still written
    _, rows = read_csv(tmp_path / "norms.csv")
    assert len(rows) == 1 and rows[0][-1] == "false"


def test_sweep_columns_and_fit(tmp_path):
    assert main(["sweep", "--case", "case6", "--N", "64", "128", "256", "--K", "5",
                 "--out", str(tmp_path), "--emit", "csv,svg"]) == 0
    header, rows = read_csv(tmp_path / "sweep.csv")
    assert header == SWEEP_COLUMNS
    assert len(rows) == 3
    assert all(r[9] != "" and r[10] != "" for r in rows)
    assert len({r[9] for r in rows}) == 1
    assert (tmp_path / "sweep.svg").exists()


def test_sweep_single_N_has_empty_exponent(tmp_path):
    assert main(["sweep", "--case", "case6", "--N", "64", "--K", "5", "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0][9] == "" and rows[0][10] == ""


def test_sweep_d_norm_kind(tmp_path):
    assert main(["sweep", "--case", "appB_bracket", "--N", "16", "--K", "3",
                 "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0][2].startswith("DBracket")


def test_resonance_outputs(tmp_path, capsys):
    assert main(["resonance", "--range", "4", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "resonance.csv")
    assert header == ["k1", "k2", "k3", "k4", "k5", "k", "phase", "source"]
    assert {r[-1] for r in rows} == {"both"}
    assert ["1", "3", "1", "3", "4"] in [r[:5] for r in rows]
    summary = (tmp_path / "resonance_summary.txt").read_text().strip()
    assert summary.startswith("K=4 ") and summary.endswith("equal=true")
    assert summary in capsys.readouterr().out


def test_resonance_cubic_brute_only(tmp_path):
    assert main(["resonance", "--nu", "1", "--range", "2", "--k", "1", "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "resonance.csv")
    assert rows and all(r[-1] == "brute" and r[3] == "1" for r in rows)


def test_resonance_guard(tmp_path):
    assert main(["resonance", "--range", "100", "--out", str(tmp_path)]) == 2
    assert main(["resonance", "--range", "20", "--out", str(tmp_path)]) == 2


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"schema": CONFIG_SCHEMA, "case": "case6", "N": [64, 128], "K": 5}))
    assert main(["run", "--config", str(cfg), "--N", "256", "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "norms.csv")
    assert [r[1] for r in rows] == ["256"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": CONFIG_SCHEMA, "colour": "blue"}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1
    bad.write_text(json.dumps({"case": "case6"}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1


def test_norms_command(tmp_path):
    assert main(["norms", "--case", "case6", "--N", "64", "--K", "5", "--eval", "Hs:-0.5",
                 "--eval", "ModA:1", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "norms_table.csv")
    assert header[:3] == ["case_id", "N", "norm"]
    assert len(rows) == 2


def test_sequence_command(tmp_path, capsys):
    assert main(["sequence", "--p", "3", "--kmax", "10", "--out", str(tmp_path)]) == 0
    assert "bound_holds=true" in capsys.readouterr().out
    header, rows = read_csv(tmp_path / "sequence.csv")
    assert header == ["k", "a_k", "a_k_float"] and len(rows) == 10


def test_compare_command(tmp_path):
    assert main(["compare", "--case", "case6", "--N", "4", "--r", "0.05", "--cutoff", "256",
                 "--steps", "96", "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "compare.json").read_text())[0]
    assert res["l2_rel_err"] < 1e-6


def test_workers_env(tmp_path, monkeypatch):
    monkeypatch.setenv("INFLATE_WORKERS", "two")
    assert main(["run", "--case", "case6", "--N", "64", "--out", str(tmp_path)]) == 1


def test_helpers():
    assert parse_norm("Hs:-0.5") == NormSpec.Hs(-0.5)
    assert parse_norm("DBracket:0.1,2,inf").params[2] == math.inf
    assert fit_exponent([64], [1.0]) == (None, None)
    slope, r2 = fit_exponent([4, 16, 64], [1, 2, 4])
    assert slope == pytest.approx(0.5) and r2 == pytest.approx(1.0)
    assert "<polyline" in svg_loglog([1, 2], [1, 3])
    assert "<polyline" not in svg_loglog([], [])
