"""End-to-end CLI paths: exit codes, formats, round trips, determinism."""

import hashlib
import json
import os

import numpy as np
import pytest

from fracbubbles.cli import run_cli_lines
from fracbubbles.grid import Field, HalfSpaceGrid, energy_report, zero_field
from fracbubbles.io import (canonical_json, format_float, read_field_csv,
                            read_trace_csv, write_field_csv, write_ledger_csv,
                            write_trace_csv, LEDGER_COLUMNS)
from fracbubbles.params import FracParams


def sha(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def test_constants_command(tmp_path, capsys):
    out = tmp_path / "c.json"
    code = run_cli_lines(["constants", "--n", "3", "--gamma", "0.5",
                          "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert set(doc) == {"n", "gamma", "two_star", "d_gamma", "d_star", "sobolev_S",
                        "kappa", "energy_quantum", "beta_zero"}
    assert doc["d_star"] == 1.0
    assert doc["kappa"] == 2.0


def test_constants_rejects_bad_order(capsys):
    assert run_cli_lines(["constants", "--n", "1", "--gamma", "0.9"]) == 64
    err = capsys.readouterr().err
    assert "gamma" in err


def test_missing_required_flag_is_64(capsys):
    assert run_cli_lines(["constants", "--n", "3"]) == 64
    assert "--gamma" in capsys.readouterr().err


def test_bubble_command_values(tmp_path):
    out = tmp_path / "b.json"
    code = run_cli_lines(["bubble", "--n", "3", "--gamma", "0.5", "--lambda", "4",
                          "--amplitude", "1", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["sample_values"]["offset_0lam"] == pytest.approx(0.25)
    assert doc["kappa"] == 2.0


def test_extend_command_roundtrip(tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("x1,y\n0.0,0.5\n1.0,0.2\n")
    out = tmp_path / "ext.csv"
    code = run_cli_lines(["extend", "--n", "1", "--gamma", "0.25",
                          "--lambda", "1.0", "--points", str(pts),
                          "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "x1,y,U,err_estimate"
    assert len(lines) == 3
    vals = [float(tok) for tok in lines[1].split(",")]
    assert vals[2] > 0 and vals[3] < 1e-6


def test_extend_malformed_points(tmp_path, capsys):
    pts = tmp_path / "pts.csv"
    pts.write_text("x1,y\n0.0\n")
    code = run_cli_lines(["extend", "--n", "1", "--gamma", "0.25",
                          "--points", str(pts)])
    assert code == 64
    assert "columns" in capsys.readouterr().err


def test_energy_command_roundtrip(tmp_path, p1_quarter):
    g = HalfSpaceGrid(params=p1_quarter, L=4.0, N=64, Y=2.0, M=12, kind="full")
    rngl = np.random.default_rng(0)
    fld = Field(g, rngl.normal(size=(g.N, g.M + 1)))
    fpath = tmp_path / "f.csv"
    write_field_csv(str(fpath), fld)
    back = read_field_csv(str(fpath))
    np.testing.assert_allclose(back.samples, fld.samples, rtol=0, atol=0)

    out = tmp_path / "e.json"
    assert run_cli_lines(["energy", "--field", str(fpath), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    ref = energy_report(fld)
    # parse(emit(x)) reproduces the report exactly: floats round-trip 17 digits
    assert doc == json.loads(canonical_json(ref.as_dict()))


def test_ledger_has_exactly_documented_columns(tmp_path):
    from fracbubbles.synthesis import LedgerRow
    rows = [LedgerRow(alpha=1, i_total=1 / 3, i_background=0.0, quantum_sum=0.1,
                      defect=0.2, residual=0.3, min_separation=float("nan"))]
    path = tmp_path / "ledger.csv"
    write_ledger_csv(str(path), rows)
    lines = path.read_text().strip().splitlines()
    assert lines[0].split(",") == LEDGER_COLUMNS
    assert len(lines[0].split(",")) == 7
    assert lines[1].split(",")[1] == "0.33333333333333331"


def test_float_formatting_contract():
    assert format_float(1 / 3) == "0.33333333333333331"
    assert float(format_float(np.pi)) == np.pi


def test_extract_command_and_exit_codes(tmp_path, p1_tenth):
    from fracbubbles.bubbles import make_bubble
    from fracbubbles.extraction import planted_trace

    p = p1_tenth
    x = np.linspace(-8.0, 8.0, 8192)
    u = planted_trace(x, [make_bubble(p, center=(0.0,), lam=0.25)], p)
    tr = tmp_path / "trace.csv"
    write_trace_csv(str(tr), x, u, p)
    cfgp = tmp_path / "settings.json"
    cfgp.write_text(json.dumps({"eps_select_fraction": 0.3, "r_select": 0.1,
                                "t0": 0.2, "subtract_radius_factor": 6.0}))
    out = tmp_path / "report.json"
    code = run_cli_lines(["extract", "--input", str(tr), "--config", str(cfgp),
                          "--out", str(out)])
    assert code == 0  # compact residual
    doc = json.loads(out.read_text())
    assert doc["m"] == 1
    assert doc["halt_reason"] == "compact residual"

    # budget exhausted -> exit 2
    cfg2 = tmp_path / "settings2.json"
    cfg2.write_text(json.dumps({"eps_select_fraction": 0.3, "r_select": 0.1,
                                "t0": 0.2, "subtract_radius_factor": 6.0,
                                "stop_fraction": 1e-6, "m_max": 1}))
    code2 = run_cli_lines(["extract", "--input", str(tr), "--config", str(cfg2),
                          "--out", str(tmp_path / "r2.json")])
    assert code2 == 2


def test_extract_unknown_setting_names_key(tmp_path, p1_tenth, capsys):
    from fracbubbles.bubbles import make_bubble
    from fracbubbles.extraction import planted_trace

    p = p1_tenth
    x = np.linspace(-8.0, 8.0, 1024)
    u = planted_trace(x, [make_bubble(p, lam=0.25)], p)
    tr = tmp_path / "trace.csv"
    write_trace_csv(str(tr), x, u, p)
    cfgp = tmp_path / "settings.json"
    cfgp.write_text(json.dumps({"epsilon_sel": 0.3}))
    assert run_cli_lines(["extract", "--input", str(tr),
                          "--config", str(cfgp)]) == 64
    assert "epsilon_sel" in capsys.readouterr().err


def test_synthesize_missing_config_key(tmp_path, capsys):
    cfgp = tmp_path / "bad.json"
    cfgp.write_text(json.dumps({"n": 1, "gamma": 0.25}))
    code = run_cli_lines(["synthesize", "--config", str(cfgp),
                          "--out", str(tmp_path / "o")])
    assert code == 64
    assert "grid" in capsys.readouterr().err


def test_synthesize_outputs_and_determinism(tmp_path, table1_quarter):
    digests = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        code = run_cli_lines(["synthesize", "--config", "shipped:ps_m2_n1",
                              "--out", str(out), "--seed", "3"])
        assert code == 0
        names = sorted(os.listdir(out))
        assert "ledger.csv" in names and "manifest.json" in names
        assert sum(1 for nm in names if nm.startswith("field_alpha")) == 4
        h = hashlib.sha256()
        for nm in names:
            if nm == "manifest.json":  # carries wall time, excluded by contract
                continue
            h.update(nm.encode())
            h.update((out / nm).read_bytes())
        digests.append(h.hexdigest())
    assert digests[0] == digests[1]
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["command"] == "synthesize"
    assert "ledger.csv" in manifest["outputs"]
    assert manifest["seed"] == 3


def test_figures_rendered(tmp_path, table1_quarter, p1_tenth):
    out = tmp_path / "fig"
    code = run_cli_lines(["synthesize", "--config", "shipped:ps_m2_n1",
                          "--out", str(out), "--figures"])
    assert code == 0
    assert (out / "ledger.png").stat().st_size > 1000

    from fracbubbles.bubbles import make_bubble
    from fracbubbles.extraction import planted_trace
    p = p1_tenth
    x = np.linspace(-8.0, 8.0, 4096)
    u = planted_trace(x, [make_bubble(p, lam=0.25)], p)
    tr = tmp_path / "trace.csv"
    write_trace_csv(str(tr), x, u, p)
    rep = tmp_path / "rep.json"
    cfgp = tmp_path / "s.json"
    cfgp.write_text(json.dumps({"eps_select_fraction": 0.3, "r_select": 0.1,
                                "t0": 0.2, "subtract_radius_factor": 6.0}))
    assert run_cli_lines(["extract", "--input", str(tr), "--config", str(cfgp),
                          "--out", str(rep), "--figures"]) == 0
    assert (tmp_path / "rep.png").stat().st_size > 1000


def test_trace_csv_roundtrip(tmp_path, p1_quarter):
    x = np.linspace(-2, 2, 64)
    u = np.sin(x)
    path = tmp_path / "t.csv"
    write_trace_csv(str(path), x, u, p1_quarter)
    params, x2, u2 = read_trace_csv(str(path))
    assert params.n == 1 and params.gamma == 0.25
    np.testing.assert_array_equal(x2, x)
    np.testing.assert_array_equal(u2, u)


def test_unknown_shipped_config(capsys):
    assert run_cli_lines(["synthesize", "--config", "shipped:nope",
                          "--out", "/tmp/x"]) == 64


def test_accept_cli_subset(tmp_path):
    out = tmp_path / "acc"
    code = run_cli_lines(["accept", "--criteria", "1,7", "--out", str(out)])
    assert code == 0
    doc = json.loads((out / "accept_report.json").read_text())
    assert [r["criterion"] for r in doc["results"]] == [1, 7]
    assert all(r["passed"] for r in doc["results"])
    assert run_cli_lines(["accept", "--criteria", "1,99"]) == 64
