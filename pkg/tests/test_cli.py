"""Command-line behaviors: outputs, formats, exit codes, determinism."""

import json
import subprocess
import sys

import pytest

from conftest import GOLDEN_P2_N24_SHOT, GOLDEN_P2_N24_SLOPES
from kspm import cli
from kspm.stabilizer import leftmost_avalanche, stabilize


def run_cli(capsys, *argv):
    rc = cli.main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


# --------------------------------------------------------------- stabilize


def test_stabilize_json_golden(capsys):
    rc, out, err = run_cli(capsys, "stabilize", "--p", "2", "--n", "24")
    assert rc == 0 and err == ""
    doc = json.loads(out)
    assert doc["meta"]["command"] == "stabilize"
    res = doc["result"]
    assert tuple(res["slopes"]) == GOLDEN_P2_N24_SLOPES
    assert tuple(res["shot"]) == GOLDEN_P2_N24_SHOT
    assert res["N"] == 24 and res["p"] == 2
    assert res["w"] == 5
    assert res["n_strict"] == 5
    assert res["uniform_index"] == 5
    assert res["interior_zeros"] == 0
    assert res["ambiguous_count"] == 3
    assert res["strategy"] == "leftmost"


def test_stabilize_output_is_byte_deterministic(capsys):
    a = run_cli(capsys, "stabilize", "--p", "4", "--n", "2000")
    b = run_cli(capsys, "stabilize", "--p", "4", "--n", "2000")
    assert a == b


def test_stabilize_strategies_agree(capsys):
    docs = []
    for strat in ("leftmost", "random", "incremental"):
        rc, out, _ = run_cli(capsys, "stabilize", "--p", "3", "--n", "200", "--strategy", strat)
        assert rc == 0
        docs.append(json.loads(out)["result"])
    assert docs[0]["slopes"] == docs[1]["slopes"] == docs[2]["slopes"]
    assert docs[1]["strategy"] == "random(mt19937:0)"


def test_stabilize_csv_layout(capsys):
    rc, out, _ = run_cli(capsys, "stabilize", "--p", "2", "--n", "24", "--format", "csv")
    assert rc == 0
    lines = out.strip().splitlines()
    assert lines[0] == "field,value"
    fields = dict(line.split(",", 1) for line in lines[1:])
    assert fields["slopes"] == "2 1 2 1 2"
    assert fields["N"] == "24"


def test_stabilize_writes_output_file(tmp_path, capsys):
    path = tmp_path / "out.json"
    rc, out, _ = run_cli(capsys, "stabilize", "--p", "2", "--n", "24", "--output", str(path))
    assert rc == 0
    assert out == ""
    doc = json.loads(path.read_text())
    assert tuple(doc["result"]["slopes"]) == GOLDEN_P2_N24_SLOPES


# -------------------------------------------------------------------- scan


def test_scan_csv_schema(capsys):
    rc, out, _ = run_cli(
        capsys, "scan", "--p", "2", "--n-max", "300", "--stride", "50", "--format", "csv"
    )
    assert rc == 0
    lines = out.strip().splitlines()
    assert lines[0] == (
        "N,p,w,n_strict,n_loose,uniform_index,interior_zeros,"
        "density_column,ambiguous_count,elapsed_us"
    )
    data = [l for l in lines[1:] if not l.startswith("#")]
    assert len(data) == 6
    first = data[0].split(",")
    assert first[0] == "50" and first[1] == "2"
    assert all(row.split(",")[-1] == "0" for row in data)  # no --timing
    comments = [l for l in lines if l.startswith("#")]
    assert any("fit" in c for c in comments)


def test_scan_json_fits_over_two_decades(capsys):
    rc, out, _ = run_cli(capsys, "scan", "--p", "2", "--n-max", "1024", "--stride", "1")
    assert rc == 0
    doc = json.loads(out)["result"]
    assert len(doc["rows"]) == 1024
    fits = doc["fits"]
    assert fits["n_strict"]["ok"] is True
    assert fits["n_strict"]["c"] > 0
    assert fits["density_column"]["ok"] is True  # incremental tracks densities


def test_scan_fit_unavailable_on_narrow_range(capsys):
    rc, out, _ = run_cli(capsys, "scan", "--p", "2", "--n-max", "40", "--stride", "2")
    assert rc == 0
    doc = json.loads(out)["result"]
    assert all(not f["ok"] for f in doc["fits"].values())
    assert all("reason" in f for f in doc["fits"].values())


def test_scan_direct_mode_matches_incremental(capsys):
    rc1, out1, _ = run_cli(capsys, "scan", "--p", "3", "--n-max", "120", "--stride", "30")
    rc2, out2, _ = run_cli(
        capsys, "scan", "--p", "3", "--n-max", "120", "--stride", "30", "--mode", "direct"
    )
    assert rc1 == rc2 == 0
    rows1 = json.loads(out1)["result"]["rows"]
    rows2 = json.loads(out2)["result"]["rows"]
    for a, b in zip(rows1, rows2):
        assert a["w"] == b["w"] and a["n_strict"] == b["n_strict"]
        assert b["density_column"] is None


def test_scan_emit_plot_data(tmp_path, capsys):
    path = tmp_path / "plot.csv"
    rc, _, _ = run_cli(
        capsys,
        "scan", "--p", "2", "--n-max", "100", "--stride", "10",
        "--emit-plot-data", str(path),
    )
    assert rc == 0
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "series,x,y"
    series = {line.split(",")[0] for line in lines[1:]}
    assert series == {"n_strict_vs_log2N", "w_vs_sqrtN"}


# ---------------------------------------------------------------- spectral


def test_spectral_small_range_passes(capsys):
    rc, out, err = run_cli(capsys, "spectral", "--p-max", "6")
    assert rc == 0 and err == ""
    doc = json.loads(out)["result"]
    assert [r["p"] for r in doc["rows"]] == [2, 3, 4, 5, 6]
    assert all(r["ok"] for r in doc["rows"])
    assert all(
        r["max_root_modulus"] <= (r["p"] - 1) / r["p"] + 1e-9 for r in doc["rows"]
    )


def test_spectral_csv(capsys):
    rc, out, _ = run_cli(capsys, "spectral", "--p-min", "2", "--p-max", "3", "--format", "csv")
    assert rc == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("p,")
    assert len(lines) == 3


def test_spectral_impossible_tolerance_fails_gate(capsys):
    rc, out, err = run_cli(capsys, "spectral", "--p-max", "8", "--tol", "1e-30")
    assert rc == 4
    assert "residual" in err or "gate" in err


# --------------------------------------------------------------- avalanche


def test_avalanche_first_grain_is_quiet(capsys):
    rc, out, _ = run_cli(capsys, "avalanche", "--p", "2", "--k", "1")
    assert rc == 0
    res = json.loads(out)["result"]
    assert res["fired"] == []
    assert res["max_fired"] is None
    assert res["density_column"] == 0


def test_avalanche_matches_library(capsys):
    rc, out, _ = run_cli(capsys, "avalanche", "--p", "3", "--k", "12")
    assert rc == 0
    res = json.loads(out)["result"]
    want = leftmost_avalanche(stabilize(3, 11))
    assert tuple(res["fired"]) == want.fired
    assert res["max_fired"] == want.max_fired
    assert res["k"] == 12


# ------------------------------------------------------------------ verify


@pytest.mark.parametrize("p,n", [(2, 24), (1, 7), (4, 500)])
def test_verify_clean_piles(p, n, capsys):
    rc, out, err = run_cli(capsys, "verify", "--p", str(p), "--n", str(n))
    assert rc == 0 and err == ""
    doc = json.loads(out)["result"]
    assert doc["ok"] is True
    names = {c["name"] for c in doc["checks"]}
    assert "strategy_independence" in names
    assert "centered_recurrence" in names
    assert all(c["ok"] for c in doc["checks"])


def test_verify_reports_first_violation(monkeypatch, capsys):
    def fake_checks(p, n, seed):
        return [
            {"name": "alpha", "ok": True},
            {"name": "middle", "ok": False},
            {"name": "gamma", "ok": True},
        ]

    monkeypatch.setattr(cli, "_verification_checks", fake_checks)
    rc, out, err = run_cli(capsys, "verify", "--p", "2", "--n", "10")
    assert rc == 5
    assert "middle" in err


# --------------------------------------------------------- usage and limits


@pytest.mark.parametrize(
    "argv",
    [
        ["stabilize", "--p", "0", "--n", "5"],
        ["stabilize", "--p", "2", "--n", "-1"],
        ["scan", "--p", "2", "--n-max", "10", "--stride", "11"],
        ["scan", "--p", "2", "--n-max", "0"],
        ["scan", "--p", "2", "--n-max", "10", "--threads", "0"],
        ["spectral", "--p-max", "1", "--p-min", "2"],
        ["spectral", "--p-max", "4", "--tol", "0"],
        ["avalanche", "--p", "2", "--k", "0"],
        ["frobnicate"],
        [],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2
    capsys.readouterr()


def test_capacity_limit_exit_3(capsys):
    rc, _, err = run_cli(capsys, "stabilize", "--p", "2", "--n", str(2**62 + 1))
    assert rc == 3
    assert "resource limit" in err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "kspm" in capsys.readouterr().out


def test_module_entrypoint_smoke():
    proc = subprocess.run(
        [sys.executable, "-m", "kspm", "stabilize", "--p", "2", "--n", "24"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
    assert tuple(json.loads(proc.stdout)["result"]["slopes"]) == GOLDEN_P2_N24_SLOPES
