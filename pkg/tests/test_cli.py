"""Command-line interface: exit codes, artifacts, manifests, determinism."""

import csv
import hashlib
import json
import subprocess
import sys

import pytest

from stein_ising import __version__
from stein_ising.cli import main


def run_cli(*argv):
    return main(list(argv))


# -- global behavior ---------------------------------------------------------------


def test_no_subcommand_is_a_usage_error(capsys):
    assert run_cli() == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_subcommand_is_a_usage_error(capsys):
    assert run_cli("frobnicate") == 2


def test_version_flag(capsys):
    code = run_cli("--version")
    assert code == 0
    assert __version__ in capsys.readouterr().out


def test_console_script_is_installed():
    proc = subprocess.run(["stein-ising", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert __version__ in proc.stdout


# -- gen-graph ----------------------------------------------------------------------


def test_gen_graph_writes_edge_list(tmp_path, capsys):
    code = run_cli("gen-graph", "--n", "32", "--d", "4", "--seed", "3",
                   "--out-dir", str(tmp_path))
    assert code == 0
    out = capsys.readouterr().out
    assert "wrote" in out
    path = tmp_path / "graph-regular-n32-d4.txt"
    assert path.exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "gen-graph"
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    assert manifest["outputs"][path.name] == digest


def test_gen_graph_parity_obstruction_message(tmp_path, capsys):
    code = run_cli("gen-graph", "--n", "7", "--d", "3",
                   "--out-dir", str(tmp_path))
    assert code == 2
    err = capsys.readouterr().err
    assert "parity" in err
    assert "7-regular" not in err  # the message names d, not n


def test_gen_graph_cliques_divisibility(tmp_path, capsys):
    code = run_cli("gen-graph", "--graph-type", "cliques", "--n", "10",
                   "--d", "4", "--out-dir", str(tmp_path))
    assert code == 2
    assert "error:" in capsys.readouterr().err


# -- spectral -----------------------------------------------------------------------


def test_spectral_on_generated_graph(tmp_path, capsys):
    code = run_cli("spectral", "--n", "64", "--d", "6", "--seed", "9",
                   "--out-dir", str(tmp_path))
    assert code == 0
    payload = json.loads((tmp_path / "spectral.json").read_text())
    assert payload["n"] == 64
    assert payload["degree"] == 6
    assert 0.0 < payload["epsilon"] < 1.0
    assert payload["is_connected"] is True


def test_spectral_on_loaded_graph(tmp_path):
    assert run_cli("gen-graph", "--n", "24", "--d", "4", "--seed", "2",
                   "--out-dir", str(tmp_path)) == 0
    graph_file = tmp_path / "graph-regular-n24-d4.txt"
    out2 = tmp_path / "loaded"
    code = run_cli("spectral", "--graph", str(graph_file),
                   "--out-dir", str(out2))
    assert code == 0
    payload = json.loads((out2 / "spectral.json").read_text())
    assert payload["n"] == 24


def test_spectral_missing_file_is_reported(tmp_path, capsys):
    code = run_cli("spectral", "--graph", str(tmp_path / "nope.txt"),
                   "--out-dir", str(tmp_path))
    assert code == 2
    assert "error:" in capsys.readouterr().err


# -- verify -------------------------------------------------------------------------


def test_verify_battery_passes_and_streams_records(tmp_path, capsys):
    code = run_cli("verify", "--n", "5", "--trials", "3", "--seed", "7",
                   "--out-dir", str(tmp_path))
    assert code == 0
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.strip()]
    records = [json.loads(ln) for ln in lines]
    assert len(records) == 3 * 3 + 7
    assert all(rec["pass"] is True for rec in records)
    saved = json.loads((tmp_path / "verify.json").read_text())
    assert len(saved) == len(records)


# -- sample -------------------------------------------------------------------------


def test_sample_complete_graph_histogram(tmp_path):
    code = run_cli("sample", "--n", "32", "--beta", "1.2", "--samples", "2000",
                   "--sampler", "restricted", "--seed", "4",
                   "--out-dir", str(tmp_path))
    assert code == 0
    # one histogram row per occupied magnetization lattice value
    with open(tmp_path / "magnetization.csv") as fh:
        rows = list(csv.DictReader(fh))
    values = [float(r["m"]) for r in rows]
    masses = [float(r["value"]) for r in rows]
    assert all(-1.0 <= v <= 1.0 for v in values)
    assert all(v >= 0.0 for v in values)  # restricted half space
    assert sum(masses) == pytest.approx(1.0)
    summary = json.loads((tmp_path / "magnetization.json").read_text())
    assert summary["samples"] == 2000
    assert "m_star" in summary
    assert "outlier_fraction_0.15" in summary


def test_sample_on_regular_graph(tmp_path):
    code = run_cli("sample", "--n", "32", "--d", "4", "--beta", "0.5",
                   "--samples", "500", "--seed", "4",
                   "--out-dir", str(tmp_path))
    assert code == 0
    summary = json.loads((tmp_path / "magnetization.json").read_text())
    # subcritical: no fixed-point fields in the summary
    assert "m_star" not in summary
    assert abs(summary["mean"]) < 0.3


# -- couple -------------------------------------------------------------------------


def test_couple_reports_coalescence(tmp_path):
    code = run_cli("couple", "--n", "16", "--beta", "1.2", "--pairs", "50",
                   "--seed", "6", "--out-dir", str(tmp_path))
    assert code == 0
    with open(tmp_path / "coalescence.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 50
    summary = json.loads((tmp_path / "coalescence.json").read_text())
    assert summary["coalesced_fraction"] == 1.0
    assert summary["median_updates"] > 0


# -- birthdeath ---------------------------------------------------------------------


def test_birthdeath_agreement(tmp_path, capsys):
    code = run_cli("birthdeath", "--r", "5", "--alpha", "0.8", "--start", "2",
                   "--runs", "20000", "--seed", "3", "--out-dir", str(tmp_path))
    assert code == 0
    lines = [json.loads(ln) for ln in capsys.readouterr().out.splitlines()
             if ln.strip().startswith("{")]
    names = {rec["check_name"] for rec in lines}
    assert "birth_death_ruin" in names
    assert any(name.startswith("birth_death_tail_K") for name in names)
    assert all(rec["pass"] for rec in lines)


def test_birthdeath_rejects_bad_alpha(tmp_path, capsys):
    code = run_cli("birthdeath", "--r", "5", "--alpha", "1.5",
                   "--out-dir", str(tmp_path))
    assert code == 2
    assert "error:" in capsys.readouterr().err


# -- experiment ---------------------------------------------------------------------


def test_experiment_subcommand_runs_and_reports(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 64\nsamples = 20000\nn_exact = 6\nseed = 5\n")
    out_dir = tmp_path / "out"
    code = run_cli("experiment", "dobrushin", "--config", str(cfg),
                   "--out-dir", str(out_dir))
    assert code == 0
    out = capsys.readouterr().out
    assert "[pass]" in out or "pass" in out
    assert (out_dir / "dobrushin.csv").exists()
    verdicts = json.loads((out_dir / "dobrushin.verdicts.json").read_text())
    assert verdicts["passed"] is True
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["config"]["experiment"]["n"] == 64
    assert "dobrushin.csv" in manifest["outputs"]


def test_experiment_seed_flag_overrides_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 64\nsamples = 20000\nn_exact = 6\nseed = 5\n")
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert run_cli("experiment", "dobrushin", "--config", str(cfg),
                   "--seed", "99", "--out-dir", str(out_a)) == 0
    assert run_cli("experiment", "dobrushin", "--config", str(cfg),
                   "--out-dir", str(out_b)) == 0
    payload_a = json.loads((out_a / "dobrushin.verdicts.json").read_text())
    payload_b = json.loads((out_b / "dobrushin.verdicts.json").read_text())
    assert payload_a["config"]["seed"] == 99
    assert payload_b["config"]["seed"] == 5


def test_experiment_outputs_byte_identical_across_runs(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 64\nsamples = 20000\nn_exact = 6\nseed = 5\n")
    digests = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert run_cli("experiment", "dobrushin", "--config", str(cfg),
                       "--out-dir", str(out)) == 0
        digests.append((
            hashlib.sha256((out / "dobrushin.csv").read_bytes()).hexdigest(),
            hashlib.sha256(
                (out / "dobrushin.verdicts.json").read_bytes()).hexdigest(),
        ))
    assert digests[0] == digests[1]


def test_experiment_unknown_name_is_usage_error(tmp_path, capsys):
    code = run_cli("experiment", "unheard-of", "--out-dir", str(tmp_path))
    assert code == 2


def test_experiment_failing_verdict_exits_one(tmp_path, capsys):
    # desk-scale concentration keeps the strict outlier threshold, which
    # only holds asymptotically -- the run completes but reports failure
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "n = 100\nd_list = 20\nsamples = 20000\nclique_size = 20\nseed = 5\n"
    )
    out_dir = tmp_path / "out"
    code = run_cli("experiment", "concentration", "--config", str(cfg),
                   "--out-dir", str(out_dir))
    assert code == 1
    assert "FAIL" in capsys.readouterr().out
    verdicts = json.loads((out_dir / "dobrushin.verdicts.json").read_text()) \
        if (out_dir / "dobrushin.verdicts.json").exists() else \
        json.loads((out_dir / "concentration.verdicts.json").read_text())
    assert verdicts["passed"] is False
