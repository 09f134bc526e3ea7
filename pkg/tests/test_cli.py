import json
import os
import subprocess
import sys

import numpy as np
import pytest

from rcxi import read_report, read_trace
from rcxi.cli import main


def run_cli(args, cwd) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "rcxi.cli", *args],
        cwd=cwd,
        capture_output=True,
        text=True,
    )


def test_simulate_rerun_is_byte_identical(tmp_path):
    argv = ["simulate", "--family", "affine", "--dim", "8", "--lipschitz", "0.7",
            "--noise-sigma", "0.05", "--steps", "5000", "--seed", "42"]
    assert main(argv + ["--out", str(tmp_path / "a.trace")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b.trace")]) == 0
    assert (tmp_path / "a.trace").read_bytes() == (tmp_path / "b.trace").read_bytes()


def test_simulate_writes_config_into_the_trace(tmp_path):
    out = tmp_path / "t.trace"
    assert main(["simulate", "--family", "rotation-contraction", "--dim", "2", "--rho", "0.9",
                 "--theta", "0.5", "--steps", "100", "--seed", "1", "--out", str(out)]) == 0
    traj = read_trace(out)
    assert traj.map_spec.family == "rotation-contraction"
    assert traj.map_spec.rho == 0.9
    assert traj.noise_spec.sigma == 0.0
    assert traj.seed == 1


def test_analyze_contractive_trace_converges(tmp_path):
    trace = tmp_path / "t.trace"
    out = tmp_path / "run1"
    assert main(["simulate", "--family", "affine", "--dim", "4", "--lipschitz", "0.6",
                 "--offset", "0.2", "--noise-sigma", "0.05", "--steps", "4000",
                 "--seed", "0", "--out", str(trace)]) == 0
    assert main(["analyze", str(trace), "--burn-in", "400", "--window", "800",
                 "--permutations", "200", "--out-dir", str(out)]) == 0
    data = read_report(out / "report.json")
    assert data["convergence"]["status"] == "ok"
    assert data["convergence"]["converged"] is True
    assert data["moment_bound"]["satisfied"] is True
    assert data["lipschitz"]["l_hat"] == pytest.approx(0.6, abs=0.01)
    assert data["config"]["burn_in"] == 400
    assert (out / "fig_xi.svg").exists() and (out / "fig_pca.svg").exists()


def test_analyze_missing_trace_exits_one(tmp_path, capsys):
    code = main(["analyze", str(tmp_path / "nope.trace"), "--out-dir", str(tmp_path / "o")])
    assert code == 1
    assert "nope.trace" in capsys.readouterr().err


def test_validate_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.trace"
    main(["simulate", "--family", "affine", "--dim", "1", "--steps", "5", "--out", str(good)])
    assert main(["validate", str(good)]) == 0
    bad = tmp_path / "bad.trace"
    bad.write_text('{"format_version": 1, "dim": 2, "source": "simulated"}\n'
                   '{"step": 0, "state": [0.0], "input_id": -1}\n', encoding="utf-8")
    assert main(["validate", str(bad)]) == 1
    assert "state" in capsys.readouterr().err


def test_usage_errors_exit_two(tmp_path):
    proc = run_cli(["--definitely-not-a-flag"], cwd=tmp_path)
    assert proc.returncode == 2
    assert "usage" in proc.stderr.lower()
    proc = run_cli(["simulate", "--family", "affine"], cwd=tmp_path)  # missing required
    assert proc.returncode == 2


def test_help_lists_all_subcommands(tmp_path):
    proc = run_cli(["--help"], cwd=tmp_path)
    assert proc.returncode == 0
    for cmd in ("simulate", "analyze", "glyph", "validate", "demo"):
        assert cmd in proc.stdout


def test_glyph_command_outputs_anchor_report(tmp_path):
    trace = tmp_path / "t.trace"
    main(["simulate", "--family", "rotation-contraction", "--dim", "8", "--noise-sigma", "0.01",
          "--steps", "1000", "--seed", "3", "--out", str(trace)])
    from rcxi import make_gaussian_vocab, write_vocab

    write_vocab(make_gaussian_vocab(128, 8, seed=0), tmp_path / "v.jsonl")
    out = tmp_path / "anchor.json"
    assert main(["glyph", str(trace), "--vocab", str(tmp_path / "v.jsonl"), "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert isinstance(payload["anchored"], bool)
    assert payload["nearest_distance"] > 0
    assert len(payload["glyph"]) == 8


def test_json_logs_are_machine_readable(tmp_path):
    proc = run_cli(["--json-logs", "simulate", "--family", "affine", "--dim", "1",
                    "--steps", "10", "--out", "t.trace"], cwd=tmp_path)
    assert proc.returncode == 0
    events = [json.loads(line) for line in proc.stdout.splitlines() if line.strip()]
    assert any(e["event"] == "trace_written" for e in events)


def test_demo_report_reproduces_byte_identically(tmp_path):
    first = run_cli(["demo", "--out-dir", "demo", "--steps", "1500"], cwd=tmp_path)
    assert first.returncode == 0
    report_bytes = (tmp_path / "demo" / "report.json").read_bytes()
    fig_bytes = (tmp_path / "demo" / "fig_pca.svg").read_bytes()
    second = run_cli(["demo", "--out-dir", "demo", "--steps", "1500"], cwd=tmp_path)
    assert second.returncode == 0
    assert (tmp_path / "demo" / "report.json").read_bytes() == report_bytes
    assert (tmp_path / "demo" / "fig_pca.svg").read_bytes() == fig_bytes
    data = read_report(tmp_path / "demo" / "report.json")
    assert data["torus_score"]["score"] >= 0.8
    assert data["anchor"]["status"] == "ok"


def test_threads_env_fallback(tmp_path):
    env = dict(os.environ, RCXI_THREADS="3")
    proc = subprocess.run(
        [sys.executable, "-m", "rcxi.cli", "simulate", "--family", "affine", "--dim", "1",
         "--steps", "5", "--out", "t.trace"],
        cwd=tmp_path, env=env, capture_output=True, text=True,
    )
    assert proc.returncode == 0


def test_analyze_short_extracted_trace_degrades_gracefully(tmp_path):
    # a 7-record extracted-style trace still analyzes end to end
    lines = ['{"format_version": 1, "dim": 3, "source": "extracted", "model_id": "m"}']
    rng = np.random.default_rng(0)
    for k in range(7):
        state = ", ".join(repr(float(v)) for v in rng.normal(size=3))
        lines.append(f'{{"step": {k}, "state": [{state}], "input_id": {k}}}')
    trace = tmp_path / "e.trace"
    trace.write_text("\n".join(lines) + "\n", encoding="utf-8")
    assert main(["validate", str(trace)]) == 0
    out = tmp_path / "out"
    assert main(["analyze", str(trace), "--out-dir", str(out)]) == 0
    data = read_report(out / "report.json")
    assert data["tension"]["status"] == "ok"
    assert data["convergence"]["status"] == "skipped"
    assert data["lipschitz"]["status"] == "skipped"
    assert (out / "fig_xi.svg").exists()
