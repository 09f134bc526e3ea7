"""Command-line entry point: simulate, analyze, glyph, validate, demo.

Exit codes: 0 success, 1 operational failure (missing file, invalid trace,
diverging run), 2 usage error. Every artifact embeds its resolved config,
so re-running a command with the same flags reproduces it byte-for-byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .dynamics import MapSpec, NoiseSpec, SymbolicInput, simulate
from .glyph import collapse_check, default_delta, encode_glyph, make_gaussian_vocab
from .pipeline import AnalysisConfig, analyze_trajectory
from .tension import tension_series
from .traceio import emit_report, read_trace, read_vocab, validate_trace, write_trace, write_vocab

DEMO_SEED = 7
DEMO_STEPS = 4000


class _Logger:
    def __init__(self, json_logs: bool):
        self.json_logs = json_logs

    def event(self, name: str, **fields) -> None:
        if self.json_logs:
            print(json.dumps({"event": name, **fields}, sort_keys=True), flush=True)
        else:
            detail = " ".join(f"{k}={v}" for k, v in fields.items())
            print(f"[{name}] {detail}".rstrip(), flush=True)


def _parse_vector(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip() != ""]


def _parse_input_offset(text: str) -> tuple[int, list[float]]:
    if ":" not in text:
        raise argparse.ArgumentTypeError(f"expected ID:v1,v2,... got {text!r}")
    head, tail = text.split(":", 1)
    return int(head), _parse_vector(tail)


def _parse_basin(text: str) -> tuple[float, list[float]]:
    if ":" not in text:
        raise argparse.ArgumentTypeError(f"expected FACTOR:v1,v2,... got {text!r}")
    head, tail = text.split(":", 1)
    return float(head), _parse_vector(tail)


def _threads_default() -> int:
    env = os.environ.get("RCXI_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcxi",
        description="Simulate recursive state updates and certify their convergence, "
        "attractor geometry, tension bounds, and glyph anchoring.",
    )
    parser.add_argument("--json-logs", action="store_true", help="emit machine-readable progress events")
    parser.add_argument("--threads", type=int, default=_threads_default(),
                        help="cap internal parallelism (default: RCXI_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a seeded simulation and write a trace file")
    sim.add_argument("--family", required=True, choices=["affine", "rotation-contraction", "delayed-contraction", "multi-basin"])
    sim.add_argument("--dim", type=int, required=True, help="state dimension")
    sim.add_argument("--steps", type=int, required=True, help="number of update steps")
    sim.add_argument("--seed", type=int, default=0, help="simulation seed (default 0)")
    sim.add_argument("--out", required=True, help="output trace path")
    sim.add_argument("--lipschitz", type=float, default=0.5, help="affine/delayed contraction factor (default 0.5)")
    sim.add_argument("--offset", type=_parse_vector, default=[0.0], help="offset vector, comma-separated (default 0)")
    sim.add_argument("--input-offset", type=_parse_input_offset, action="append", default=[],
                     metavar="ID:V1,V2,...", help="affine per-input offset (repeatable)")
    sim.add_argument("--rho", type=float, default=0.98, help="rotation-contraction radial factor (default 0.98)")
    sim.add_argument("--theta", type=float, default=0.7, help="rotation-contraction angle step (default 0.7)")
    sim.add_argument("--cycle-radius", type=float, default=1.0, help="rotation-contraction limit-cycle radius (default 1.0)")
    sim.add_argument("--onset", type=int, default=200, help="delayed-contraction onset step (default 200)")
    sim.add_argument("--pre-factor", type=float, default=1.1, help="delayed-contraction pre-onset factor (default 1.1)")
    sim.add_argument("--cuts", type=_parse_vector, default=[0.0], help="multi-basin cut points (default 0)")
    sim.add_argument("--basin", type=_parse_basin, action="append", default=[],
                     metavar="FACTOR:V1,V2,...", help="multi-basin factor and offset (repeat per basin)")
    sim.add_argument("--selector-axis", type=int, default=0, help="multi-basin selector coordinate (default 0)")
    sim.add_argument("--noise", choices=["none", "gaussian-iid", "uniform-iid"], default="gaussian-iid",
                     help="noise kind (default gaussian-iid)")
    sim.add_argument("--noise-sigma", type=float, default=0.0, help="per-coordinate noise scale (default 0)")
    sim.add_argument("--input-ids", type=str, default="0", help="cyclic input id schedule, comma-separated (default '0')")
    sim.add_argument("--input-texts", type=str, default=None, help="optional labels matching --input-ids")

    ana = sub.add_parser("analyze", help="run every certificate on a trace and emit report + figures")
    ana.add_argument("trace", help="input trace file")
    ana.add_argument("--out-dir", required=True, help="output directory for report.json, CSVs, figures")
    ana.add_argument("--burn-in", type=int, default=None, help="states to discard (default 10%%)")
    ana.add_argument("--window", type=int, default=None, help="convergence window size (default 20%%)")
    ana.add_argument("--alpha", type=float, default=0.05, help="convergence test level (default 0.05)")
    ana.add_argument("--permutations", type=int, default=500, help="permutation count (default 500)")
    ana.add_argument("--max-points", type=int, default=512, help="max strided points per window (default 512)")
    ana.add_argument("--k-max", type=int, default=8, help="max clusters considered (default 8)")
    ana.add_argument("--probes", type=int, default=8, help="contraction probes (default 8)")
    ana.add_argument("--perturbation", type=float, default=1e-3, help="probe perturbation size (default 1e-3)")
    ana.add_argument("--lipschitz-steps", type=int, default=400, help="probe run length (default 400)")
    ana.add_argument("--no-lipschitz", action="store_true", help="skip contraction probing")
    ana.add_argument("--encoder-window", type=int, default=256, help="glyph window (default 256)")
    ana.add_argument("--encoder-seed", type=int, default=0, help="glyph projection seed (default 0)")
    ana.add_argument("--persist-threshold-pct", type=float, default=10.0,
                     help="tension persistence threshold percentile (default 10)")
    ana.add_argument("--persist-min-run", type=int, default=50, help="persistence run length (default 50)")
    ana.add_argument("--bound", type=float, default=None,
                     help="second-moment bound (default: 2x affine closed form, else 90th pct)")
    ana.add_argument("--moment-window", type=int, default=None, help="moment window (default: all post-burn-in)")
    ana.add_argument("--vocab", default=None, help="vocab file for the anchoring check")
    ana.add_argument("--delta", type=float, default=None, help="separation threshold (default: 5th pct pairwise)")
    ana.add_argument("--seed", type=int, default=0, help="analysis seed (default 0)")

    gly = sub.add_parser("glyph", help="encode a glyph from a trace and check anchoring against a vocab")
    gly.add_argument("trace", help="input trace file")
    gly.add_argument("--vocab", required=True, help="vocab file")
    gly.add_argument("--delta", type=float, default=None, help="separation threshold (default: 5th pct pairwise)")
    gly.add_argument("--window", type=int, default=256, help="glyph window (default 256, clamped to trace)")
    gly.add_argument("--encoder-seed", type=int, default=0, help="glyph projection seed (default 0)")
    gly.add_argument("--out", default=None, help="optional path for the anchor report JSON")

    val = sub.add_parser("validate", help="check a trace file against the format invariants")
    val.add_argument("trace", help="input trace file")

    demo = sub.add_parser("demo", help="one-command end-to-end run on a rotation-contraction trace")
    demo.add_argument("--out-dir", required=True, help="output directory")
    demo.add_argument("--seed", type=int, default=DEMO_SEED, help=f"simulation seed (default {DEMO_SEED})")
    demo.add_argument("--steps", type=int, default=DEMO_STEPS, help=f"steps (default {DEMO_STEPS})")
    return parser


def _cmd_simulate(args, log: _Logger) -> int:
    family = args.family
    if family == "affine":
        spec = MapSpec.affine(args.dim, args.lipschitz, args.offset if len(args.offset) > 1 else args.offset[0],
                              dict(args.input_offset) or None)
    elif family == "rotation-contraction":
        spec = MapSpec.rotation_contraction(args.dim, args.rho, args.theta, args.cycle_radius)
    elif family == "delayed-contraction":
        spec = MapSpec.delayed_contraction(args.dim, args.onset, args.pre_factor, args.lipschitz,
                                           args.offset if len(args.offset) > 1 else args.offset[0])
    else:
        basins = args.basin or [(0.5, [-2.0]), (0.5, [2.0])]
        spec = MapSpec.multi_basin(args.dim, args.cuts, [f for f, _ in basins],
                                   [o if len(o) > 1 else o[0] for _, o in basins], args.selector_axis)
    noise = NoiseSpec(kind=args.noise, sigma=args.noise_sigma)
    ids = [int(v) for v in args.input_ids.split(",") if v.strip() != ""]
    texts = args.input_texts.split(",") if args.input_texts else None
    if texts is not None and len(texts) != len(ids):
        print("error: --input-texts must match --input-ids in length", file=sys.stderr)
        return 2
    inputs = [SymbolicInput(i, texts[k] if texts else None) for k, i in enumerate(ids)]
    trajectory = simulate(spec, noise, inputs, steps=args.steps, seed=args.seed)
    write_trace(trajectory, args.out)
    log.event("trace_written", path=str(args.out), steps=args.steps, dim=args.dim, seed=args.seed)
    return 0


def _cmd_analyze(args, log: _Logger) -> int:
    trajectory = read_trace(args.trace)
    log.event("trace_loaded", path=str(args.trace), states=trajectory.states.shape[0], dim=trajectory.dim)
    vocab = read_vocab(args.vocab) if args.vocab else None
    cfg = AnalysisConfig(
        burn_in=args.burn_in,
        window=args.window,
        alpha=args.alpha,
        permutations=args.permutations,
        max_points=args.max_points,
        k_max=args.k_max,
        run_lipschitz=not args.no_lipschitz,
        lipschitz_steps=args.lipschitz_steps,
        probes=args.probes,
        perturbation=args.perturbation,
        encoder_window=args.encoder_window,
        encoder_seed=args.encoder_seed,
        persistence_percentile=args.persist_threshold_pct,
        persistence_min_run=args.persist_min_run,
        bound=args.bound,
        moment_window=args.moment_window,
        delta=args.delta,
        seed=args.seed,
        threads=args.threads,
    )
    report = analyze_trajectory(trajectory, cfg, vocab=vocab)
    report.data["source"]["path"] = str(args.trace)
    paths = emit_report(report, args.out_dir)
    log.event("report_written", **{k: str(v) for k, v in paths.items()})
    return 0


def _cmd_glyph(args, log: _Logger) -> int:
    trajectory = read_trace(args.trace)
    vocab = read_vocab(args.vocab)
    trace = tension_series(trajectory)
    window = min(args.window, trace.values.size)
    delta = args.delta if args.delta is not None else default_delta(vocab)
    glyph = encode_glyph(trajectory, trace, window=window, encoder_seed=args.encoder_seed)
    last_id = trajectory.inputs[-1].id if trajectory.inputs else None
    report = collapse_check(glyph, vocab, delta, current_input_id=last_id)
    payload = {
        "anchored": report.anchored,
        "nearest_id": report.nearest_id,
        "nearest_distance": report.nearest_distance,
        "delta": report.delta,
        "input_distance": report.input_distance,
        "window": window,
        "encoder_seed": args.encoder_seed,
        "glyph": [float(v) for v in glyph.vector],
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        log.event("anchor_written", path=str(args.out), anchored=report.anchored)
    else:
        print(text)
    return 0


def _cmd_validate(args, log: _Logger) -> int:
    violations = validate_trace(args.trace)
    if not violations:
        log.event("trace_valid", path=str(args.trace))
        return 0
    for v in violations:
        print(str(v), file=sys.stderr)
    log.event("trace_invalid", path=str(args.trace), violations=len(violations))
    return 1


def _cmd_demo(args, log: _Logger) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dim = 8
    spec = MapSpec.rotation_contraction(dim, rho=0.98, theta=0.7, cycle_radius=1.0)
    noise = NoiseSpec("gaussian-iid", 0.01)
    trajectory = simulate(spec, noise, [0], steps=args.steps, seed=args.seed)
    trace_path = out_dir / "demo.trace"
    write_trace(trajectory, trace_path)
    log.event("trace_written", path=str(trace_path), steps=args.steps, seed=args.seed)
    vocab = make_gaussian_vocab(256, dim, seed=0)
    vocab_path = out_dir / "vocab.jsonl"
    write_vocab(vocab, vocab_path)
    cfg = AnalysisConfig(threads=args.threads)
    report = analyze_trajectory(trajectory, cfg, vocab=vocab)
    report.data["source"]["path"] = str(trace_path)
    paths = emit_report(report, out_dir)
    log.event("report_written", **{k: str(v) for k, v in paths.items()})
    score = report.data["torus_score"]
    log.event("demo_done", torus_score=score.get("score"), all_checks_passed=report.data["verdict"]["all_checks_passed"])
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.threads = max(1, args.threads)
    log = _Logger(args.json_logs)
    handlers = {
        "simulate": _cmd_simulate,
        "analyze": _cmd_analyze,
        "glyph": _cmd_glyph,
        "validate": _cmd_validate,
        "demo": _cmd_demo,
    }
    try:
        return handlers[args.command](args, log)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 1
    except (ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
