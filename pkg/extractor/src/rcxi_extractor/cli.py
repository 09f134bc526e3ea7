"""Command line for extraction runs: a protocol config in, a trace file out."""

from __future__ import annotations

import argparse
import json
import sys

from .extract import extract_trace
from .models import ContextOverflowError, ModelLoadError
from .protocol import ProtocolSpec, load_protocol


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcxi-extract",
        description="Run a multi-turn recursive-prompt protocol against a model "
        "and write its per-turn hidden states as a trace file.",
    )
    parser.add_argument("--config", help="protocol JSON (fields mirror ProtocolSpec)")
    parser.add_argument("--model-id", default=None, help="override the config's model id")
    parser.add_argument("--turns", type=int, default=None, help="override the config's turn count")
    parser.add_argument("--layer", type=int, default=None, help="override the captured layer")
    parser.add_argument("--pooling", choices=["last-token", "mean-over-tokens"], default=None)
    parser.add_argument("--out", required=True, help="output trace path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_protocol(args.config) if args.config else ProtocolSpec()
        overrides = {
            key: value
            for key, value in (
                ("model_id", args.model_id),
                ("turns", args.turns),
                ("layer", args.layer),
                ("pooling", args.pooling),
            )
            if value is not None
        }
        if overrides:
            from dataclasses import replace

            spec = replace(spec, **overrides)
        result = extract_trace(spec, args.out)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 1
    except (ModelLoadError, ContextOverflowError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    payload = {
        "trace": result.path,
        "dim": result.dim,
        "turns_completed": result.turns_completed,
        "turns_requested": result.turns_requested,
        "overflow_turn": result.overflow_turn,
        "model_id": result.model_id,
    }
    print(json.dumps(payload, sort_keys=True))
    if result.overflow_turn is not None:
        print(
            f"warning: context overflow at turn {result.overflow_turn}; "
            f"wrote {result.turns_completed} of {result.turns_requested} turns",
            file=sys.stderr,
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
