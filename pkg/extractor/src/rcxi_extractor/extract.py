"""Run the recursive-prompt protocol against a backend and write the trace.

The trace file follows the analyzer's documented format: one header line
(`format_version`, `dim`, `source`, `model_id`), then one record per turn
pairing the pooled hidden state with the turn index as `input_id`. Reals
serialize as shortest round-trip decimals, so identical (protocol, model)
runs under greedy decoding produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import ContextOverflowError, load_backend
from .protocol import ProtocolSpec

FORMAT_VERSION = 1
INPUT_TEXT_LIMIT = 200


@dataclass(frozen=True)
class ExtractionResult:
    path: str
    dim: int
    turns_requested: int
    turns_completed: int
    overflow_turn: int | None
    model_id: str


def _pool(stack, layer: int, pooling: str) -> np.ndarray:
    try:
        hidden = stack[layer]
    except IndexError as exc:
        raise ValueError(f"layer {layer} out of range for a stack of {len(stack)}") from exc
    if pooling == "last-token":
        vec = hidden[-1]
    else:
        vec = hidden.mean(axis=0)
    return np.asarray(vec, dtype=np.float64)


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, allow_nan=False, separators=(", ", ": ")) + "\n"


def write_trace_records(path, dim: int, model_id: str, states: list[np.ndarray], prompts: list[str]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            _dump_line(
                {
                    "format_version": FORMAT_VERSION,
                    "dim": dim,
                    "source": "extracted",
                    "model_id": model_id,
                }
            )
        )
        for turn, (state, prompt) in enumerate(zip(states, prompts)):
            fh.write(
                _dump_line(
                    {
                        "step": turn,
                        "state": [float(v) for v in state],
                        "input_id": turn,
                        "input_text": prompt[:INPUT_TEXT_LIMIT],
                    }
                )
            )


def extract_trace(protocol: ProtocolSpec, out_path, backend=None) -> ExtractionResult:
    """Drive the multi-turn protocol and write one record per completed turn.

    Turn 0 sends the seed prompt; each later turn folds the previous reply
    through the recursion template. The pooled hidden state is captured
    after the turn's full context (prompt plus reply) has been processed.
    A context-length overflow ends the run early with a valid partial
    file, provided at least one turn completed.
    """
    backend = backend or load_backend(protocol.model_id)
    states: list[np.ndarray] = []
    prompts: list[str] = []
    overflow_turn: int | None = None
    context = ""
    reply = ""
    for turn in range(protocol.turns):
        prompt = protocol.seed_prompt if turn == 0 else protocol.recursion_template.format(reply=reply)
        attempt = prompt if turn == 0 else f"{context}\n{prompt}"
        needed = backend.count_tokens(attempt) + protocol.max_new_tokens
        if needed > backend.max_context:
            overflow_turn = turn
            break
        try:
            reply = backend.generate_reply(attempt, protocol.max_new_tokens)
            context = f"{attempt}\n{reply}" if reply else attempt
            stack = backend.hidden_stack(context)
        except ContextOverflowError as exc:
            overflow_turn = turn if exc.turn < 0 else exc.turn
            break
        states.append(_pool(stack, protocol.layer, protocol.pooling))
        prompts.append(prompt)
    if not states:
        raise ContextOverflowError(0, backend.count_tokens(protocol.seed_prompt), backend.max_context)
    dim = int(states[0].size)
    write_trace_records(out_path, dim, backend.model_label, states, prompts)
    return ExtractionResult(
        path=str(out_path),
        dim=dim,
        turns_requested=protocol.turns,
        turns_completed=len(states),
        overflow_turn=overflow_turn,
        model_id=backend.model_label,
    )
