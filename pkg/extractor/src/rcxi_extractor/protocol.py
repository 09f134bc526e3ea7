"""Protocol definition for multi-turn recursive-prompt extraction runs."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

POOLING_MODES = ("last-token", "mean-over-tokens")


@dataclass(frozen=True)
class ProtocolSpec:
    """One extraction run: which model, how many turns, and how each turn
    folds the model's previous reply back into the next prompt.

    ``recursion_template`` must reference the prior reply exactly once via
    the ``{reply}`` placeholder. ``layer`` indexes the captured hidden
    stack (0 = embeddings, 1..n = block outputs, -1 = final); ``pooling``
    reduces the token axis.
    """

    model_id: str = "builtin:0"
    turns: int = 7
    seed_prompt: str = "Consider what you are, then answer in your own words."
    recursion_template: str = 'You previously said: "{reply}". Reflect on that statement and continue.'
    layer: int = -1
    pooling: str = "mean-over-tokens"
    max_new_tokens: int = 16

    def __post_init__(self) -> None:
        if self.turns < 2:
            raise ValueError(f"turns must be >= 2, got {self.turns}")
        if self.recursion_template.count("{reply}") != 1:
            raise ValueError("recursion_template must reference {reply} exactly once")
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}")
        if not self.seed_prompt.strip():
            raise ValueError("seed_prompt must be non-empty")
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolSpec":
        return cls(**data)


def load_protocol(path) -> ProtocolSpec:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"protocol config {path} must be a JSON object")
    return ProtocolSpec.from_dict(data)


def save_protocol(spec: ProtocolSpec, path) -> None:
    Path(path).write_text(spec.to_json(), encoding="utf-8")
