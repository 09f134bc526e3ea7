"""Model backends: a pinned seeded micro-transformer plus an optional
transformers-based backend for real local models.

Both expose the same surface: tokenize/count, greedy reply generation,
and the per-layer hidden stack for a context, so the extraction loop is
backend-agnostic.
"""

from __future__ import annotations

import re
import zlib

import numpy as np
from numpy.random import Generator, Philox


class ModelLoadError(RuntimeError):
    """Raised when a backend cannot be constructed for the given model id."""


class ContextOverflowError(RuntimeError):
    def __init__(self, turn: int, needed: int, limit: int):
        super().__init__(f"turn {turn}: context of {needed} tokens exceeds the {limit}-token limit")
        self.turn = turn


_WORD_TOKEN = re.compile(r"w(\d+)$")


def _layer_norm(x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps)


class BuiltinBackend:
    """Small open causal transformer with weights drawn from a fixed seed.

    The token space is its own: generated replies detokenize to
    ``w<id>`` words, which the tokenizer maps back to ids exactly; any
    other word hashes (crc32) into the vocab. Greedy decoding over
    float64 weights makes every run bit-reproducible.
    """

    def __init__(
        self,
        seed: int = 0,
        vocab_size: int = 256,
        hidden: int = 32,
        layers: int = 2,
        heads: int = 4,
        max_context: int = 1024,
    ):
        if hidden % heads != 0:
            raise ModelLoadError(f"hidden {hidden} not divisible by heads {heads}")
        self.model_label = f"builtin:{seed}"
        self.vocab_size = vocab_size
        self.hidden_size = hidden
        self.n_layers = layers
        self.heads = heads
        self.max_context = max_context
        gen = Generator(Philox(int(seed)))
        scale = 0.08
        self._emb = scale * gen.standard_normal((vocab_size, hidden))
        self._pos = scale * gen.standard_normal((max_context, hidden))
        self._blocks = []
        for _ in range(layers):
            self._blocks.append(
                {
                    "wq": scale * gen.standard_normal((hidden, hidden)),
                    "wk": scale * gen.standard_normal((hidden, hidden)),
                    "wv": scale * gen.standard_normal((hidden, hidden)),
                    "wo": scale * gen.standard_normal((hidden, hidden)),
                    "w1": scale * gen.standard_normal((hidden, 4 * hidden)),
                    "b1": np.zeros(4 * hidden),
                    "w2": scale * gen.standard_normal((4 * hidden, hidden)),
                    "b2": np.zeros(hidden),
                }
            )

    # ---- token interface
    def encode(self, text: str) -> list[int]:
        ids = []
        for word in text.split():
            m = _WORD_TOKEN.fullmatch(word)
            if m:
                ids.append(int(m.group(1)) % self.vocab_size)
            else:
                ids.append(zlib.crc32(word.encode("utf-8")) % self.vocab_size)
        return ids

    def decode(self, ids: list[int]) -> str:
        return " ".join(f"w{i}" for i in ids)

    def count_tokens(self, text: str) -> int:
        return len(self.encode(text))

    # ---- transformer forward
    def _attention(self, x: np.ndarray, block: dict) -> np.ndarray:
        t, h = x.shape
        hd = h // self.heads
        q = (x @ block["wq"]).reshape(t, self.heads, hd).transpose(1, 0, 2)
        k = (x @ block["wk"]).reshape(t, self.heads, hd).transpose(1, 0, 2)
        v = (x @ block["wv"]).reshape(t, self.heads, hd).transpose(1, 0, 2)
        scores = q @ k.transpose(0, 2, 1) / np.sqrt(hd)
        mask = np.triu(np.full((t, t), -np.inf), k=1)
        scores = scores + mask
        scores -= scores.max(axis=-1, keepdims=True)
        weights = np.exp(scores)
        weights /= weights.sum(axis=-1, keepdims=True)
        out = (weights @ v).transpose(1, 0, 2).reshape(t, h)
        return out @ block["wo"]

    def hidden_stack(self, text: str) -> list[np.ndarray]:
        """Per-layer hidden states for the full context: index 0 is the
        embedding output, 1..n the block outputs, -1 the final norm."""
        ids = self.encode(text)
        if not ids:
            raise ValueError("empty context")
        if len(ids) > self.max_context:
            raise ContextOverflowError(-1, len(ids), self.max_context)
        x = self._emb[ids] + self._pos[: len(ids)]
        stack = [x]
        for block in self._blocks:
            x = x + self._attention(_layer_norm(x), block)
            x = x + (np.tanh(_layer_norm(x) @ block["w1"] + block["b1"]) @ block["w2"] + block["b2"])
            stack.append(x)
        stack.append(_layer_norm(x))
        return stack

    def generate_reply(self, context: str, max_new_tokens: int) -> str:
        ids = self.encode(context)
        new: list[int] = []
        for _ in range(max_new_tokens):
            if len(ids) >= self.max_context:
                break
            x = self._emb[ids] + self._pos[: len(ids)]
            for block in self._blocks:
                x = x + self._attention(_layer_norm(x), block)
                x = x + (np.tanh(_layer_norm(x) @ block["w1"] + block["b1"]) @ block["w2"] + block["b2"])
            logits = _layer_norm(x)[-1] @ self._emb.T
            nxt = int(np.argmax(logits))
            new.append(nxt)
            ids.append(nxt)
        return self.decode(new)


class TransformersBackend:
    """Hidden-state extraction from a local/hub causal LM via transformers."""

    def __init__(self, model_id: str):
        try:
            import torch
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as exc:  # pragma: no cover - depends on environment
            raise ModelLoadError(f"transformers backend unavailable: {exc}") from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(model_id)
            self._model = AutoModelForCausalLM.from_pretrained(model_id)
        except Exception as exc:
            raise ModelLoadError(f"cannot load model {model_id!r}: {exc}") from exc
        self._torch = torch
        self._model.eval()
        cfg = self._model.config
        self.model_label = str(model_id)
        self.hidden_size = int(getattr(cfg, "hidden_size", None) or getattr(cfg, "n_embd"))
        self.max_context = int(
            getattr(cfg, "max_position_embeddings", None) or getattr(cfg, "n_positions", 1024)
        )

    def encode(self, text: str) -> list[int]:
        return self._tokenizer.encode(text)

    def count_tokens(self, text: str) -> int:
        return len(self.encode(text))

    def hidden_stack(self, text: str) -> list[np.ndarray]:
        torch = self._torch
        ids = torch.tensor([self.encode(text)])
        if ids.shape[1] > self.max_context:
            raise ContextOverflowError(-1, ids.shape[1], self.max_context)
        with torch.no_grad():
            out = self._model(ids, output_hidden_states=True)
        return [h[0].to(torch.float64).cpu().numpy() for h in out.hidden_states]

    def generate_reply(self, context: str, max_new_tokens: int) -> str:
        torch = self._torch
        ids = torch.tensor([self.encode(context)])
        room = self.max_context - ids.shape[1]
        if room <= 0:
            return ""
        with torch.no_grad():
            out = self._model.generate(
                ids,
                max_new_tokens=min(max_new_tokens, room),
                do_sample=False,
                num_beams=1,
                pad_token_id=self._tokenizer.pad_token_id or self._tokenizer.eos_token_id or 0,
            )
        new_ids = out[0, ids.shape[1]:]
        return self._tokenizer.decode(new_ids, skip_special_tokens=True).strip()


def load_backend(model_id: str):
    """``builtin[:seed]`` gives the pinned micro-transformer; anything else
    is treated as a transformers model path or hub id."""
    if model_id == "builtin" or model_id.startswith("builtin:"):
        seed = 0
        if ":" in model_id:
            try:
                seed = int(model_id.split(":", 1)[1])
            except ValueError as exc:
                raise ModelLoadError(f"bad builtin seed in {model_id!r}") from exc
        return BuiltinBackend(seed=seed)
    return TransformersBackend(model_id)
