"""Glyph encoding of a tension window, nearest-symbol projection, and the
separation check that distinguishes anchored glyphs from symbolic collapse."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import Trajectory, make_generator
from .tension import TensionTrace

HISTOGRAM_BINS = 16


@dataclass(frozen=True, eq=False)
class Glyph:
    """Fixed-dimension encoding of a trajectory/tension window."""

    vector: np.ndarray
    window: int
    encoder_seed: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.vector, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("glyph vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("glyph vector contains non-finite entries")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "vector", arr)

    @property
    def dim(self) -> int:
        return int(self.vector.size)


@dataclass(frozen=True, eq=False)
class Vocab:
    """Symbol table: unique ids, labels, and same-dimension embeddings."""

    ids: np.ndarray
    texts: tuple[str, ...]
    embeddings: np.ndarray

    def __post_init__(self) -> None:
        ids = np.asarray(self.ids, dtype=np.int64)
        emb = np.asarray(self.embeddings, dtype=np.float64)
        if ids.ndim != 1 or ids.size == 0:
            raise ValueError("vocab must be non-empty")
        if np.unique(ids).size != ids.size:
            raise ValueError("vocab ids must be unique")
        if emb.ndim != 2 or emb.shape[0] != ids.size:
            raise ValueError("embeddings must be a 2-D array with one row per id")
        if len(self.texts) != ids.size:
            raise ValueError("texts must have one entry per id")
        if not np.all(np.isfinite(emb)):
            raise ValueError("embeddings contain non-finite entries")
        if ids.flags.writeable:
            ids = ids.copy()
            ids.setflags(write=False)
        if emb.flags.writeable:
            emb = emb.copy()
            emb.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "texts", tuple(self.texts))

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])

    def __len__(self) -> int:
        return int(self.ids.size)

    @classmethod
    def from_entries(cls, entries) -> "Vocab":
        """Build from an iterable of (id, text, embedding) triples."""
        items = list(entries)
        if not items:
            raise ValueError("vocab must be non-empty")
        return cls(
            ids=np.array([int(i) for i, _, _ in items], dtype=np.int64),
            texts=tuple(str(t) for _, t, _ in items),
            embeddings=np.array([np.asarray(e, dtype=np.float64) for _, _, e in items]),
        )


class NearestSymbol(NamedTuple):
    id: int
    distance: float


@dataclass(frozen=True)
class AnchorReport:
    nearest_id: int
    nearest_distance: float
    delta: float
    anchored: bool
    input_distance: float | None = None


def make_gaussian_vocab(entries: int, dim: int, seed: int = 0, scale: float = 0.05) -> Vocab:
    """Synthetic vocab with iid Gaussian embeddings (per-coordinate std `scale`)."""
    if entries < 1 or dim < 1:
        raise ValueError("entries and dim must be positive")
    gen = make_generator(seed)
    emb = scale * gen.standard_normal((entries, dim))
    return Vocab(
        ids=np.arange(entries, dtype=np.int64),
        texts=tuple(f"tok{i}" for i in range(entries)),
        embeddings=emb,
    )


def glyph_features(trajectory: Trajectory, tension: TensionTrace, window: int) -> np.ndarray:
    """Raw feature vector: window state centroid, 16-bin tension histogram
    normalized to unit mass (all mass in bin 0 when the window is flat),
    then mean and max tension."""
    centroid = trajectory.states[-window:].mean(axis=0)
    values = tension.values[-window:]
    peak = float(values.max())
    if peak <= 0.0:
        hist = np.zeros(HISTOGRAM_BINS)
        hist[0] = 1.0
    else:
        counts, _ = np.histogram(values, bins=HISTOGRAM_BINS, range=(0.0, peak))
        hist = counts / values.size
    return np.concatenate([centroid, hist, [float(values.mean())], [peak]])


def encode_glyph(trajectory: Trajectory, tension: TensionTrace, window: int = 256, encoder_seed: int = 0) -> Glyph:
    """Deterministic glyph: features mapped to the state dimension by a
    seeded random linear projection with unit-variance entries, scaled by
    1/sqrt(feature length)."""
    if window < 8:
        raise ValueError(f"window must be >= 8, got {window}")
    if window > tension.values.size:
        raise ValueError(f"window {window} exceeds the {tension.values.size} tension values")
    if tension.values.size != trajectory.states.shape[0] - 1:
        raise ValueError("tension trace does not match the trajectory length")
    d = trajectory.dim
    features = glyph_features(trajectory, tension, window)
    projection = make_generator(encoder_seed).standard_normal((d, features.size))
    vector = (projection @ features) / np.sqrt(features.size)
    return Glyph(vector=vector, window=int(window), encoder_seed=int(encoder_seed))


def project_symbolic(glyph: Glyph, vocab: Vocab) -> NearestSymbol:
    """Nearest vocab entry by Euclidean distance; exact ties pick the lowest id."""
    if glyph.dim != vocab.dim:
        raise ValueError(f"dimension-mismatch: glyph dim {glyph.dim} vs vocab dim {vocab.dim}")
    dists = np.linalg.norm(vocab.embeddings - glyph.vector, axis=1)
    best = dists.min()
    tied = vocab.ids[dists == best]
    return NearestSymbol(id=int(tied.min()), distance=float(best))


def default_delta(vocab: Vocab, percentile: float = 5.0) -> float:
    """Scale-adaptive separation threshold: a low percentile of the pairwise
    vocab embedding distances."""
    if len(vocab) < 2:
        raise ValueError("need at least 2 vocab entries for a pairwise percentile")
    emb = vocab.embeddings
    sq = np.sum(emb**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * emb @ emb.T, 0.0)
    iu = np.triu_indices(len(vocab), k=1)
    return float(np.percentile(np.sqrt(d2[iu]), percentile))


def collapse_check(glyph: Glyph, vocab: Vocab, delta: float, current_input_id: int | None = None) -> AnchorReport:
    """Anchored iff the glyph stays at least delta away from every symbol.

    Distances are measured in embedding space between the glyph vector and
    symbol embeddings. When the current input id is supplied and present in
    the vocab, its distance is reported alongside.
    """
    if not (delta > 0):
        raise ValueError(f"delta must be > 0, got {delta}")
    nearest = project_symbolic(glyph, vocab)
    input_distance = None
    if current_input_id is not None:
        match = np.nonzero(vocab.ids == int(current_input_id))[0]
        if match.size:
            input_distance = float(np.linalg.norm(vocab.embeddings[match[0]] - glyph.vector))
    return AnchorReport(
        nearest_id=nearest.id,
        nearest_distance=nearest.distance,
        delta=float(delta),
        anchored=bool(nearest.distance >= delta),
        input_distance=input_distance,
    )
