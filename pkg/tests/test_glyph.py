import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.random import Generator, Philox

from rcxi import (
    MapSpec,
    NoiseSpec,
    SymbolicInput,
    Trajectory,
    Vocab,
    collapse_check,
    default_delta,
    encode_glyph,
    make_gaussian_vocab,
    project_symbolic,
    simulate,
    tension_series,
)
from rcxi.glyph import Glyph

TOKEN = SymbolicInput(0)


def make_trajectory(states) -> Trajectory:
    arr = np.asarray(states, dtype=np.float64)
    return Trajectory(states=arr, inputs=tuple(TOKEN for _ in range(arr.shape[0] - 1)))


def vocab_of(points: dict[int, tuple]) -> Vocab:
    return Vocab.from_entries([(i, f"t{i}", np.asarray(v, dtype=float)) for i, v in points.items()])


def test_encode_glyph_deterministic_and_dim_preserving():
    traj = simulate(MapSpec.affine(5, 0.5, 0.3), NoiseSpec("gaussian-iid", 0.05), steps=300, seed=1)
    trace = tension_series(traj)
    a = encode_glyph(traj, trace, window=64, encoder_seed=3)
    b = encode_glyph(traj, trace, window=64, encoder_seed=3)
    assert np.array_equal(a.vector, b.vector)
    assert a.dim == traj.dim == 5
    c = encode_glyph(traj, trace, window=64, encoder_seed=4)
    assert not np.array_equal(a.vector, c.vector)


def test_encode_glyph_flat_window_hand_computed():
    # constant states: centroid 0 after centering at 0, all tension mass in bin 0
    traj = make_trajectory(np.zeros((40, 2)))
    trace = tension_series(traj)
    glyph = encode_glyph(traj, trace, window=16, encoder_seed=0)
    features = np.zeros(2 + 16 + 2)
    features[2] = 1.0  # histogram bin 0 carries all the mass
    matrix = Generator(Philox(0)).standard_normal((2, features.size))
    # independent scalar-by-scalar evaluation of the projection
    expected = np.zeros(2)
    for i in range(2):
        acc = 0.0
        for j in range(features.size):
            acc += float(matrix[i, j]) * float(features[j])
        expected[i] = acc / np.sqrt(features.size)
    assert glyph.vector == pytest.approx(expected, rel=1e-15)


def test_encode_glyph_window_validation():
    traj = make_trajectory(np.zeros((12, 2)))
    trace = tension_series(traj)
    with pytest.raises(ValueError, match="window"):
        encode_glyph(traj, trace, window=4)
    with pytest.raises(ValueError, match="window"):
        encode_glyph(traj, trace, window=50)


def test_project_symbolic_nearest_and_distance():
    vocab = vocab_of({1: (0.0, 0.0), 2: (1.0, 0.0)})
    glyph = Glyph(vector=np.array([0.9, 0.0]), window=8, encoder_seed=0)
    result = project_symbolic(glyph, vocab)
    assert result.id == 2
    assert result.distance == pytest.approx(0.1)


def test_project_symbolic_tie_breaks_to_lowest_id():
    vocab = vocab_of({9: (1.0, 0.0), 5: (-1.0, 0.0)})
    glyph = Glyph(vector=np.array([0.0, 0.0]), window=8, encoder_seed=0)
    assert project_symbolic(glyph, vocab).id == 5


def test_project_symbolic_matches_exhaustive_scan():
    vocab = make_gaussian_vocab(1000, 64, seed=5)
    queries = Generator(Philox(9)).standard_normal((10, 64)) * 0.1
    for q in queries:
        glyph = Glyph(vector=q, window=8, encoder_seed=0)
        got = project_symbolic(glyph, vocab)
        # oracle: plain python linear scan
        best_id, best_d = None, np.inf
        for i in range(len(vocab)):
            d = float(np.sqrt(((vocab.embeddings[i] - q) ** 2).sum()))
            if d < best_d or (d == best_d and vocab.ids[i] < best_id):
                best_id, best_d = int(vocab.ids[i]), d
        assert got.id == best_id
        assert got.distance == pytest.approx(best_d, rel=1e-12)


def test_project_symbolic_dim_mismatch():
    vocab = vocab_of({0: (0.0, 0.0)})
    glyph = Glyph(vector=np.zeros(3), window=8, encoder_seed=0)
    with pytest.raises(ValueError, match="dimension-mismatch"):
        project_symbolic(glyph, vocab)


def test_collapse_check_threshold_semantics():
    vocab = vocab_of({0: (0.0, 0.0)})
    near = Glyph(vector=np.array([0.1, 0.0]), window=8, encoder_seed=0)
    far = Glyph(vector=np.array([0.5, 0.0]), window=8, encoder_seed=0)
    assert not collapse_check(near, vocab, 0.25).anchored
    assert collapse_check(far, vocab, 0.25).anchored
    with pytest.raises(ValueError, match="delta"):
        collapse_check(near, vocab, 0.0)


def test_collapse_check_reports_current_input_distance():
    vocab = vocab_of({0: (0.0, 0.0), 3: (2.0, 0.0)})
    glyph = Glyph(vector=np.array([0.5, 0.0]), window=8, encoder_seed=0)
    report = collapse_check(glyph, vocab, 0.25, current_input_id=3)
    assert report.input_distance == pytest.approx(1.5)
    assert collapse_check(glyph, vocab, 0.25, current_input_id=77).input_distance is None


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_collapse_check_monotone_in_delta(seed):
    gen = Generator(Philox(seed))
    vocab = make_gaussian_vocab(20, 4, seed=seed)
    glyph = Glyph(vector=gen.standard_normal(4), window=8, encoder_seed=0)
    deltas = np.sort(gen.uniform(0.01, 3.0, 6))
    flags = [collapse_check(glyph, vocab, float(d)).anchored for d in deltas]
    # anchored at some delta implies anchored at every smaller delta
    assert flags == sorted(flags, reverse=True)


def test_default_delta_is_a_pairwise_percentile():
    vocab = vocab_of({0: (0.0,), 1: (1.0,), 2: (3.0,)})
    # pairwise distances: 1, 3, 2
    assert default_delta(vocab, percentile=50) == pytest.approx(2.0)
    assert default_delta(vocab, percentile=0) == pytest.approx(1.0)


def test_glyph_never_exactly_hits_the_default_vocab():
    vocab = make_gaussian_vocab(500, 6, seed=0)
    traj = simulate(MapSpec.affine(6, 0.5, 0.2), NoiseSpec("gaussian-iid", 0.05), steps=500, seed=0)
    trace = tension_series(traj)
    glyph = encode_glyph(traj, trace, window=128, encoder_seed=0)
    assert project_symbolic(glyph, vocab).distance >= 1e-9


def test_cycle_glyphs_stay_anchored_across_seeds():
    spec = MapSpec.rotation_contraction(64, 0.98, 0.7, 1.0)
    noise = NoiseSpec("gaussian-iid", 0.01)
    vocab = make_gaussian_vocab(1000, 64, seed=999)
    delta = default_delta(vocab)
    for seed in range(20):
        traj = simulate(spec, noise, steps=1200, seed=seed)
        trace = tension_series(traj)
        glyph = encode_glyph(traj, trace, window=256, encoder_seed=0)
        assert collapse_check(glyph, vocab, delta).anchored


def test_vocab_validation():
    with pytest.raises(ValueError, match="unique"):
        Vocab.from_entries([(1, "a", [0.0]), (1, "b", [1.0])])
    with pytest.raises(ValueError, match="non-empty"):
        Vocab.from_entries([])
    with pytest.raises(ValueError, match="non-finite"):
        Vocab.from_entries([(0, "a", [np.inf])])
