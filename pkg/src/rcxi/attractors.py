"""Trajectory certificates: contraction estimates, distributional convergence,
tail clustering, PCA projection, annularity score, and input-reducibility.

Every operation is pure; randomness enters only through explicit seeds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import MapSpec, NoiseSpec, SymbolicInput, Trajectory, make_generator, make_map, normalize_inputs

_UNDERFLOW_FLOOR = 1e-150
_OVERFLOW_CEIL = 1e100


@dataclass(frozen=True)
class LipschitzEstimate:
    l_hat: float
    onset_estimate: int | None
    probes: int
    per_probe_ratios: tuple[float, ...]
    discarded: int = 0


@dataclass(frozen=True)
class DistConvergenceReport:
    statistic: float
    p_value: float
    converged: bool
    window: int
    alpha: float
    permutations: int
    points_per_window: int


@dataclass(frozen=True, eq=False)
class AttractorSet:
    k: int
    centroids: np.ndarray
    member_indices: tuple[np.ndarray, ...]
    dispersion: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Projection:
    components: np.ndarray
    explained_variance: np.ndarray
    projected: np.ndarray


@dataclass(frozen=True)
class ReducibilityReport:
    r_squared: float
    n_states: int
    id_counts: tuple[tuple[int, int], ...]


def _onset_from_ratios(ratios: np.ndarray, window: int) -> int | None:
    """First step after which the moving geometric-mean ratio stays below 1."""
    n = ratios.size
    if n < window:
        # too short for a moving window; contractive throughout or unknown
        return 0 if np.all(ratios < 1.0) else None
    logs = np.log(np.maximum(ratios, 1e-300))
    csum = np.concatenate([[0.0], np.cumsum(logs)])
    gms = (csum[window:] - csum[:-window]) / window
    bad = np.nonzero(gms >= 0.0)[0]
    if bad.size == 0:
        return 0
    last_bad_end = int(bad[-1]) + window - 1
    if last_bad_end >= n - 1:
        return None
    return last_bad_end + 1


def _probe_ratios(map_spec, noise, schedule, steps, perturbation, child) -> np.ndarray:
    recursive_map = make_map(map_spec)
    d = map_spec.dim
    gen = np.random.Generator(np.random.Philox(child))
    x = gen.uniform(-1.0, 1.0, d)
    direction = gen.standard_normal(d)
    nrm = np.linalg.norm(direction)
    if nrm == 0.0:
        direction = np.zeros(d)
        direction[0] = 1.0
    else:
        direction = direction / nrm
    xp = x + perturbation * direction
    eps = noise.draw_block(gen, steps, d)
    ratios = []
    for n in range(steps):
        delta_now = float(np.linalg.norm(x - xp))
        # stop once the pair difference underflows or falls into float
        # cancellation territory relative to the state magnitude
        floor = max(_UNDERFLOW_FLOOR, 1e-12 * max(1.0, float(np.linalg.norm(x))))
        if (delta_now < floor and n > 0) or delta_now < _UNDERFLOW_FLOOR or delta_now > _OVERFLOW_CEIL:
            break
        inp = schedule[n % len(schedule)]
        fx = recursive_map(x, inp, n)
        fxp = recursive_map(xp, inp, n)
        ratios.append(float(np.linalg.norm(fx - fxp)) / delta_now)
        x = fx + eps[n]
        xp = fxp + eps[n]
    return np.asarray(ratios)


def estimate_lipschitz(
    map_spec: MapSpec,
    noise: NoiseSpec | None = None,
    inputs: Sequence[SymbolicInput | int] | None = None,
    steps: int = 200,
    probes: int = 8,
    perturbation: float = 1e-3,
    seed: int = 0,
    onset_window: int = 16,
    tail_fraction: float = 0.25,
    threads: int = 1,
) -> LipschitzEstimate:
    """Contraction factor and onset from paired runs sharing noise draws.

    Each probe evolves a base and a perturbed trajectory under common random
    numbers; the additive noise cancels in their difference, so the per-step
    ratio ||delta_{n+1}|| / ||delta_n|| measures the map images alone. A
    probe whose difference underflows is discarded. Probes are independent;
    with threads > 1 they run concurrently and are reduced in probe order.
    """
    if probes < 1:
        raise ValueError(f"probes must be >= 1, got {probes}")
    if not (perturbation > 0):
        raise ValueError(f"perturbation must be > 0, got {perturbation}")
    if steps < onset_window:
        raise ValueError(f"steps must be >= onset_window ({onset_window}), got {steps}")
    noise = noise or NoiseSpec()
    schedule = normalize_inputs(inputs)

    children = np.random.SeedSequence(seed).spawn(probes)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            all_ratios = list(pool.map(
                lambda child: _probe_ratios(map_spec, noise, schedule, steps, perturbation, child),
                children,
            ))
    else:
        all_ratios = [_probe_ratios(map_spec, noise, schedule, steps, perturbation, c) for c in children]

    per_probe: list[float] = []
    onsets: list[int | None] = []
    discarded = 0
    for ratios in all_ratios:
        if ratios.size == 0:
            discarded += 1
            continue
        tail = ratios[int(np.floor(ratios.size * (1.0 - tail_fraction))):]
        per_probe.append(float(np.median(tail)))
        onsets.append(_onset_from_ratios(ratios, onset_window))
    if not per_probe:
        raise ValueError("all probes discarded (perturbation underflowed immediately)")

    known = [o for o in onsets if o is not None]
    if len(known) * 2 < len(onsets):
        onset_estimate: int | None = None
    else:
        onset_estimate = int(round(float(np.median(known))))
    return LipschitzEstimate(
        l_hat=float(np.median(per_probe)),
        onset_estimate=onset_estimate,
        probes=probes,
        per_probe_ratios=tuple(per_probe),
        discarded=discarded,
    )


def strided_indices(n: int, max_points: int) -> np.ndarray:
    if n <= max_points:
        return np.arange(n)
    return np.floor(np.arange(max_points) * (n / max_points)).astype(int)


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    sq = np.sum(points**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * points @ points.T, 0.0)
    dist = np.sqrt(d2)
    np.fill_diagonal(dist, 0.0)
    return dist


def _energy_statistic_from_indicator(dist: np.ndarray, total: float, v: np.ndarray, nx: int, ny: int) -> float:
    dv = dist @ v
    s_xx = float(v @ dv)
    cross = float(dv.sum() - s_xx)
    s_yy = total - s_xx - 2.0 * cross
    return 2.0 * cross / (nx * ny) - s_xx / (nx * (nx - 1)) - s_yy / (ny * (ny - 1))


def convergence_test(
    trajectory: Trajectory,
    burn_in: int,
    window: int,
    alpha: float = 0.05,
    permutations: int = 500,
    seed: int = 0,
    max_points: int = 512,
) -> DistConvergenceReport:
    """Energy-distance permutation test between an early and a late tail window.

    Windows are [burn_in, burn_in + window) and the final `window` states.
    Each window is reduced to an evenly strided subsample before the
    statistic is formed: at most `max_points` states, and once a window
    exceeds 32 states the stride is kept >= 8 so consecutive-state
    autocorrelation cannot masquerade as a distribution shift under the
    exchangeable permutation null. converged means the test fails to
    reject equality at level alpha.
    """
    n = trajectory.states.shape[0]
    if window < 10:
        raise ValueError(f"window must be >= 10 (statistic unreliable), got {window}")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if burn_in < 0:
        raise ValueError(f"burn_in must be >= 0, got {burn_in}")
    if permutations < 1:
        raise ValueError(f"permutations must be >= 1, got {permutations}")
    if burn_in + 2 * window > n:
        raise ValueError(f"windows overlap: burn_in + 2*window = {burn_in + 2 * window} exceeds {n} states")
    early = trajectory.states[burn_in:burn_in + window]
    late = trajectory.states[n - window:]
    target = min(max_points, window)
    if window > 32:
        target = min(target, max(32, window // 8))
    idx = strided_indices(window, target)
    x_pts = early[idx]
    y_pts = late[idx]
    nx, ny = len(x_pts), len(y_pts)

    pooled = np.vstack([x_pts, y_pts])
    dist = _pairwise_distances(pooled)
    total = float(dist.sum())
    v_obs = np.zeros(nx + ny)
    v_obs[:nx] = 1.0
    observed = _energy_statistic_from_indicator(dist, total, v_obs, nx, ny)

    gen = make_generator(seed)
    count = 0
    for _ in range(permutations):
        perm = gen.permutation(nx + ny)
        v = np.zeros(nx + ny)
        v[perm[:nx]] = 1.0
        if _energy_statistic_from_indicator(dist, total, v, nx, ny) >= observed:
            count += 1
    p_value = (count + 1) / (permutations + 1)
    return DistConvergenceReport(
        statistic=float(observed),
        p_value=float(p_value),
        converged=bool(p_value > alpha),
        window=int(window),
        alpha=float(alpha),
        permutations=int(permutations),
        points_per_window=int(nx),
    )


def _kmeans(points: np.ndarray, k: int, gen: np.random.Generator, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Seeded Lloyd iteration with distance-squared (k-means++ style) seeding."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(gen.integers(n))]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(gen.integers(n))
        else:
            idx = int(gen.choice(n, p=d2 / total))
        centers[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        dists = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(dists, axis=1)
        new_centers = centers.copy()
        for j in range(k):
            mask = labels == j
            if mask.any():
                new_centers[j] = points[mask].mean(axis=0)
            else:
                far = int(np.argmax(np.min(dists, axis=1)))
                new_centers[j] = points[far]
        if np.allclose(new_centers, centers, atol=1e-12, rtol=0.0):
            centers = new_centers
            break
        centers = new_centers
    dists = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(dists, axis=1)
    return labels, centers


def _silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette over points; requires >= 2 populated clusters."""
    uniq = np.unique(labels)
    if uniq.size < 2:
        return -1.0
    dist = _pairwise_distances(points)
    n = points.shape[0]
    onehot = (labels[:, None] == uniq[None, :]).astype(float)
    counts = onehot.sum(axis=0)
    sums = dist @ onehot
    own = np.argmax(onehot, axis=1)
    own_counts = counts[own]
    a = np.zeros(n)
    multi = own_counts > 1
    a[multi] = sums[np.arange(n), own][multi] / (own_counts[multi] - 1)
    means = sums / counts[None, :]
    means[np.arange(n), own] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[~multi] = 0.0
    return float(s.mean())


def find_attractors(
    tail_states,
    k_max: int = 8,
    seed: int = 0,
    silhouette_floor: float = 0.6,
    max_silhouette_points: int = 2048,
) -> AttractorSet:
    """Partition tail states into k clusters, k chosen by silhouette score.

    k runs over [2, k_max]; the best-k partition is kept unless its
    silhouette falls below the floor, in which case k=1. The default floor
    sits between the scores k-means earns by carving unimodal clouds or
    rings into arcs (<= 0.47 measured) and the scores of genuinely separated
    basins (~0.99), so single attractors are not reported as modular.
    Deterministic per seed; cluster order is fixed by sorting centroids
    lexicographically.
    """
    points = np.asarray(tail_states, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("tail_states must be a non-empty 2-D collection")
    if not np.all(np.isfinite(points)):
        raise ValueError("tail_states contain non-finite entries")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    n = points.shape[0]
    if n < 2 * k_max:
        raise ValueError(f"need at least 2*k_max = {2 * k_max} tail states, got {n}")

    gen = make_generator(seed)
    labels = np.zeros(n, dtype=int)
    if k_max > 1:
        sil_idx = strided_indices(n, max_silhouette_points)
        best_score = -np.inf
        best_labels = labels
        for k in range(2, k_max + 1):
            cand_labels, _ = _kmeans(points, k, gen)
            score = _silhouette(points[sil_idx], cand_labels[sil_idx])
            if score > best_score:
                best_score = score
                best_labels = cand_labels
        if best_score >= silhouette_floor:
            labels = best_labels

    uniq = np.unique(labels)
    centroids = np.vstack([points[labels == u].mean(axis=0) for u in uniq])
    order = np.lexsort(centroids.T[::-1])
    members: list[np.ndarray] = []
    dispersion: list[float] = []
    for rank in order:
        u = uniq[rank]
        idx = np.nonzero(labels == u)[0]
        members.append(idx)
        dispersion.append(float(np.linalg.norm(points[idx] - centroids[rank], axis=1).mean()))
    return AttractorSet(
        k=int(uniq.size),
        centroids=centroids[order],
        member_indices=tuple(members),
        dispersion=tuple(dispersion),
    )


def dist_to_attractor(state, attractor_members) -> float:
    """Minimum Euclidean distance from a state to the empirical member set."""
    members = np.asarray(attractor_members, dtype=np.float64)
    if members.ndim != 2 or members.shape[0] == 0:
        raise ValueError("attractor member list must be non-empty")
    vec = np.asarray(state, dtype=np.float64)
    if vec.shape != (members.shape[1],):
        raise ValueError(f"dimension-mismatch: state has shape {vec.shape}, members have dim {members.shape[1]}")
    return float(np.linalg.norm(members - vec, axis=1).min())


def pca_project(states, n_components: int) -> Projection:
    """Top principal components of mean-centered states via SVD.

    Components carry a deterministic sign (largest-magnitude entry positive);
    explained variances are the sample-covariance eigenvalues.
    """
    points = np.asarray(states, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 2:
        raise ValueError("need at least 2 states for a projection")
    d = points.shape[1]
    if not (1 <= n_components <= d):
        raise ValueError(f"n_components must be in [1, {d}], got {n_components}")
    centered = points - points.mean(axis=0)
    if not np.any(np.abs(centered) > 0.0):
        raise ValueError("zero-variance: all states identical, nothing to project")
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if n_components > vt.shape[0]:
        raise ValueError(f"n_components {n_components} exceeds the data rank {vt.shape[0]}")
    components = vt[:n_components].copy()
    for row in components:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    explained = (svals[:n_components] ** 2) / (points.shape[0] - 1)
    projected = centered @ components.T
    return Projection(components=components, explained_variance=explained, projected=projected)


def torus_score(projection: Projection) -> float:
    """Annularity of the leading-2-component cloud, in [0, 1].

    1 - var(r)/mean(r)^2 over radii about the planar mean, floored at 0;
    degenerate clouds (mean radius below 1e-9) score 0.
    """
    if projection.components.shape[0] < 2:
        raise ValueError("projection must have at least 2 components")
    pts = projection.projected[:, :2]
    if pts.shape[0] < 20:
        raise ValueError(f"need at least 20 projected points, got {pts.shape[0]}")
    center = pts.mean(axis=0)
    radii = np.linalg.norm(pts - center, axis=1)
    mean_r = radii.mean()
    if mean_r < 1e-9:
        return 0.0
    return float(max(0.0, 1.0 - radii.var() / mean_r**2))


def symbolic_reducibility(trajectory: Trajectory) -> ReducibilityReport:
    """R^2 of the best memoryless per-input predictor of the next state.

    The predictor is the conditional mean of the successor state given the
    current input id (least-squares optimal among functions of the input
    alone). R^2 near 1 means the state sequence collapses to an input
    lookup; near 0 means the inputs explain nothing.
    """
    if trajectory.states.shape[0] < 10:
        raise ValueError("need at least 10 states")
    ids = np.array([inp.id for inp in trajectory.inputs], dtype=int)
    uniq, counts = np.unique(ids, return_counts=True)
    if uniq.size < 2:
        raise ValueError("need at least 2 distinct input ids")
    successors = trajectory.states[1:]
    grand_mean = successors.mean(axis=0)
    sst = float(((successors - grand_mean) ** 2).sum())
    if sst <= 0.0:
        raise ValueError("zero-variance: constant states are degenerate for this diagnostic")
    sse = 0.0
    for u in uniq:
        group = successors[ids == u]
        sse += float(((group - group.mean(axis=0)) ** 2).sum())
    r_squared = max(0.0, 1.0 - sse / sst)
    return ReducibilityReport(
        r_squared=float(r_squared),
        n_states=int(trajectory.states.shape[0]),
        id_counts=tuple((int(u), int(c)) for u, c in zip(uniq, counts)),
    )
