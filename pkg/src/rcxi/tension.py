"""Step-to-step tension series and its second-moment / persistence diagnostics.

Tension is the Euclidean norm of consecutive state differences, taken
exactly (no normalization by dimension).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import MapSpec, NoiseSpec, Trajectory


@dataclass(frozen=True, eq=False)
class TensionTrace:
    """Series of consecutive-state displacement norms (one per step)."""

    values: np.ndarray
    dim: int
    burn_in: int = 0

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError(f"values must be a non-empty 1-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("tension values must be finite and non-negative")
        if not (0 <= self.burn_in < arr.size):
            raise ValueError(f"burn_in must be in [0, {arr.size}), got {self.burn_in}")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class MomentBoundReport:
    window_mean_sq: float
    bound: float
    satisfied: bool
    window: int


@dataclass(frozen=True)
class PersistenceReport:
    persists: bool
    longest_run_start: int
    longest_run_length: int
    threshold: float
    min_run: int


def tension_series(trajectory: Trajectory, burn_in: int | None = None) -> TensionTrace:
    """Norms of consecutive state differences; burn_in defaults to 10%."""
    if trajectory.states.shape[0] < 2:
        raise ValueError("trajectory must have at least 2 states")
    diffs = np.diff(trajectory.states, axis=0)
    values = np.linalg.norm(diffs, axis=1)
    if burn_in is None:
        burn_in = values.size // 10
    return TensionTrace(values=values, dim=trajectory.dim, burn_in=int(burn_in))


def moment_bound_check(trace: TensionTrace, bound: float, window: int) -> MomentBoundReport:
    """Mean squared tension over the last `window` post-burn-in entries vs a bound."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    available = trace.values.size - trace.burn_in
    if window > available:
        raise ValueError(f"window {window} exceeds the {available} entries after burn-in")
    tail = trace.values[trace.burn_in:][-window:]
    window_mean_sq = float(np.mean(tail**2))
    return MomentBoundReport(
        window_mean_sq=window_mean_sq,
        bound=float(bound),
        satisfied=bool(window_mean_sq <= bound),
        window=int(window),
    )


def persistence_check(trace: TensionTrace, epsilon_threshold: float, min_run: int) -> PersistenceReport:
    """Longest contiguous run of tension values strictly above the threshold.

    ``persists`` is true iff some run reaches ``min_run``. When no value
    exceeds the threshold the run length is 0 and the start index is -1.
    """
    if min_run < 1:
        raise ValueError(f"min_run must be >= 1, got {min_run}")
    above = trace.values > epsilon_threshold
    best_len = 0
    best_start = -1
    cur_len = 0
    cur_start = 0
    for i, flag in enumerate(above):
        if flag:
            if cur_len == 0:
                cur_start = i
            cur_len += 1
            if cur_len > best_len:
                best_len = cur_len
                best_start = cur_start
        else:
            cur_len = 0
    return PersistenceReport(
        persists=bool(best_len >= min_run),
        longest_run_start=int(best_start),
        longest_run_length=int(best_len),
        threshold=float(epsilon_threshold),
        min_run=int(min_run),
    )


def stationary_mean_sq(map_spec: MapSpec, noise_spec: NoiseSpec) -> float | None:
    """Closed-form stationary E[tension^2] for the affine family, else None."""
    if map_spec.family != "affine" or noise_spec.kind == "none" or map_spec.factor >= 1.0:
        return None
    return 2.0 * map_spec.dim * noise_spec.sigma**2 / (1.0 + map_spec.factor)


def suggested_bound(trace: TensionTrace, map_spec: MapSpec | None = None, noise_spec: NoiseSpec | None = None) -> float:
    """Default second-moment bound: 2x the affine closed form when the spec
    is known, else the 90th percentile of observed squared tension."""
    if map_spec is not None and noise_spec is not None:
        closed = stationary_mean_sq(map_spec, noise_spec)
        if closed is not None and closed > 0:
            return 2.0 * closed
    tail = trace.values[trace.burn_in:]
    return float(np.percentile(tail**2, 90.0))
