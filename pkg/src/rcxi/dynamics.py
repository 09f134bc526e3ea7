"""Recursive map families, noise models, and seeded trajectory simulation.

All state arithmetic is 64-bit. Randomness flows through a single
counter-based generator (numpy Philox) keyed by the caller's seed, so
identical (map, noise, inputs, seed) reproduce trajectories bit-for-bit
across platforms. Stream layout: the initial state consumes the first
``dim`` uniform draws; the per-step noise block is drawn upfront as one
``(steps, dim)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.random import Generator, Philox

MAP_FAMILIES = ("affine", "rotation-contraction", "delayed-contraction", "multi-basin")
NOISE_KINDS = ("none", "gaussian-iid", "uniform-iid")


def make_generator(seed: int) -> Generator:
    """Counter-based generator used for every seeded draw in the package.

    Philox seeded through numpy's SeedSequence: identical streams on every
    platform for a given integer seed.
    """
    return Generator(Philox(int(seed)))


def as_state(values, dim: int | None = None) -> np.ndarray:
    """Coerce to a finite 1-D float64 state vector, optionally checking dim."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"state must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("state must have at least one coordinate")
    if dim is not None and arr.size != dim:
        raise ValueError(f"dimension-mismatch: state has dim {arr.size}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state contains non-finite entries")
    return arr


@dataclass(frozen=True)
class SymbolicInput:
    """Token-like input: a stable non-negative id plus an optional label."""

    id: int
    text: str | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, (int, np.integer)) or isinstance(self.id, bool):
            raise ValueError(f"invalid-parameter: id must be an integer, got {self.id!r}")
        if self.id < 0:
            raise ValueError(f"invalid-parameter: id must be non-negative, got {self.id}")


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean iid perturbation; ``sigma`` is the per-coordinate std dev."""

    kind: str = "none"
    sigma: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"invalid-parameter: kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"invalid-parameter: sigma must be finite and >= 0, got {self.sigma}")

    def draw_block(self, gen: Generator, steps: int, dim: int) -> np.ndarray:
        """Draw the full (steps, dim) noise block; kind=none consumes no draws."""
        if self.kind == "none":
            return np.zeros((steps, dim))
        if self.kind == "gaussian-iid":
            return self.sigma * gen.standard_normal((steps, dim))
        # uniform on [-a, a] with a chosen so the per-coordinate std is sigma
        half_width = self.sigma * np.sqrt(3.0)
        return gen.uniform(-half_width, half_width, (steps, dim))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": float(self.sigma)}

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseSpec":
        return cls(kind=data["kind"], sigma=float(data.get("sigma", 0.0)))


def _as_offset(value, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise ValueError(f"invalid-parameter: {name} must be a scalar or length-{dim} vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"invalid-parameter: {name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class MapSpec:
    """Parametric definition of one update-map family.

    Families (the update never returns a symbol, only a state vector):

    * ``affine``: ``x -> factor * x + offset [+ input_offsets[s.id]]``.
    * ``rotation-contraction``: in the leading coordinate plane, advance the
      angle by ``theta`` and pull the radius toward ``cycle_radius`` with
      factor ``rho`` (``cycle_radius=0`` reduces to the linear map
      ``rho * R(theta) x``); remaining coordinates contract by ``rho``.
    * ``delayed-contraction``: ``pre_factor * x + offset`` for step index
      < ``onset``, then ``factor * x + offset``.
    * ``multi-basin``: the selector coordinate is cut into intervals by
      ``cuts``; interval ``i`` applies ``basin_factors[i] * x + basin_offsets[i]``.
    """

    family: str
    dim: int
    factor: float = 0.5
    offset: tuple[float, ...] = ()
    input_offsets: tuple[tuple[int, tuple[float, ...]], ...] = ()
    rho: float = 0.9
    theta: float = 0.0
    cycle_radius: float = 1.0
    onset: int = 0
    pre_factor: float = 1.1
    cuts: tuple[float, ...] = ()
    basin_factors: tuple[float, ...] = ()
    basin_offsets: tuple[tuple[float, ...], ...] = ()
    selector_axis: int = 0

    def __post_init__(self) -> None:
        if self.family not in MAP_FAMILIES:
            raise ValueError(f"invalid-parameter: family must be one of {MAP_FAMILIES}, got {self.family!r}")
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ValueError(f"invalid-parameter: dim must be a positive integer, got {self.dim}")
        if self.family == "affine":
            if not np.isfinite(self.factor) or self.factor < 0:
                raise ValueError(f"invalid-parameter: factor must be finite and >= 0, got {self.factor}")
        elif self.family == "rotation-contraction":
            if self.dim < 2:
                raise ValueError("invalid-parameter: dim must be >= 2 for rotation-contraction")
            if not (0.0 < self.rho < 1.0):
                raise ValueError(f"invalid-parameter: rho must be in (0, 1), got {self.rho}")
            if not np.isfinite(self.theta):
                raise ValueError("invalid-parameter: theta must be finite")
            if not np.isfinite(self.cycle_radius) or self.cycle_radius < 0:
                raise ValueError(f"invalid-parameter: cycle_radius must be >= 0, got {self.cycle_radius}")
        elif self.family == "delayed-contraction":
            if self.onset < 0:
                raise ValueError(f"invalid-parameter: onset must be >= 0, got {self.onset}")
            if not np.isfinite(self.pre_factor) or self.pre_factor <= 1.0:
                raise ValueError(f"invalid-parameter: pre_factor must be > 1, got {self.pre_factor}")
            if not (0.0 <= self.factor < 1.0):
                raise ValueError(f"invalid-parameter: factor must be in [0, 1), got {self.factor}")
        elif self.family == "multi-basin":
            n_basins = len(self.basin_factors)
            if n_basins < 1:
                raise ValueError("invalid-parameter: basin_factors must be non-empty")
            if len(self.basin_offsets) != n_basins:
                raise ValueError("invalid-parameter: basin_offsets must match basin_factors in length")
            if len(self.cuts) != n_basins - 1:
                raise ValueError("invalid-parameter: cuts must have one fewer entry than basin_factors")
            if list(self.cuts) != sorted(self.cuts):
                raise ValueError("invalid-parameter: cuts must be sorted ascending")
            if not (0 <= self.selector_axis < self.dim):
                raise ValueError(f"invalid-parameter: selector_axis must be in [0, {self.dim}), got {self.selector_axis}")
            for lf in self.basin_factors:
                if not np.isfinite(lf) or lf < 0:
                    raise ValueError(f"invalid-parameter: basin_factors entries must be >= 0, got {lf}")
        # normalize vector params so specs are hashable and serializable
        object.__setattr__(self, "offset", tuple(_as_offset(self.offset if self.offset != () else 0.0, self.dim, "offset")))
        object.__setattr__(
            self,
            "input_offsets",
            tuple(sorted((int(i), tuple(_as_offset(v, self.dim, f"input_offsets[{i}]"))) for i, v in self.input_offsets)),
        )
        object.__setattr__(
            self, "basin_offsets", tuple(tuple(_as_offset(v, self.dim, "basin_offsets")) for v in self.basin_offsets)
        )

    @classmethod
    def affine(cls, dim: int, factor: float, offset=0.0, input_offsets: dict | None = None) -> "MapSpec":
        pairs = tuple((int(i), v) for i, v in (input_offsets or {}).items())
        return cls(family="affine", dim=dim, factor=factor, offset=offset, input_offsets=pairs)

    @classmethod
    def rotation_contraction(cls, dim: int, rho: float, theta: float, cycle_radius: float = 1.0) -> "MapSpec":
        return cls(family="rotation-contraction", dim=dim, rho=rho, theta=theta, cycle_radius=cycle_radius)

    @classmethod
    def delayed_contraction(cls, dim: int, onset: int, pre_factor: float, factor: float, offset=0.0) -> "MapSpec":
        return cls(family="delayed-contraction", dim=dim, onset=onset, pre_factor=pre_factor, factor=factor, offset=offset)

    @classmethod
    def multi_basin(cls, dim: int, cuts, factors, offsets, selector_axis: int = 0) -> "MapSpec":
        return cls(
            family="multi-basin",
            dim=dim,
            cuts=tuple(float(c) for c in cuts),
            basin_factors=tuple(float(f) for f in factors),
            basin_offsets=tuple(offsets),
            selector_axis=selector_axis,
        )

    def fixed_point(self) -> np.ndarray | None:
        """Closed-form fixed point where one exists (affine/delayed, factor != 1)."""
        if self.family in ("affine", "delayed-contraction") and self.factor != 1.0:
            return np.asarray(self.offset) / (1.0 - self.factor)
        return None

    def to_dict(self) -> dict:
        data: dict = {"family": self.family, "dim": int(self.dim)}
        if self.family == "affine":
            data["factor"] = float(self.factor)
            data["offset"] = [float(v) for v in self.offset]
            if self.input_offsets:
                data["input_offsets"] = {str(i): [float(x) for x in v] for i, v in self.input_offsets}
        elif self.family == "rotation-contraction":
            data.update(rho=float(self.rho), theta=float(self.theta), cycle_radius=float(self.cycle_radius))
        elif self.family == "delayed-contraction":
            data.update(
                onset=int(self.onset),
                pre_factor=float(self.pre_factor),
                factor=float(self.factor),
                offset=[float(v) for v in self.offset],
            )
        else:
            data.update(
                cuts=[float(c) for c in self.cuts],
                basin_factors=[float(f) for f in self.basin_factors],
                basin_offsets=[[float(x) for x in v] for v in self.basin_offsets],
                selector_axis=int(self.selector_axis),
            )
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "MapSpec":
        family = data["family"]
        dim = int(data["dim"])
        if family == "affine":
            return cls.affine(
                dim,
                float(data["factor"]),
                data.get("offset", 0.0),
                {int(k): v for k, v in data.get("input_offsets", {}).items()} or None,
            )
        if family == "rotation-contraction":
            return cls.rotation_contraction(dim, float(data["rho"]), float(data["theta"]), float(data.get("cycle_radius", 1.0)))
        if family == "delayed-contraction":
            return cls.delayed_contraction(
                dim, int(data["onset"]), float(data["pre_factor"]), float(data["factor"]), data.get("offset", 0.0)
            )
        if family == "multi-basin":
            return cls.multi_basin(
                dim, data["cuts"], data["basin_factors"], data["basin_offsets"], int(data.get("selector_axis", 0))
            )
        raise ValueError(f"invalid-parameter: unknown family {family!r}")


class RecursiveMap:
    """Deterministic, noise-free evaluable update ``(state, input, step) -> state``."""

    def __init__(self, spec: MapSpec):
        self.spec = spec
        self.dim = spec.dim
        self._offset = np.asarray(spec.offset, dtype=np.float64)
        self._input_offsets = {i: np.asarray(v, dtype=np.float64) for i, v in spec.input_offsets}
        if spec.family == "multi-basin":
            self._cuts = np.asarray(spec.cuts, dtype=np.float64)
            self._basin_factors = np.asarray(spec.basin_factors, dtype=np.float64)
            self._basin_offsets = [np.asarray(v, dtype=np.float64) for v in spec.basin_offsets]

    def __call__(self, state: np.ndarray, inp: SymbolicInput, step_index: int = 0) -> np.ndarray:
        spec = self.spec
        if spec.family == "affine":
            out = spec.factor * state + self._offset
            extra = self._input_offsets.get(inp.id)
            if extra is not None:
                out = out + extra
        elif spec.family == "rotation-contraction":
            out = spec.rho * state
            r = np.hypot(state[0], state[1])
            phi = np.arctan2(state[1], state[0]) + spec.theta
            r_new = spec.cycle_radius + spec.rho * (r - spec.cycle_radius)
            out[0] = r_new * np.cos(phi)
            out[1] = r_new * np.sin(phi)
        elif spec.family == "delayed-contraction":
            factor = spec.pre_factor if step_index < spec.onset else spec.factor
            out = factor * state + self._offset
        else:  # multi-basin
            idx = int(np.searchsorted(self._cuts, state[spec.selector_axis], side="right"))
            out = self._basin_factors[idx] * state + self._basin_offsets[idx]
        # recursion gate: the update must stay in state space
        assert isinstance(out, np.ndarray) and out.dtype == np.float64 and out.shape == state.shape
        return out


def make_map(spec: MapSpec) -> RecursiveMap:
    """Build the evaluable update function for a validated map spec."""
    return RecursiveMap(spec)


def step(
    state: np.ndarray,
    inp: SymbolicInput,
    recursive_map: RecursiveMap,
    noise_draw: np.ndarray,
    step_index: int = 0,
) -> np.ndarray:
    """One update: map image plus the supplied noise draw."""
    state = as_state(state, recursive_map.dim)
    noise = as_state(noise_draw, recursive_map.dim)
    out = recursive_map(state, inp, step_index) + noise
    assert isinstance(out, np.ndarray) and out.shape == state.shape
    return out


def normalize_inputs(inputs) -> tuple[SymbolicInput, ...]:
    """Accept ints or SymbolicInputs; reject an empty schedule."""
    if inputs is None:
        inputs = (0,)
    items = tuple(inputs)
    if len(items) == 0:
        raise ValueError("input schedule must be non-empty")
    return tuple(x if isinstance(x, SymbolicInput) else SymbolicInput(int(x)) for x in items)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """An orbit of the update rule: ``len(states) == len(inputs) + 1``.

    ``states`` is a read-only (n+1, dim) float64 array. ``map_spec``,
    ``noise_spec`` and ``seed`` are absent for externally ingested traces.
    """

    states: np.ndarray
    inputs: tuple[SymbolicInput, ...]
    seed: int | None = None
    map_spec: MapSpec | None = None
    noise_spec: NoiseSpec | None = None
    source: str = "simulated"
    model_id: str | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.states, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"states must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("states contain non-finite entries")
        if len(self.inputs) != arr.shape[0] - 1:
            raise ValueError(
                f"len(states) must equal len(inputs) + 1, got {arr.shape[0]} states and {len(self.inputs)} inputs"
            )
        if self.source not in ("simulated", "extracted"):
            raise ValueError(f"invalid-parameter: source must be 'simulated' or 'extracted', got {self.source!r}")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "states", arr)
        object.__setattr__(self, "inputs", tuple(self.inputs))

    @property
    def dim(self) -> int:
        return int(self.states.shape[1])

    @property
    def n_steps(self) -> int:
        return int(self.states.shape[0]) - 1


def simulate(
    map_spec: MapSpec,
    noise: NoiseSpec | None = None,
    inputs: Sequence[SymbolicInput | int] | None = None,
    steps: int = 1000,
    seed: int = 0,
) -> Trajectory:
    """Run a seeded stochastic recursion and return its full trajectory.

    The input schedule cycles over ``inputs`` (default: a single repeated
    token with id 0). The initial state is uniform on [-1, 1]^dim.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    noise = noise or NoiseSpec()
    schedule = normalize_inputs(inputs)
    recursive_map = make_map(map_spec)
    gen = make_generator(seed)
    x = gen.uniform(-1.0, 1.0, map_spec.dim)
    eps = noise.draw_block(gen, steps, map_spec.dim)
    states = np.empty((steps + 1, map_spec.dim), dtype=np.float64)
    states[0] = x
    used: list[SymbolicInput] = []
    n_sched = len(schedule)
    for n in range(steps):
        inp = schedule[n % n_sched]
        used.append(inp)
        x = recursive_map(x, inp, n) + eps[n]
        states[n + 1] = x
    if not np.all(np.isfinite(states)):
        raise FloatingPointError("simulation diverged to non-finite states")
    return Trajectory(
        states=states,
        inputs=tuple(used),
        seed=int(seed),
        map_spec=map_spec,
        noise_spec=noise,
        source="simulated",
    )
