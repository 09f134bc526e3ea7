"""End-to-end analysis: run every certificate a trajectory supports and
assemble the report document, recording a status per section instead of
failing when a trace is too short or too degenerate for some diagnostic."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from . import attractors as att
from . import glyph as gl
from . import tension as tn
from .dynamics import Trajectory
from .traceio import AnalysisReport


@dataclass(frozen=True)
class AnalysisConfig:
    """Resolved knobs for one analysis run; every field is echoed in the report."""

    burn_in: int | None = None
    window: int | None = None
    alpha: float = 0.05
    permutations: int = 500
    max_points: int = 512
    k_max: int = 8
    max_attractor_points: int = 4096
    n_components: int = 2
    run_lipschitz: bool = True
    lipschitz_steps: int = 400
    probes: int = 8
    perturbation: float = 1e-3
    encoder_window: int = 256
    encoder_seed: int = 0
    persistence_percentile: float = 10.0
    persistence_min_run: int = 50
    bound: float | None = None
    moment_window: int | None = None
    delta: float | None = None
    seed: int = 0
    threads: int = 1


def _skipped(reason: str) -> dict[str, Any]:
    return {"status": "skipped", "reason": reason}


def analyze_trajectory(trajectory: Trajectory, config: AnalysisConfig | None = None, vocab: gl.Vocab | None = None) -> AnalysisReport:
    cfg = config or AnalysisConfig()
    n_states = trajectory.states.shape[0]
    burn_in = cfg.burn_in if cfg.burn_in is not None else n_states // 10
    window = cfg.window if cfg.window is not None else n_states // 5
    burn_in = max(0, min(burn_in, n_states - 1))

    data: dict[str, Any] = {
        "format_version": 1,
        "kind": "analysis_report",
        "source": {
            "dim": trajectory.dim,
            "n_states": n_states,
            "source": trajectory.source,
            "seed": trajectory.seed,
            "model_id": trajectory.model_id,
            "map_spec": trajectory.map_spec.to_dict() if trajectory.map_spec else None,
            "noise_spec": trajectory.noise_spec.to_dict() if trajectory.noise_spec else None,
        },
        "config": {**asdict(cfg), "burn_in": burn_in, "window": window},
        "seeds": {"trace_seed": trajectory.seed, "analysis_seed": cfg.seed, "encoder_seed": cfg.encoder_seed},
    }

    report = AnalysisReport(data=data)
    trace: tn.TensionTrace | None = None
    if n_states >= 2:
        trace = tn.tension_series(trajectory, burn_in=min(burn_in, n_states - 2))
        report.tension = trace
        tail = trace.values[trace.burn_in:]
        thr = float(np.percentile(tail, cfg.persistence_percentile))
        persistence = tn.persistence_check(trace, thr, cfg.persistence_min_run)
        data["tension"] = {
            "status": "ok",
            "count": int(trace.values.size),
            "burn_in": int(trace.burn_in),
            "mean": float(trace.values.mean()),
            "max": float(trace.values.max()),
            "tail_mean_sq": float(np.mean(tail**2)),
            "persistence": asdict(persistence),
        }
    else:
        data["tension"] = _skipped("need at least 2 states")

    if trace is not None:
        bound = cfg.bound if cfg.bound is not None else tn.suggested_bound(trace, trajectory.map_spec, trajectory.noise_spec)
        m_window = cfg.moment_window if cfg.moment_window is not None else trace.values.size - trace.burn_in
        try:
            moment = tn.moment_bound_check(trace, bound, m_window)
            data["moment_bound"] = {"status": "ok", **asdict(moment)}
            report.bound = moment.bound
        except ValueError as exc:
            data["moment_bound"] = _skipped(str(exc))
    else:
        data["moment_bound"] = _skipped("no tension trace")

    if not cfg.run_lipschitz:
        data["lipschitz"] = _skipped("disabled")
    elif trajectory.map_spec is None:
        data["lipschitz"] = _skipped("no map spec on this trace")
    else:
        estimate = att.estimate_lipschitz(
            trajectory.map_spec,
            trajectory.noise_spec,
            inputs=trajectory.inputs or None,
            steps=cfg.lipschitz_steps,
            probes=cfg.probes,
            perturbation=cfg.perturbation,
            seed=cfg.seed,
            threads=cfg.threads,
        )
        data["lipschitz"] = {
            "status": "ok",
            "l_hat": estimate.l_hat,
            "onset_estimate": estimate.onset_estimate,
            "probes": estimate.probes,
            "discarded": estimate.discarded,
            "per_probe_ratios": list(estimate.per_probe_ratios),
        }

    if window >= 10 and burn_in + 2 * window <= n_states:
        conv = att.convergence_test(
            trajectory,
            burn_in=burn_in,
            window=window,
            alpha=cfg.alpha,
            permutations=cfg.permutations,
            seed=cfg.seed,
            max_points=cfg.max_points,
        )
        data["convergence"] = {"status": "ok", **asdict(conv)}
    else:
        data["convergence"] = _skipped(f"needs burn_in + 2*window <= {n_states} states with window >= 10")

    tail_states = trajectory.states[burn_in:]
    att_set: att.AttractorSet | None = None
    k_max = min(cfg.k_max, tail_states.shape[0] // 2)
    if k_max >= 1:
        idx = att.strided_indices(tail_states.shape[0], cfg.max_attractor_points)
        att_set = att.find_attractors(tail_states[idx], k_max=k_max, seed=cfg.seed)
        data["attractors"] = {
            "status": "ok",
            "k": att_set.k,
            "centroids": [[float(v) for v in c] for c in att_set.centroids],
            "sizes": [int(m.size) for m in att_set.member_indices],
            "dispersion": [float(d) for d in att_set.dispersion],
            "points_used": int(idx.size),
        }
    else:
        data["attractors"] = _skipped("too few tail states to cluster")

    projection: att.Projection | None = None
    try:
        projection = att.pca_project(tail_states, min(cfg.n_components, trajectory.dim))
        data["projection"] = {
            "status": "ok",
            "n_components": int(projection.components.shape[0]),
            "explained_variance": [float(v) for v in projection.explained_variance],
        }
        report.projection = projection
        report.projection_steps = np.arange(burn_in, n_states)
        if att_set is not None:
            centered = att_set.centroids - tail_states.mean(axis=0)
            report.centroids_2d = centered @ projection.components.T
    except ValueError as exc:
        data["projection"] = _skipped(str(exc))

    if projection is not None and projection.components.shape[0] >= 2 and projection.projected.shape[0] >= 20:
        data["torus_score"] = {"status": "ok", "score": att.torus_score(projection)}
    else:
        data["torus_score"] = _skipped("needs a 2-component projection of at least 20 points")

    distinct_ids = len({inp.id for inp in trajectory.inputs})
    if n_states >= 10 and distinct_ids >= 2:
        try:
            red = att.symbolic_reducibility(trajectory)
            data["reducibility"] = {
                "status": "ok",
                "r_squared": red.r_squared,
                "n_states": red.n_states,
                "id_counts": [[i, c] for i, c in red.id_counts],
            }
        except ValueError as exc:
            data["reducibility"] = _skipped(str(exc))
    else:
        data["reducibility"] = _skipped("needs >= 10 states and >= 2 distinct input ids")

    if vocab is None:
        data["anchor"] = _skipped("no vocab supplied")
    elif trace is None or trace.values.size < 8:
        data["anchor"] = _skipped("trace too short to encode a glyph")
    elif vocab.dim != trajectory.dim:
        data["anchor"] = _skipped(f"vocab dim {vocab.dim} does not match trace dim {trajectory.dim}")
    else:
        g_window = min(cfg.encoder_window, trace.values.size)
        delta = cfg.delta if cfg.delta is not None else gl.default_delta(vocab)
        glyph = gl.encode_glyph(trajectory, trace, window=g_window, encoder_seed=cfg.encoder_seed)
        last_id = trajectory.inputs[-1].id if trajectory.inputs else None
        anchor = gl.collapse_check(glyph, vocab, delta, current_input_id=last_id)
        data["anchor"] = {"status": "ok", "glyph_window": g_window, **asdict(anchor)}

    checks: dict[str, bool] = {}
    if data["tension"].get("status") == "ok":
        checks["tension_persists"] = bool(data["tension"]["persistence"]["persists"])
    if data["moment_bound"].get("status") == "ok":
        checks["moment_bound_satisfied"] = bool(data["moment_bound"]["satisfied"])
    if data["convergence"].get("status") == "ok":
        checks["converged"] = bool(data["convergence"]["converged"])
    if data["anchor"].get("status") == "ok":
        checks["anchored"] = bool(data["anchor"]["anchored"])
    skipped = sorted(k for k, v in data.items() if isinstance(v, dict) and v.get("status") == "skipped")
    data["verdict"] = {
        "checks": checks,
        "all_checks_passed": bool(checks) and all(checks.values()),
        "skipped_sections": skipped,
    }
    return report
