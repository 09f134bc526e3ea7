"""Line-delimited trace/vocab file formats, validation, and report emission.

Formats are frozen and documented in FORMAT.md. Reals serialize as
shortest round-trip decimals, so write(read(write(x))) is byte-identical
and every value survives exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attractors import Projection
from .dynamics import MapSpec, NoiseSpec, SymbolicInput, Trajectory
from .glyph import Vocab
from .tension import TensionTrace

FORMAT_VERSION = 1
TRACE_SOURCES = ("simulated", "extracted")


@dataclass(frozen=True)
class Violation:
    line: int
    step: int | None
    field: str
    message: str

    def __str__(self) -> str:
        where = f"line {self.line}" + (f", step {self.step}" if self.step is not None else "")
        return f"{where}: {self.field}: {self.message}"


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, allow_nan=False, separators=(", ", ": ")) + "\n"


def _trace_header(trajectory: Trajectory) -> dict:
    header: dict = {
        "format_version": FORMAT_VERSION,
        "dim": trajectory.dim,
        "source": trajectory.source,
    }
    if trajectory.map_spec is not None:
        header["map_spec"] = trajectory.map_spec.to_dict()
    if trajectory.noise_spec is not None:
        header["noise_spec"] = trajectory.noise_spec.to_dict()
    if trajectory.seed is not None:
        header["seed"] = int(trajectory.seed)
    if trajectory.model_id is not None:
        header["model_id"] = trajectory.model_id
    return header


def write_trace(trajectory: Trajectory, path) -> None:
    """Write one header line plus one record line per state.

    Record k pairs state k with the input that produced it; record 0 is the
    initial state and carries input_id -1.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump_line(_trace_header(trajectory)))
        for k in range(trajectory.states.shape[0]):
            record: dict = {"step": k, "state": [float(v) for v in trajectory.states[k]]}
            if k == 0:
                record["input_id"] = -1
            else:
                inp = trajectory.inputs[k - 1]
                record["input_id"] = int(inp.id)
                if inp.text is not None:
                    record["input_text"] = inp.text
            fh.write(_dump_line(record))


def _parse_trace(path) -> tuple[dict | None, list[dict], list[Violation]]:
    path = Path(path)
    violations: list[Violation] = []
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        return None, [], [Violation(1, None, "header", "empty file")]

    def parse_json(line_no: int, text: str, what: str):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            violations.append(Violation(line_no, None, what, f"malformed JSON: {exc.msg}"))
            return None
        if not isinstance(obj, dict):
            violations.append(Violation(line_no, None, what, "expected a JSON object"))
            return None
        return obj

    header = parse_json(1, lines[0], "header")
    dim = None
    if header is not None:
        version = header.get("format_version")
        if version != FORMAT_VERSION:
            violations.append(Violation(1, None, "format_version", f"unknown version {version!r}, expected {FORMAT_VERSION}"))
        dim = header.get("dim")
        if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
            violations.append(Violation(1, None, "dim", f"dim must be a positive integer, got {dim!r}"))
            dim = None
        source = header.get("source")
        if source not in TRACE_SOURCES:
            violations.append(Violation(1, None, "source", f"source must be one of {TRACE_SOURCES}, got {source!r}"))
        for key, parser in (("map_spec", MapSpec.from_dict), ("noise_spec", NoiseSpec.from_dict)):
            if key in header:
                try:
                    parser(header[key])
                except Exception as exc:
                    violations.append(Violation(1, None, key, str(exc)))

    records: list[dict] = []
    prev_step = None
    for line_no, text in enumerate(lines[1:], start=2):
        if text.strip() == "":
            violations.append(Violation(line_no, None, "record", "blank line"))
            continue
        rec = parse_json(line_no, text, "record")
        if rec is None:
            continue
        idx = len(records)
        step = rec.get("step")
        if not isinstance(step, int) or isinstance(step, bool):
            violations.append(Violation(line_no, None, "step", f"step must be an integer, got {step!r}"))
            step = None
        else:
            if idx == 0 and step != 0:
                violations.append(Violation(line_no, step, "step", f"first step must be 0, got {step}"))
            if prev_step is not None and step is not None and step <= prev_step:
                violations.append(
                    Violation(line_no, step, "step", f"steps must be strictly increasing, got {step} after {prev_step}")
                )
            prev_step = step if step is not None else prev_step
        state = rec.get("state")
        if not isinstance(state, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in state):
            violations.append(Violation(line_no, step, "state", "state must be a list of numbers"))
        else:
            if dim is not None and len(state) != dim:
                violations.append(Violation(line_no, step, "state", f"state length {len(state)} != header dim {dim}"))
            if not all(math.isfinite(v) for v in state):
                violations.append(Violation(line_no, step, "state", "state contains non-finite values"))
        input_id = rec.get("input_id")
        if not isinstance(input_id, int) or isinstance(input_id, bool):
            violations.append(Violation(line_no, step, "input_id", f"input_id must be an integer, got {input_id!r}"))
        elif idx > 0 and input_id < 0:
            violations.append(Violation(line_no, step, "input_id", f"input_id must be >= 0 after record 0, got {input_id}"))
        text_field = rec.get("input_text")
        if text_field is not None and not isinstance(text_field, str):
            violations.append(Violation(line_no, step, "input_text", "input_text must be a string when present"))
        records.append(rec)

    if not records:
        violations.append(Violation(1, None, "records", "trace has no records"))
    return header, records, violations


def validate_trace(path) -> list[Violation]:
    """All format violations in a file; an empty list means a valid trace."""
    _, _, violations = _parse_trace(path)
    return violations


def read_trace(path) -> Trajectory:
    """Parse a trace file into a Trajectory, raising on the first violation."""
    header, records, violations = _parse_trace(path)
    if violations:
        raise ValueError(f"invalid trace file {path}: {violations[0]}")
    assert header is not None
    states = np.array([rec["state"] for rec in records], dtype=np.float64)
    inputs = tuple(
        SymbolicInput(id=rec["input_id"], text=rec.get("input_text"))
        for rec in records[1:]
    )
    map_spec = MapSpec.from_dict(header["map_spec"]) if "map_spec" in header else None
    noise_spec = NoiseSpec.from_dict(header["noise_spec"]) if "noise_spec" in header else None
    return Trajectory(
        states=states,
        inputs=inputs,
        seed=header.get("seed"),
        map_spec=map_spec,
        noise_spec=noise_spec,
        source=header["source"],
        model_id=header.get("model_id"),
    )


def write_vocab(vocab: Vocab, path) -> None:
    """One JSON object per line: id, text, embedding."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for i in range(len(vocab)):
            fh.write(
                _dump_line(
                    {
                        "id": int(vocab.ids[i]),
                        "text": vocab.texts[i],
                        "embedding": [float(v) for v in vocab.embeddings[i]],
                    }
                )
            )


def read_vocab(path) -> Vocab:
    path = Path(path)
    entries = []
    for line_no, text in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if text.strip() == "":
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid vocab file {path}, line {line_no}: {exc.msg}") from exc
        if not isinstance(obj, dict) or not {"id", "text", "embedding"} <= obj.keys():
            raise ValueError(f"invalid vocab file {path}, line {line_no}: need id, text, embedding")
        entries.append((obj["id"], obj["text"], obj["embedding"]))
    return Vocab.from_entries(entries)


@dataclass(eq=False)
class AnalysisReport:
    """Full analysis document plus the arrays needed for CSV/figure emission."""

    data: dict
    tension: TensionTrace | None = None
    projection: Projection | None = None
    projection_steps: np.ndarray | None = None
    centroids_2d: np.ndarray | None = None
    bound: float | None = None


def write_report(data: dict, path) -> None:
    path = Path(path)
    text = json.dumps(data, allow_nan=False, sort_keys=True, indent=2) + "\n"
    path.write_text(text, encoding="utf-8", newline="\n")


def read_report(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _write_csv(path: Path, header: str, rows) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def emit_report(report: AnalysisReport, out_dir) -> dict[str, Path]:
    """Write report.json, xi_trace.csv, pca.csv and the two SVG figures.

    pca.csv and the projection figure are skipped (with the status already
    recorded in the report) when no projection is available.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    report_path = out_dir / "report.json"
    write_report(report.data, report_path)
    paths["report"] = report_path

    if report.tension is not None:
        xi_path = out_dir / "xi_trace.csv"
        values = report.tension.values
        _write_csv(xi_path, "step,xi", ((str(k + 1), repr(float(v))) for k, v in enumerate(values)))
        paths["xi_csv"] = xi_path

    if report.projection is not None:
        proj = report.projection.projected
        steps = report.projection_steps
        if steps is None:
            steps = np.arange(proj.shape[0])
        pca_path = out_dir / "pca.csv"
        second = proj[:, 1] if proj.shape[1] > 1 else np.zeros(proj.shape[0])
        _write_csv(
            pca_path,
            "step,pc1,pc2",
            ((str(int(s)), repr(float(p1)), repr(float(p2))) for s, p1, p2 in zip(steps, proj[:, 0], second)),
        )
        paths["pca_csv"] = pca_path

    _emit_figures(report, out_dir, paths)
    return paths


def _emit_figures(report: AnalysisReport, out_dir: Path, paths: dict[str, Path]) -> None:
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "rcxi"

    if report.tension is not None:
        fig, ax = plt.subplots(figsize=(7, 3.2))
        values = report.tension.values
        steps = np.arange(1, values.size + 1)
        if values.size > 20_000:
            keep = np.floor(np.arange(20_000) * (values.size / 20_000)).astype(int)
            values = values[keep]
            steps = steps[keep]
        ax.plot(steps, values, lw=0.8, color="tab:blue", label="xi")
        if report.bound is not None:
            ax.axhline(np.sqrt(report.bound), color="tab:red", ls="--", lw=1.0, label="bound (rms)")
        ax.set_xlabel("step")
        ax.set_ylabel("xi")
        ax.set_title("Tension over time")
        ax.legend(loc="upper right", fontsize=8)
        fig.tight_layout()
        fig_path = out_dir / "fig_xi.svg"
        fig.savefig(fig_path, metadata={"Date": None})
        plt.close(fig)
        paths["xi_fig"] = fig_path

    if report.projection is not None:
        proj = report.projection.projected
        if proj.shape[0] > 4000:
            # keep the vector figure light; CSVs carry the full projection
            keep = np.floor(np.arange(4000) * (proj.shape[0] / 4000)).astype(int)
            proj = proj[keep]
        fig, ax = plt.subplots(figsize=(5, 5))
        second = proj[:, 1] if proj.shape[1] > 1 else np.zeros(proj.shape[0])
        ax.plot(proj[:, 0], second, lw=0.4, alpha=0.5, color="tab:blue")
        ax.scatter(proj[:, 0], second, s=4, color="tab:blue", alpha=0.6)
        if report.centroids_2d is not None and len(report.centroids_2d):
            cent = np.atleast_2d(report.centroids_2d)
            ax.scatter(cent[:, 0], cent[:, 1] if cent.shape[1] > 1 else np.zeros(len(cent)),
                       marker="x", s=80, color="tab:red", label="centroids")
            ax.legend(loc="upper right", fontsize=8)
        ax.set_xlabel("PC1")
        ax.set_ylabel("PC2")
        ax.set_title("Projected trajectory")
        ax.set_aspect("equal", adjustable="datalim")
        fig.tight_layout()
        fig_path = out_dir / "fig_pca.svg"
        fig.savefig(fig_path, metadata={"Date": None})
        plt.close(fig)
        paths["pca_fig"] = fig_path
