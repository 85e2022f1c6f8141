"""Render static figures from the twoscale analysis CSVs.

Three figure kinds, one per CSV schema:

* ``coarse_traj`` — per-individual overlay of true vs estimated coarse
  trajectories, one subplot per state dimension, from ``coarse_traj.csv``
  (columns ``d,t,dim,true,estimated``).
* ``fine_traj`` — the same at the fine scale for one chosen coarse step,
  from ``fine_traj.csv`` (columns ``d,t,k,dim,true,estimated``).
* ``trace`` — a grid of covariance trace panels (individuals x dimensions,
  plus one row for the shared fine-scale target) from ``trace.csv``
  (columns ``target,d,dim,iteration,value``).

Rendering never modifies its inputs, and output bytes are deterministic for
identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

DPI = 120
_METADATA = {"Software": "plotkit"}

TRACE_TARGET_FINE = "fine_process"
TRACE_TARGET_COARSE = "coarse_process"

_REQUIRED_COLUMNS = {
    "coarse_traj": ["d", "t", "dim", "true", "estimated"],
    "fine_traj": ["d", "t", "k", "dim", "true", "estimated"],
    "trace": ["target", "d", "dim", "iteration", "value"],
}


class SchemaError(Exception):
    """The CSV does not conform to the expected schema."""


@dataclass(frozen=True)
class FigureRequest:
    """One rendering job: a kind, an input CSV, an output image path, and
    optional individual / coarse-step filters."""

    kind: str
    csv_path: Path
    out_path: Path
    individual: int | None = None
    coarse_step: int | None = None


def _load(csv_path, kind: str) -> pd.DataFrame:
    if kind not in _REQUIRED_COLUMNS:
        raise ValueError(f"unknown figure kind {kind!r}")
    try:
        frame = pd.read_csv(csv_path)
    except pd.errors.EmptyDataError as exc:
        raise SchemaError(f"{csv_path}: empty file") from exc
    for column in _REQUIRED_COLUMNS[kind]:
        if column not in frame.columns:
            raise SchemaError(f"{csv_path}: missing column {column!r}")
    if frame.empty:
        raise SchemaError(f"{csv_path}: no data rows")
    return frame


def _suffixed(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}_{tag}{path.suffix or '.png'}")


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=DPI, metadata=_METADATA)
    plt.close(fig)
    return path


def _overlay_figure(frame: pd.DataFrame, x_column: str, title: str):
    dims = sorted(frame["dim"].unique())
    fig, axes = plt.subplots(
        len(dims), 1, figsize=(7, 2.2 * len(dims)), sharex=True, squeeze=False
    )
    for ax, dim in zip(axes[:, 0], dims):
        sub = frame[frame["dim"] == dim].sort_values(x_column)
        ax.plot(sub[x_column], sub["true"], color="tab:blue", lw=1.6, label="true")
        ax.plot(
            sub[x_column],
            sub["estimated"],
            color="tab:orange",
            lw=1.4,
            ls="--",
            label="estimated",
        )
        ax.set_ylabel(f"dim {dim}")
        ax.grid(True, alpha=0.3)
    axes[0, 0].legend(loc="upper right", fontsize=8)
    axes[-1, 0].set_xlabel(x_column)
    fig.suptitle(title)
    fig.tight_layout(rect=(0, 0, 1, 0.96))
    return fig


def _render_trajectories(req: FigureRequest, frame: pd.DataFrame, x_column: str) -> list:
    if req.kind == "fine_traj":
        if req.coarse_step is None:
            raise SchemaError("fine_traj figures need a coarse step (--t)")
        frame = frame[frame["t"] == req.coarse_step]
        if frame.empty:
            raise SchemaError(f"{req.csv_path}: no rows for coarse step t={req.coarse_step}")
    individuals = sorted(frame["d"].unique())
    if req.individual is not None:
        if req.individual not in individuals:
            raise SchemaError(f"{req.csv_path}: no rows for individual d={req.individual}")
        individuals = [req.individual]
    multi = len(individuals) > 1
    written = []
    for d in individuals:
        sub = frame[frame["d"] == d]
        title = f"individual d={d}"
        if req.kind == "fine_traj":
            title += f", coarse step t={req.coarse_step}"
        fig = _overlay_figure(sub, x_column, title)
        out = _suffixed(req.out_path, f"d{d}") if multi else req.out_path
        written.append(_save(fig, out))
    return written


def _render_trace(req: FigureRequest, frame: pd.DataFrame) -> list:
    coarse = frame[frame["target"] == TRACE_TARGET_COARSE]
    fine = frame[frame["target"] == TRACE_TARGET_FINE]
    if coarse.empty and fine.empty:
        raise SchemaError(
            f"{req.csv_path}: no rows with target "
            f"{TRACE_TARGET_COARSE!r} or {TRACE_TARGET_FINE!r}"
        )
    rows = []  # (label, per-dim frame source)
    if not coarse.empty:
        individuals = sorted(coarse["d"].astype(int).unique())
        if req.individual is not None:
            if req.individual not in individuals:
                raise SchemaError(f"{req.csv_path}: no rows for individual d={req.individual}")
            individuals = [req.individual]
        for d in individuals:
            rows.append((f"coarse d={d}", coarse[coarse["d"].astype(int) == d]))
    if not fine.empty and req.individual is None:
        rows.append(("fine (shared)", fine))
    dims = sorted(frame["dim"].unique())
    fig, axes = plt.subplots(
        len(rows),
        len(dims),
        figsize=(3.2 * len(dims), 1.9 * len(rows)),
        sharex=True,
        squeeze=False,
    )
    for i, (label, sub) in enumerate(rows):
        for j, dim in enumerate(dims):
            ax = axes[i, j]
            series = sub[sub["dim"] == dim].sort_values("iteration")
            ax.plot(series["iteration"], series["value"], color="tab:blue", lw=0.8)
            ax.set_title(f"{label}, dim {dim}", fontsize=8)
            ax.grid(True, alpha=0.3)
    for ax in axes[-1]:
        ax.set_xlabel("iteration", fontsize=8)
    fig.tight_layout()
    return [_save(fig, req.out_path)]


def render(req: FigureRequest) -> list:
    """Render one request; returns the list of written image paths.

    Trajectory kinds produce one image per individual (the output name gains
    a ``_d<N>`` suffix when more than one is written); the trace kind
    produces a single grid image.
    """
    frame = _load(req.csv_path, req.kind)
    if req.kind == "coarse_traj":
        return _render_trajectories(req, frame, "t")
    if req.kind == "fine_traj":
        return _render_trajectories(req, frame, "k")
    return _render_trace(req, frame)
