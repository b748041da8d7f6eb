"""File outputs: CSV tables, JSON reports and SVG plots.

CSV files are comma-separated with a header row, LF line endings and floats
written with ``format(x, ".17g")``, so a value read back is bit-identical
and a replayed run produces byte-identical files. JSON reports are
key-sorted; ``created_at`` is their only non-deterministic field.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Mapping, Sequence
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

from mxm_frontlab.analysis import RateFit
from mxm_frontlab.errors import ValidationError
from mxm_frontlab.semiwave import SemiWaveSolution
from mxm_frontlab.simulator import Snapshot, Trajectory
from mxm_frontlab.types import FloatArray, JSONLike, PathLike

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TRAJECTORY_HEADER = ("t", "g", "h")
SNAPSHOT_HEADER = ("x", "u", "v")
PROFILE_HEADER = ("x", "phi1", "phi2")
CURVES_HEADER = ("t", "lower_h", "upper_h")

# --------------------------------------------------------------------------- #
# CSV
# --------------------------------------------------------------------------- #


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_csv(path: PathLike, header: Sequence[str], columns: Sequence[FloatArray]) -> Path:
    """Write equal-length float columns under ``header``."""
    p = Path(path)
    if len(header) != len(columns):
        raise ValueError("header and columns differ in length")
    sizes = {int(np.asarray(c).size) for c in columns}
    if len(sizes) > 1:
        raise ValueError(f"columns differ in length: {sorted(sizes)}")
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*(np.asarray(c, dtype=np.float64) for c in columns)):
            writer.writerow([_fmt(v) for v in row])
    return p


def read_csv(path: PathLike, header: Sequence[str]) -> dict[str, FloatArray]:
    """Read a float table written by ``write_csv``.

    Raises
    ------
    ValidationError
        Missing file, empty file, wrong header, or a malformed row; the
        message names the offending line.
    """
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"no such file: {p}")
    with p.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{p}: empty file (expected header {','.join(header)})")
    if tuple(rows[0]) != tuple(header):
        raise ValidationError(
            f"{p}:1: expected header {','.join(header)}, got {','.join(rows[0])}"
        )
    if len(rows) == 1:
        raise ValidationError(f"{p}: no data rows")
    data: list[list[float]] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValidationError(
                f"{p}:{lineno}: expected {len(header)} fields, got {len(row)}"
            )
        try:
            data.append([float(v) for v in row])
        except ValueError as exc:
            raise ValidationError(f"{p}:{lineno}: {exc}") from exc
    table = np.asarray(data, dtype=np.float64)
    return {name: table[:, i].copy() for i, name in enumerate(header)}


def write_trajectory_csv(path: PathLike, trajectory: Trajectory) -> Path:
    return write_csv(
        path, TRAJECTORY_HEADER, [trajectory.times, trajectory.g, trajectory.h]
    )


def read_trajectory_csv(path: PathLike) -> Trajectory:
    """Fronts-only trajectory; times must increase strictly."""
    cols = read_csv(path, TRAJECTORY_HEADER)
    t = cols["t"]
    if np.any(np.diff(t) <= 0.0):
        k = int(np.argmax(np.diff(t) <= 0.0))
        raise ValidationError(f"{path}:{k + 3}: times must increase strictly")
    return Trajectory(times=t, g=cols["g"], h=cols["h"])


def write_snapshot_csv(path: PathLike, snapshot: Snapshot) -> Path:
    return write_csv(path, SNAPSHOT_HEADER, [snapshot.x, snapshot.u, snapshot.v])


def write_profile_csv(path: PathLike, solution: SemiWaveSolution) -> Path:
    return write_csv(path, PROFILE_HEADER, [solution.x, solution.phi1, solution.phi2])


def write_curves_csv(
    path: PathLike, times: FloatArray, lower_h: FloatArray, upper_h: FloatArray
) -> Path:
    return write_csv(path, CURVES_HEADER, [times, lower_h, upper_h])


# --------------------------------------------------------------------------- #
# JSON report
# --------------------------------------------------------------------------- #


def to_jsonable(value: Any) -> JSONLike:
    """Plain JSON types; non-finite floats become None."""
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        return f if math.isfinite(f) else None
    if value is None or isinstance(value, str):
        return value
    if hasattr(value, "value") and isinstance(value.value, str):
        return value.value
    return str(value)


def build_report(
    command: str, config_hash: str, results: Mapping[str, Any]
) -> dict[str, JSONLike]:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_hash": config_hash,
        "results": to_jsonable(results),
        "created_at": datetime.now(tz=timezone.utc).isoformat(),
    }


def write_report(path: PathLike, report: Mapping[str, JSONLike]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False)
    p.write_text(text + "\n", encoding="utf-8")
    return p


# --------------------------------------------------------------------------- #
# SVG plots
# --------------------------------------------------------------------------- #


def _svg(fig: Figure, path: PathLike) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    # fixed ids and no date stamp keep replays byte-identical
    with rc_context({"svg.hashsalt": "frontlab"}):
        fig.savefig(p, format="svg", metadata={"Date": None})
    return p


def plot_fronts(
    path: PathLike,
    trajectory: Trajectory,
    fit: RateFit | None = None,
    curves: tuple[FloatArray, FloatArray, FloatArray] | None = None,
) -> Path:
    """h(t) and −g(t), with an optional fitted law and envelope fronts."""
    if trajectory.times.size == 0:
        raise ValidationError("cannot plot an empty trajectory")
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.add_subplot()
    t = trajectory.times
    ax.plot(t, trajectory.h, label="h(t)", lw=1.5)
    ax.plot(t, -trajectory.g, label="-g(t)", lw=1.0, ls="--")
    if fit is not None:
        lo, hi = fit.window
        tt = np.linspace(max(lo, 1e-12), hi, 200)
        label = f"{fit.law.value} fit"
        if fit.exponent is not None and fit.law.value == "power":
            label += f" (p = {fit.exponent:.3f})"
        ax.plot(tt, fit.predict(tt), label=label, lw=1.0, color="black")
    if curves is not None:
        ct, lower, upper = curves
        if np.any(np.isfinite(lower)):
            ax.plot(ct, lower, label="lower front", lw=0.8, color="tab:green")
        if np.any(np.isfinite(upper)):
            ax.plot(ct, upper, label="upper front", lw=0.8, color="tab:red")
    ax.set_xlabel("t")
    ax.set_ylabel("front position")
    ax.legend(loc="upper left")
    ax.grid(True, alpha=0.3)
    out = _svg(fig, path)
    logger.debug("wrote plot %s", out)
    return out


def plot_profiles(path: PathLike, solution: SemiWaveSolution) -> Path:
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.add_subplot()
    ax.plot(solution.x, solution.phi1, label="phi1")
    ax.plot(solution.x, solution.phi2, label="phi2", ls="--")
    ax.set_xlabel("x")
    ax.set_title(f"semi-wave profiles, c0 = {solution.c0:.6g}")
    ax.legend(loc="upper right")
    ax.grid(True, alpha=0.3)
    return _svg(fig, path)


__all__ = [
    "CURVES_HEADER",
    "PROFILE_HEADER",
    "SCHEMA_VERSION",
    "SNAPSHOT_HEADER",
    "TRAJECTORY_HEADER",
    "build_report",
    "plot_fronts",
    "plot_profiles",
    "read_csv",
    "read_trajectory_csv",
    "to_jsonable",
    "write_csv",
    "write_curves_csv",
    "write_profile_csv",
    "write_report",
    "write_snapshot_csv",
    "write_trajectory_csv",
]
