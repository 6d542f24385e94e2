"""Deterministic CSV/JSON/PGM writers for estimates and trajectories.

CSV floats use '.' as the decimal separator and 17 significant digits, which
round-trips IEEE doubles exactly; JSON is dumped with sorted keys.  Rerunning
a command with the same config and seed reproduces every output byte.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .tasks import rescale_unit


def format_float(value: float) -> str:
    return f"{float(value):.17g}"


def _format_cell(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def report_to_dict(report) -> dict:
    return {
        "total": report.total,
        "per_dim": [float(v) for v in report.per_dim],
        "std_error": report.std_error,
        "n_snr_draws": report.n_snr_draws,
        "n_eps_draws": report.n_eps_draws,
        "n_samples": report.n_samples,
        "estimator_kind": report.estimator_kind,
        "alpha_interval": list(report.alpha_interval),
    }


def write_report_csv(path, reports, ids=None) -> None:
    """One row per report: id, total, std_error."""
    if ids is None:
        ids = range(len(reports))
    rows = [(i, r.total, r.std_error) for i, r in zip(ids, reports)]
    write_csv(path, ["id", "total", "std_error"], rows)


def write_pgm(path, image) -> None:
    """8-bit binary portable graymap, row-major, min-max rescaled."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {image.shape}")
    levels = np.rint(rescale_unit(image.ravel()) * 255).astype(np.uint8).reshape(image.shape)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + levels.tobytes())


def write_trajectory_csv(path, trajectory) -> None:
    """Rows of (step, alpha, state components); batch states are flattened."""
    states = trajectory.states.reshape(trajectory.states.shape[0], -1)
    header = ["step", "alpha"] + [f"state_{j}" for j in range(states.shape[1])]
    rows = [
        (i, trajectory.alphas[i], *states[i]) for i in range(trajectory.alphas.shape[0])
    ]
    write_csv(path, header, rows)
