"""Evaluation quantities and the CSV row format shared by all solvers.

The headline number is the normalized rotational error: the mean geodesic
distance of the per-variable estimates to ground truth, divided by the
ground-truth magnitude, so 1.0 means "no progress from identity" and 0.0 means
solved, independent of how large the true rotation was.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "normalized_rotational_error",
    "per_level_error",
    "mean_uncertainty",
    "MetricRow",
    "CSV_FIELDS",
    "write_metric_csv",
    "read_metric_csv",
]

MAX_LEVELS = 8

CSV_FIELDS = (
    ["run_id", "config_hash", "topology", "sweep", "normalized_error"]
    + [f"per_level_error_L{i}" for i in range(1, MAX_LEVELS + 1)]
    + ["mean_uncertainty", "energy", "wall_ms"]
)


def _batch_angle(rotations, target):
    """Geodesic angle of each rotation to the target via the trace identity."""
    tr = np.einsum("nij,ij->n", rotations, target)
    return np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))


def normalized_rotational_error(estimates, ground_truth) -> float:
    """Mean geodesic error of the estimates, in units of the true magnitude."""
    estimates = np.asarray(estimates, dtype=np.float64)
    if estimates.ndim == 2:
        estimates = estimates[None]
    ground_truth = np.asarray(ground_truth, dtype=np.float64)
    magnitude = float(_batch_angle(np.eye(3)[None], ground_truth)[0])
    if magnitude == 0.0:
        raise ValueError("ground-truth rotation must be nonzero")
    return float(np.mean(_batch_angle(estimates, ground_truth))) / magnitude


def per_level_error(graph, ground_truth) -> np.ndarray:
    """The same normalized error restricted to each pyramid level in turn."""
    levels = graph.levels
    out = np.empty(int(levels.max()) + 1)
    for lvl in range(out.shape[0]):
        members = graph.frames[levels == lvl]
        if members.shape[0] == 0:
            raise ValueError(f"no variables at level {lvl}")
        out[lvl] = normalized_rotational_error(members, ground_truth)
    return out


def mean_uncertainty(graph) -> float:
    """Mean Frobenius norm of the belief covariances across all variables."""
    lams = np.asarray(graph.belief_lam, dtype=np.float64)
    try:
        np.linalg.cholesky(lams)
    except np.linalg.LinAlgError as exc:
        raise ValueError("belief precision must be positive definite") from exc
    covs = np.linalg.inv(lams)
    return float(np.mean(np.linalg.norm(covs, ord="fro", axis=(1, 2))))


@dataclass(frozen=True)
class MetricRow:
    """One solver iteration of one run, self-describing via the config hash."""

    run_id: int
    config_hash: str
    topology: str
    sweep: int
    normalized_error: float
    mean_uncertainty: float
    energy: float
    wall_ms: float
    per_level: tuple = ()

    def __post_init__(self):
        if len(self.per_level) > MAX_LEVELS:
            raise ValueError(f"at most {MAX_LEVELS} pyramid levels supported")
        object.__setattr__(self, "per_level", tuple(float(x) for x in self.per_level))

    def as_record(self) -> dict:
        rec = {
            "run_id": str(self.run_id),
            "config_hash": self.config_hash,
            "topology": self.topology,
            "sweep": str(self.sweep),
            "normalized_error": repr(float(self.normalized_error)),
            "mean_uncertainty": repr(float(self.mean_uncertainty)),
            "energy": repr(float(self.energy)),
            "wall_ms": repr(float(self.wall_ms)),
        }
        for i in range(MAX_LEVELS):
            key = f"per_level_error_L{i + 1}"
            rec[key] = repr(self.per_level[i]) if i < len(self.per_level) else ""
        return rec


def write_metric_csv(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_record())


def read_metric_csv(path) -> list:
    """Rows back as MetricRow values (empty level cells dropped)."""
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_FIELDS:
            raise ValueError(f"unexpected CSV header in {path}")
        for rec in reader:
            levels = []
            for i in range(MAX_LEVELS):
                cell = rec[f"per_level_error_L{i + 1}"]
                if cell:
                    levels.append(float(cell))
            out.append(MetricRow(
                run_id=int(rec["run_id"]),
                config_hash=rec["config_hash"],
                topology=rec["topology"],
                sweep=int(rec["sweep"]),
                normalized_error=float(rec["normalized_error"]),
                mean_uncertainty=float(rec["mean_uncertainty"]),
                energy=float(rec["energy"]),
                wall_ms=float(rec["wall_ms"]),
                per_level=tuple(levels),
            ))
    return out
