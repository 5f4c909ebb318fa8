"""Seeded experiment harness: scenes in, metric CSV rows out.

A run is fully described by an ExperimentConfig; its hash (over every field
that affects the numbers, so not the output directory) is stamped into each
CSV row, making any row reproducible from the row alone.  Scene seeds derive
from (config seed, run index) only, so experiments that differ in solver
settings still see byte-identical image pairs — the basis of every paired
comparison in the study designs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baseline import DEFAULT_STEP_SIZE, solve_centralized
from .datagen import make_scene_pair, procedural_panorama
from .factors import FactorParams
from .imaging import intrinsics_from_fov
from .metrics import (
    MetricRow,
    mean_uncertainty,
    normalized_rotational_error,
    per_level_error,
    write_metric_csv,
)
from .topology import TopologySpec

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "run_experiment",
    "sweep_parameter",
    "stable_csv_text",
    "FLAT_PARAMS",
    "SHARDED_PARAMS",
]

# The parameter sets used throughout the study designs.
FLAT_PARAMS = {"sigma_p": 1e-2, "sigma_d": 1e-1, "sigma_r": 1e-2}
SHARDED_PARAMS = {"sigma_p": 1e-2, "sigma_d": 1e-1, "sigma_r": 1e-4}


@dataclass(frozen=True)
class ExperimentConfig:
    topology: str
    size: int
    sigma_p: float
    sigma_d: float
    sigma_r: float
    iterations: int
    runs: int
    seed: int
    fov_degrees: float = 60.0
    max_angle_degrees: float = 1.0
    noise_sigma: float = 0.0
    damping: float = 0.0
    run_centralized: bool = False
    step_size: float = DEFAULT_STEP_SIZE
    pano_seed: int = 0
    output_dir: str = ""

    def __post_init__(self):
        if self.topology not in ("flat", "sharded"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.size < 1:
            raise ValueError("size must be positive")
        if self.topology == "sharded" and (self.size & (self.size - 1)) != 0:
            raise ValueError("sharded topology needs a power-of-two size")
        for name in ("sigma_p", "sigma_d", "sigma_r"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.iterations < 1 or self.runs < 1:
            raise ValueError("iterations and runs must be >= 1")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")

    @classmethod
    def standard(cls, topology: str, **overrides) -> "ExperimentConfig":
        """The study defaults for a topology, overridable field by field."""
        base = dict(FLAT_PARAMS if topology == "flat" else SHARDED_PARAMS)
        base.update(topology=topology, size=64, iterations=300, runs=20, seed=0)
        base.update(overrides)
        return cls(**base)

    def config_hash(self) -> str:
        semantic = dataclasses.asdict(self)
        semantic.pop("output_dir")
        blob = json.dumps(semantic, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def factor_params(self) -> FactorParams:
        return FactorParams(sigma_p=self.sigma_p, sigma_d=self.sigma_d,
                            sigma_r=self.sigma_r)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    summary: dict
    csv_path: Path = None
    summary_path: Path = None


_PANO_CACHE = {}


def _panorama(seed: int):
    if seed not in _PANO_CACHE:
        _PANO_CACHE[seed] = procedural_panorama(seed=seed)
    return _PANO_CACHE[seed]


def scene_seed(config: ExperimentConfig, run: int) -> int:
    """Stable per-run seed, shared by every config with the same base seed."""
    ss = np.random.SeedSequence(config.seed, spawn_key=(run,))
    return int(ss.generate_state(1)[0])


def scene_for_run(config: ExperimentConfig, run: int):
    K = intrinsics_from_fov(config.fov_degrees, config.size, config.size)
    return make_scene_pair(
        _panorama(config.pano_seed), K, config.size, config.size,
        config.max_angle_degrees, config.noise_sigma, scene_seed(config, run),
    )


def _gbp_rows(config, pair, run):
    graph = TopologySpec(config.topology, config.size, config.size,
                         config.factor_params()).build(damping=config.damping)
    graph.set_scene(pair.left, pair.right, pair.K)
    chash = config.config_hash()
    rows = []
    for _ in range(config.iterations):
        report = graph.sweep()
        levels = per_level_error(graph, pair.rotation) \
            if config.topology == "sharded" else ()
        rows.append(MetricRow(
            run_id=run,
            config_hash=chash,
            topology=config.topology,
            sweep=report.sweep,
            normalized_error=normalized_rotational_error(graph.frames, pair.rotation),
            mean_uncertainty=mean_uncertainty(graph),
            energy=report.energy,
            wall_ms=report.wall_ms,
            per_level=tuple(levels),
        ))
    return rows


def _centralized_rows(config, pair, run):
    start = time.perf_counter()
    trace = solve_centralized(pair.left, pair.right, pair.K,
                              step_size=config.step_size,
                              max_iters=config.iterations)
    ms_per_iter = (time.perf_counter() - start) * 1000.0 / config.iterations
    chash = config.config_hash()
    return [
        MetricRow(
            run_id=run,
            config_hash=chash,
            topology="centralized",
            sweep=i,
            normalized_error=normalized_rotational_error(
                trace.rotations[i], pair.rotation),
            mean_uncertainty=math.nan,  # a point estimate carries no belief
            energy=float(trace.energies[i]),
            wall_ms=ms_per_iter,
        )
        for i in range(1, config.iterations + 1)
    ]


def _summarize(config, rows):
    last = config.iterations
    out = {}
    for label in sorted({r.topology for r in rows}):
        finals = np.array([r.normalized_error for r in rows
                           if r.topology == label and r.sweep == last])
        q1, med, q3 = np.percentile(finals, [25, 50, 75])
        out[label] = {
            "runs": int(finals.size),
            "final_error_mean": float(finals.mean()),
            "final_error_median": float(med),
            "final_error_iqr": [float(q1), float(q3)],
        }
    return out


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute all seeded runs of one config; write CSV + summary if asked."""
    rows = []
    for run in range(config.runs):
        pair = scene_for_run(config, run)
        rows.extend(_gbp_rows(config, pair, run))
        if config.run_centralized:
            rows.extend(_centralized_rows(config, pair, run))
    summary = _summarize(config, rows)
    csv_path = summary_path = None
    if config.output_dir:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"{config.topology}_{config.config_hash()}"
        csv_path = out / f"metrics_{stem}.csv"
        summary_path = out / f"summary_{stem}.json"
        write_metric_csv(csv_path, rows)
        summary_path.write_text(json.dumps(
            {"config": json.loads(config.to_json()),
             "config_hash": config.config_hash(),
             "summary": summary},
            indent=2, sort_keys=True))
    return ExperimentResult(config, rows, summary, csv_path, summary_path)


def validate_sweep_field(name: str) -> None:
    if name not in {f.name for f in dataclasses.fields(ExperimentConfig)}:
        raise ValueError(f"unknown config field {name!r}")
    if name in ("topology", "output_dir", "seed"):
        raise ValueError(f"{name!r} cannot be swept")


def sweep_parameter(config: ExperimentConfig, name: str, values) -> dict:
    """One experiment per value of a single config field, with shared seeds."""
    validate_sweep_field(name)
    results = {}
    for value in values:
        results[value] = run_experiment(dataclasses.replace(config, **{name: value}))
    return results


def stable_csv_text(path) -> str:
    """CSV content with the timing column blanked, for byte comparisons."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    drop = header.index("wall_ms")
    out = []
    for line in lines:
        cells = line.split(",")
        cells[drop] = ""
        out.append(",".join(cells))
    return "\n".join(out) + "\n"
