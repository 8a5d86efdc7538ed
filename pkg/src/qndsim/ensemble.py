"""Trajectory ensembles: collapse statistics, outcome histograms and k-sweeps."""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fockspace import DensityMatrix, StateVector
from .sme import NumericalBlowupError, SmeParams, TrajectoryResult, simulate_trajectory

log = logging.getLogger(__name__)

COLLAPSE_VAR = 0.1
MAX_FAILURE_FRACTION = 0.05


class EnsembleFailure(RuntimeError):
    """Too many trajectories in an ensemble blew up."""


def worker_count() -> int:
    env = os.environ.get("TOOL_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class EnsembleStats:
    times: np.ndarray
    mean_var_n: np.ndarray
    stderr_var_n: np.ndarray
    mean_n: np.ndarray
    stderr_mean_n: np.ndarray
    outcome_histogram: dict[int, int]
    n_traj: int
    n_failed: int
    params: SmeParams
    base_seed: int = 0
    failed_seeds: list[int] = field(default_factory=list)

    @property
    def n_collapsed(self) -> int:
        return sum(self.outcome_histogram.values())

    def at(self, t: float) -> tuple[float, float]:
        """Mean variance and its standard error at the sample nearest ``t``."""
        i = int(np.argmin(np.abs(self.times - t)))
        return float(self.mean_var_n[i]), float(self.stderr_var_n[i])

    def csv_text(self) -> str:
        lines = ["t,mean_var_n,stderr_var_n,mean_n,stderr_mean_n"]
        for row in zip(self.times, self.mean_var_n, self.stderr_var_n, self.mean_n, self.stderr_mean_n):
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "n_traj": self.n_traj,
            "n_failed": self.n_failed,
            "failed_seeds": self.failed_seeds,
            "n_collapsed": self.n_collapsed,
            "base_seed": self.base_seed,
            "collapse_var_threshold": COLLAPSE_VAR,
            "outcome_histogram": {str(k): v for k, v in sorted(self.outcome_histogram.items())},
            "params": self.params.to_dict(),
            "times": self.times.tolist(),
            "mean_var_n": self.mean_var_n.tolist(),
            "stderr_var_n": self.stderr_var_n.tolist(),
        }


@dataclass
class KSweepResult:
    k_values: np.ndarray
    mean_var_at_T: np.ndarray
    stderr: np.ndarray
    T: float
    n_traj: int

    @property
    def k_best(self) -> float:
        return float(self.k_values[int(np.argmin(self.mean_var_at_T))])

    def csv_text(self) -> str:
        lines = ["k,mean_var_at_T,stderr"]
        for row in zip(self.k_values, self.mean_var_at_T, self.stderr):
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "T": self.T,
            "n_traj": self.n_traj,
            "k_values": self.k_values.tolist(),
            "mean_var_at_T": self.mean_var_at_T.tolist(),
            "stderr": self.stderr.tolist(),
            "k_best": self.k_best,
        }


def _one(initial, p: SmeParams, method: str) -> TrajectoryResult | NumericalBlowupError:
    try:
        return simulate_trajectory(initial, p, method=method)
    except NumericalBlowupError as exc:
        return exc


def run_ensemble(
    initial: StateVector | DensityMatrix,
    p: SmeParams,
    n_traj: int,
    base_seed: int = 0,
    workers: int | None = None,
    method: str = "kraus",
) -> EnsembleStats:
    """Run ``n_traj`` trajectories with seeds ``base_seed + i`` and aggregate them.

    Results are reduced in seed order, so the output does not depend on the
    number of workers. Statistics refer to the first oscillator mode.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    workers = worker_count() if workers is None else workers
    seeds = [base_seed + i for i in range(n_traj)]
    params = [p.with_(seed=s) for s in seeds]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda q: _one(initial, q, method), params))
    else:
        results = [_one(initial, q, method) for q in params]

    good = [r for r in results if isinstance(r, TrajectoryResult)]
    failed = [s for s, r in zip(seeds, results) if not isinstance(r, TrajectoryResult)]
    if failed:
        log.warning("%d of %d trajectories blew up (seeds %s)", len(failed), n_traj, failed[:10])
    if len(failed) > MAX_FAILURE_FRACTION * n_traj:
        raise EnsembleFailure(f"{len(failed)} of {n_traj} trajectories failed")

    var = np.array([r.var_n[0] for r in good])
    mean = np.array([r.mean_n[0] for r in good])
    n_ok = len(good)
    scale = math.sqrt(n_ok) if n_ok > 1 else math.inf
    ddof = 1 if n_ok > 1 else 0
    histogram: dict[int, int] = {}
    for r in good:
        if r.var_n[0, -1] < COLLAPSE_VAR:
            level = int(round(r.mean_n[0, -1]))
            histogram[level] = histogram.get(level, 0) + 1
    return EnsembleStats(
        times=good[0].times.copy(),
        mean_var_n=np.maximum(var.mean(axis=0), 0.0),
        stderr_var_n=var.std(axis=0, ddof=ddof) / scale,
        mean_n=mean.mean(axis=0),
        stderr_mean_n=mean.std(axis=0, ddof=ddof) / scale,
        outcome_histogram=dict(sorted(histogram.items())),
        n_traj=n_traj,
        n_failed=len(failed),
        params=p,
        base_seed=base_seed,
        failed_seeds=failed,
    )


def default_k_grid(points: int = 7, low: float = 1 / 8, high: float = 8.0) -> np.ndarray:
    return np.geomspace(low, high, points)


def k_sweep(
    initial: StateVector | DensityMatrix,
    p_template: SmeParams,
    k_values,
    n_traj: int,
    base_seed: int = 0,
    workers: int | None = None,
) -> KSweepResult:
    """Ensemble-mean variance after a measurement time ``2 pi / mu`` for each ``k``.

    Every ``k`` point reuses the same seeds, so the points share noise paths.
    """
    k_values = np.asarray(k_values, dtype=float)
    if k_values.size == 0:
        raise ValueError("k_values must be non-empty")
    if np.any(k_values < 0) or np.any(np.diff(k_values) <= 0):
        raise ValueError("k_values must be non-negative and strictly increasing")
    T = 2 * math.pi / p_template.mu
    steps = int(math.floor(T / p_template.dt + 1e-9))
    stride = math.gcd(steps, p_template.record_stride) or 1
    means, errs = [], []
    for k in k_values:
        p = p_template.with_(k=float(k), t_final=T, record_stride=stride)
        stats = run_ensemble(initial, p, n_traj, base_seed=base_seed, workers=workers)
        means.append(stats.mean_var_n[-1])
        errs.append(stats.stderr_var_n[-1])
        log.info("k=%.4g: <Var n>(T)=%.4g +- %.2g", k, means[-1], errs[-1])
    return KSweepResult(k_values, np.array(means), np.array(errs), T, n_traj)


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
