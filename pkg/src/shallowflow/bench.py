"""Solver benchmark (ablated vs SFM at several strengths) and the alpha sweep.

Rows are aggregated over ``n_items x repeats`` solves. Item ``i`` uses class
``i mod K`` and its own RNG stream, so the ablated and SFM systems see the
same initial noise draw for a given (item, repeat).

``bench.csv`` holds only deterministic columns (counts and NFE-based rates)
and is byte-identical across reruns; wall-clock numbers go to a separate
timing file.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .condot import IsotropicGaussian, gaussian_w2
from .data import Dataset
from .models import SfmNets
from .pipeline import SampleConfig, baseline_sample, item_rng, sfm_sample, sfm_start

__all__ = [
    "BenchRow",
    "SweepRow",
    "BENCH_COLUMNS",
    "TIMING_COLUMNS",
    "SWEEP_COLUMNS",
    "run_bench",
    "run_sweep",
    "fit_isotropic",
    "write_bench_csv",
    "write_timing_csv",
    "write_sweep_csv",
    "read_sweep_selected",
]

BENCH_COLUMNS = ["system", "alpha", "solver", "rtol", "atol", "mean_nfe", "std_nfe", "speedup_rate_percent"]
TIMING_COLUMNS = ["system", "alpha", "solver", "mean_wall_time", "speedup_rate_percent"]
SWEEP_COLUMNS = ["alpha", "mean_t_tilde", "mean_sigma_tilde", "distribution_w2"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return f"{v:.6g}"


@dataclass(frozen=True)
class BenchRow:
    system: str
    alpha: float | None  # None for the ablated system
    solver: str
    rtol: float
    atol: float
    mean_nfe: float
    std_nfe: float
    mean_wall_time: float
    speedup_rate_percent: float  # NFE-based, vs the ablated row of the same solver
    wall_speedup_rate_percent: float


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    mean_t_tilde: float
    mean_sigma_tilde: float
    distribution_w2: float


def _rate(base: float, value: float) -> float:
    return 100.0 * (base - value) / base if base > 0 else 0.0


def _collect(fn, nets, cfg: SampleConfig, n_items: int, repeats: int, n_classes: int):
    nfe, wall = [], []
    for r in range(repeats):
        for i in range(n_items):
            _, res = fn(nets, i % n_classes, cfg, item_rng(cfg.seed, i, r))
            nfe.append(res.nfe)
            wall.append(res.wall_time)
    # math.fsum keeps the aggregate independent of summation order
    return math.fsum(nfe) / len(nfe), float(np.std(nfe)), math.fsum(wall) / len(wall)


def run_bench(
    sfm_nets: SfmNets,
    ablated_nets: SfmNets,
    solvers,
    alphas,
    n_items: int = 100,
    repeats: int = 5,
    base: SampleConfig = SampleConfig(),
) -> list[BenchRow]:
    """One ablated row and one SFM row per alpha, for every solver."""
    k = sfm_nets.config.n_classes
    rows = []
    for solver in solvers:
        cfg = SampleConfig(alpha=1.0, beta=base.beta, solver=solver, rtol=base.rtol, atol=base.atol, seed=base.seed)
        a_nfe, a_std, a_wall = _collect(baseline_sample, ablated_nets, cfg, n_items, repeats, k)
        rows.append(BenchRow("ablated", None, solver, cfg.rtol, cfg.atol, a_nfe, a_std, a_wall, 0.0, 0.0))
        for alpha in alphas:
            cfg_a = SampleConfig(alpha=alpha, beta=cfg.beta, solver=solver, rtol=cfg.rtol, atol=cfg.atol, seed=cfg.seed)
            nfe, std, wall = _collect(sfm_sample, sfm_nets, cfg_a, n_items, repeats, k)
            rows.append(BenchRow("sfm", alpha, solver, cfg.rtol, cfg.atol, nfe, std, wall, _rate(a_nfe, nfe), _rate(a_wall, wall)))
    return rows


def write_bench_csv(rows: list[BenchRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        for r in rows:
            w.writerow([r.system, _fmt(r.alpha), r.solver] + [_fmt(v) for v in (r.rtol, r.atol, r.mean_nfe, r.std_nfe, r.speedup_rate_percent)])


def write_timing_csv(rows: list[BenchRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMING_COLUMNS)
        for r in rows:
            w.writerow([r.system, _fmt(r.alpha), r.solver, _fmt(r.mean_wall_time), _fmt(r.wall_speedup_rate_percent)])


def fit_isotropic(samples: np.ndarray) -> IsotropicGaussian:
    """Per-element mean and pooled standard deviation of ``(n, ...)`` samples."""
    samples = np.asarray(samples, dtype=np.float64).reshape(len(samples), -1)
    return IsotropicGaussian(samples.mean(axis=0), float(np.sqrt(samples.var(axis=0).mean())))


def run_sweep(
    sfm_nets: SfmNets, dataset: Dataset, alphas, n_items: int = 200, base: SampleConfig = SampleConfig()
) -> tuple[list[SweepRow], float]:
    """Per-alpha start statistics and class-averaged W2 to the data; returns rows and the selected alpha."""
    k = sfm_nets.config.n_classes
    data_fit = [fit_isotropic(dataset.x1[dataset.labels == c]) for c in range(k)]
    rows = []
    for alpha in alphas:
        cfg = SampleConfig(alpha=alpha, beta=base.beta, solver=base.solver, rtol=base.rtol, atol=base.atol, seed=base.seed)
        t_tilde, sigma_tilde, samples = [], [], [[] for _ in range(k)]
        for i in range(n_items):
            label = i % k
            state, _ = sfm_start(sfm_nets, label, alpha, item_rng(cfg.seed, i))
            x, _ = sfm_sample(sfm_nets, label, cfg, item_rng(cfg.seed, i))
            t_tilde.append(float(state.t_tilde))
            sigma_tilde.append(math.sqrt(float(state.sigma_tilde_sq)))
            samples[label].append(x)
        w2 = [gaussian_w2(fit_isotropic(np.array(s)), data_fit[c]) for c, s in enumerate(samples) if len(s) > 1]
        rows.append(SweepRow(alpha, math.fsum(t_tilde) / n_items, math.fsum(sigma_tilde) / n_items, math.fsum(w2) / len(w2)))
    selected = min(rows, key=lambda r: r.distribution_w2).alpha
    return rows, selected


def write_sweep_csv(rows: list[SweepRow], selected: float, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# selected_alpha={_fmt(selected)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in (r.alpha, r.mean_t_tilde, r.mean_sigma_tilde, r.distribution_w2)])


def read_sweep_selected(path: str | Path) -> float:
    with open(path) as fh:
        first = fh.readline().strip()
    return float(first.split("=", 1)[1])
