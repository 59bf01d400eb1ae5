"""Training step and samplers for the SFM and ablated systems.

One training step of the SFM system, in order:

1. run the weak generator and the head;
2. coarse loss on ``x_g``;
3. detached projection of ``x_h`` onto ``x1`` giving ``(t_h, sigma_h^2)``;
4. rescale by ``delta`` (strength 1), draw ``x0`` and build the start point;
5. scalar losses on the predicted time / log-variance and the ``mu`` loss on
   the rescaled ``x_h``;
6. sample ``u``, schedule it, form the second-segment state and target, map
   to global time and evaluate the vector field; CFM loss;
7. backpropagate the sum and take an Adam step.

The ablated system keeps the generator, head and coarse loss but trains a
standard CondOT flow from pure noise with ``x_h`` as an extra condition.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import losses as L
from .condot import PathConfig, condot_flow, condot_vf
from .data import Dataset
from .errors import DivergenceError, DomainError
from .models import SfmHeadOutput, SfmNets, cfg_combine, class_condition
from .nn import Adam
from .ode import SolveResult, SolverKind, solve
from .piecewise import TimeScheduler, schedule_time, segment_point, segment_vf
from .transform import IntermediateState, build_intermediate, delta_rescale, noise_coefficient, project_onto_path

__all__ = [
    "TrainConfig",
    "SampleConfig",
    "StepNoise",
    "PathStats",
    "compute_loss",
    "train_step",
    "train",
    "item_rng",
    "head_statistics",
    "sfm_start",
    "sfm_sample",
    "baseline_sample",
    "write_loss_csv",
    "LOSS_COLUMNS",
]

log = logging.getLogger(__name__)

LOSS_COLUMNS = ["epoch", "step", "coarse", "t", "sigma", "mu", "cfm", "total"]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 64
    learning_rate: float = 2e-3
    sigma_min: float = 1e-4
    scheduler: str = "identity"
    cfg_dropout_prob: float = 0.1
    seed: int = 0
    start_grad: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise DomainError("epochs, batch_size and learning_rate must be positive")
        if not 0.0 <= self.cfg_dropout_prob < 1.0:
            raise DomainError("cfg_dropout_prob must lie in [0, 1)")
        TimeScheduler(self.scheduler)

    @property
    def path(self) -> PathConfig:
        return PathConfig(self.sigma_min)


@dataclass(frozen=True)
class SampleConfig:
    alpha: float = 1.0
    beta: float = 0.0
    solver: str = "dopri5"
    rtol: float = 1e-5
    atol: float = 1e-5
    fixed_steps: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 1.0:
            raise DomainError(f"alpha must be >= 1, got {self.alpha}")
        if self.beta < 0:
            raise DomainError("beta must be non-negative")
        SolverKind(self.solver)


@dataclass(frozen=True)
class StepNoise:
    """All randomness consumed by one training step."""

    x0: np.ndarray  # (B, N, F) standard normal
    u: np.ndarray  # (B,) uniform
    drop: np.ndarray  # (B,) condition dropped for CFG

    @classmethod
    def draw(cls, rng: np.random.Generator, shape: tuple[int, ...], p_drop: float) -> "StepNoise":
        x0 = rng.standard_normal(shape)
        u = rng.uniform(size=shape[0])
        drop = rng.uniform(size=shape[0]) < p_drop
        return cls(x0, u, drop)


@dataclass(frozen=True)
class PathStats:
    """Detached per-item statistics of one SFM step."""

    t_h: np.ndarray
    sigma_h_sq: np.ndarray
    x_scale: np.ndarray
    t_tilde: np.ndarray
    sigma_tilde_sq: np.ndarray


def _col(v: np.ndarray) -> np.ndarray:
    return np.asarray(v)[:, None, None]


def compute_loss(
    nets: SfmNets,
    x1: np.ndarray,
    labels: np.ndarray,
    noise: StepNoise,
    cfg: TrainConfig,
    stats: PathStats | None = None,
    backward: bool = True,
) -> tuple[L.LossBreakdown, PathStats | None]:
    """Forward (and optionally backward) pass of one training step.

    ``stats`` overrides the detached statistics; passing the ones returned by
    a previous call evaluates the same stop-gradient objective at new
    parameters, which is what a finite-difference check needs.
    Gradients accumulate into the networks; call ``nets.zero_grad()`` first.
    """
    mcfg = nets.config
    path = cfg.path
    x1 = np.asarray(x1, dtype=np.float64)
    hidden, x_g = nets.generate(np.eye(mcfg.n_classes)[labels])
    head = nets.head_out(hidden)
    cond_v = class_condition(labels, mcfg.n_classes, null=noise.drop)
    l_coarse = L.coarse_loss(x_g, x1)

    if mcfg.system == "ablated":
        t_s, _ = schedule_time(noise.u, 0.0, cfg.scheduler)
        x_t = (1.0 - _col(t_s)) * noise.x0 + _col(t_s) * (x1 + path.sigma_min * noise.x0)
        u_t = condot_vf(noise.x0, x1, path)
        v = nets.velocity(x_t, t_s, cond_v, head.x_h)
        parts = L.total_sfm_loss(l_coarse, 0.0, 0.0, 0.0, L.cfm_loss(v, u_t))
        if backward:
            _, g_xh = nets.velocity_backward(L.cfm_loss_grad(v, u_t))
            g_hidden = nets.head_backward(g_xh, np.zeros(len(labels)), np.zeros(len(labels)))
            nets.generate_backward(g_hidden, L.coarse_loss_grad(x_g, x1))
        return parts, None

    if stats is None:
        proj = project_onto_path(head.x_h, x1)
        r = delta_rescale(proj.t_h, np.sqrt(proj.sigma_h_sq), 1.0, path)
        stats = PathStats(
            *(np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in (proj.t_h, proj.sigma_h_sq, r.x_scale, r.t_tilde, r.sigma_tilde_sq))
        )

    x_tilde = _col(stats.x_scale) * head.x_h
    coef = np.atleast_1d(noise_coefficient(stats.t_tilde, stats.sigma_tilde_sq, path))
    x_start = _col(coef) * noise.x0 + x_tilde
    log_var_tilde = L.log_variance(stats.sigma_tilde_sq)
    l_t, l_sigma = L.scalar_losses(head.t_hat, stats.t_tilde, head.log_var_hat, log_var_tilde)
    l_mu = L.mu_loss(x_tilde, x1, stats.t_tilde)

    t_s, t = schedule_time(noise.u, stats.t_tilde, cfg.scheduler)
    x_t = segment_point(x_start, x1, noise.x0, t_s, path)
    u_t = segment_vf(x_start, x1, noise.x0, stats.t_tilde, path)
    v = nets.velocity(x_t, t, cond_v, head.x_h if mcfg.coarse_condition else None)
    l_cfm = L.cfm_loss(v, u_t)
    parts = L.total_sfm_loss(l_coarse, l_t, l_sigma, l_mu, l_cfm)

    if backward:
        g_v = L.cfm_loss_grad(v, u_t)
        g_xt, g_xh_cond = nets.velocity_backward(g_v)
        g_tilde = L.mu_loss_grad(x_tilde, x1, stats.t_tilde)
        if cfg.start_grad:
            # x_t and u_t both depend on the start point
            g_tilde = g_tilde + _col(1.0 - t_s) * g_xt + g_v / _col(1.0 - stats.t_tilde)
        g_xh = _col(stats.x_scale) * g_tilde
        if g_xh_cond is not None:
            g_xh = g_xh + g_xh_cond
        g_t, g_lv = L.scalar_losses_grad(head.t_hat, stats.t_tilde, head.log_var_hat, log_var_tilde)
        g_hidden = nets.head_backward(g_xh, g_t, g_lv)
        nets.generate_backward(g_hidden, L.coarse_loss_grad(x_g, x1))
    return parts, stats


def train_step(
    nets: SfmNets,
    batch: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    rng: np.random.Generator,
    optimizer: Adam,
) -> L.LossBreakdown:
    """One optimisation step on ``batch = (labels, x1)``."""
    labels, x1 = batch
    if len(labels) == 0:
        raise DomainError("empty batch")
    noise = StepNoise.draw(rng, np.shape(x1), cfg.cfg_dropout_prob)
    nets.zero_grad()
    parts, _ = compute_loss(nets, x1, labels, noise, cfg)
    optimizer.step(nets.gradients())
    for _, net in nets.named_nets():
        net.check_finite()
    return parts


def train(
    nets: SfmNets,
    dataset: Dataset,
    cfg: TrainConfig,
    on_epoch: Callable[[int, int, L.LossBreakdown], None] | None = None,
) -> list[L.LossBreakdown]:
    """Run ``cfg.epochs`` epochs of shuffled mini-batches; return per-epoch mean losses."""
    rng = np.random.default_rng([cfg.seed, 1])
    optimizer = Adam(nets.parameters(), lr=cfg.learning_rate)
    history = []
    step = 0
    n = len(dataset)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        acc = np.zeros(6)
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            try:
                parts = train_step(nets, (dataset.labels[idx], dataset.x1[idx]), cfg, rng, optimizer)
            except DivergenceError as exc:
                raise DivergenceError(f"epoch {epoch}, step {step + 1}: {exc}") from exc
            step += 1
            n_batches += 1
            acc += parts.as_row()
        mean = L.LossBreakdown(*(acc / n_batches))
        history.append(mean)
        log.info("epoch %d step %d total %.6g", epoch, step, mean.total)
        if on_epoch is not None:
            on_epoch(epoch, step, mean)
    return history


def write_loss_csv(rows: list[tuple[int, int, L.LossBreakdown]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOSS_COLUMNS)
        for epoch, step, parts in rows:
            w.writerow([epoch, step] + [f"{v:.6g}" for v in parts.as_row()])


# ---------------------------------------------------------------------------
# inference


def item_rng(seed: int, index: int, repeat: int = 0) -> np.random.Generator:
    """Independent stream for item ``index`` (and benchmark repeat) of a run seeded with ``seed``."""
    return np.random.default_rng([seed, 2, repeat, index])


def head_statistics(nets: SfmNets, labels) -> SfmHeadOutput:
    """Head outputs for a batch of class labels (deterministic)."""
    labels = np.atleast_1d(labels)
    hidden, _ = nets.generate(np.eye(nets.config.n_classes)[labels])
    return nets.head_out(hidden)


def sfm_start(
    nets: SfmNets, label: int, alpha: float, rng: np.random.Generator, path: PathConfig = PathConfig()
) -> tuple[IntermediateState, SfmHeadOutput]:
    """Start point of SFM inference for one item at strength ``alpha``."""
    head = head_statistics(nets, [label])
    x0 = rng.standard_normal(head.x_h.shape[1:])
    var = float(np.exp(head.log_var_hat[0]))
    state = build_intermediate(head.x_h[0], float(head.t_hat[0]), var, x0, alpha, path)
    if not state.t_tilde < 1.0:
        raise DomainError(f"rescaled start time {state.t_tilde} is not below 1")
    return state, head


def _vector_field(nets: SfmNets, label: int, beta: float, x_h: np.ndarray | None):
    mcfg = nets.config
    cond = class_condition([label], mcfg.n_classes)
    null = class_condition([label], mcfg.n_classes, null=True)
    xh = None if x_h is None else x_h[None]

    def vf(t: float, x: np.ndarray) -> np.ndarray:
        t = min(max(t, 0.0), 1.0)
        v = nets.velocity(x[None], t, cond, xh)[0]
        if beta > 0:
            v = cfg_combine(v, nets.velocity(x[None], t, null, xh)[0], beta)
        return v

    return vf


def sfm_sample(
    nets: SfmNets, label: int, cfg: SampleConfig, rng: np.random.Generator, path: PathConfig = PathConfig()
) -> tuple[np.ndarray, SolveResult]:
    """Generate one sample by integrating from the constructed start point to 1."""
    if nets.config.system != "sfm":
        raise DomainError("sfm_sample needs an SFM-trained model")
    state, head = sfm_start(nets, label, cfg.alpha, rng, path)
    x_h = head.x_h[0] if nets.config.coarse_condition else None
    vf = _vector_field(nets, label, cfg.beta, x_h)
    result = solve(vf, state.x_start, float(state.t_tilde), 1.0, cfg.solver, cfg.rtol, cfg.atol, cfg.fixed_steps)
    return result.endpoint, result


def baseline_sample(
    nets: SfmNets, label: int, cfg: SampleConfig, rng: np.random.Generator, path: PathConfig = PathConfig()
) -> tuple[np.ndarray, SolveResult]:
    """Standard flow matching from pure noise over ``[0, 1]`` with ``x_h`` as a condition."""
    if nets.config.system != "ablated":
        raise DomainError("baseline_sample needs an ablated model")
    head = head_statistics(nets, [label])
    x0 = rng.standard_normal(head.x_h.shape[1:])
    vf = _vector_field(nets, label, cfg.beta, head.x_h[0])
    result = solve(vf, x0, 0.0, 1.0, cfg.solver, cfg.rtol, cfg.atol, cfg.fixed_steps)
    return result.endpoint, result
