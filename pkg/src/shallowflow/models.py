"""Networks of the coarse-to-fine generator and the analytic Gaussian oracle.

All networks are per-frame MLPs with weights shared across frames:

* the weak generator maps (class one-hot, frame position) to hidden states
  ``H`` and linearly projects them to the coarse sample ``x_g``;
* the head maps ``H`` to ``F + 2`` channels: the scaled coarse sample
  ``x_h``, a time logit (sigmoid, then frame mean) and a log-variance
  (frame mean);
* the vector-field net sees the current state, a sinusoidal time embedding,
  the (droppable) class condition, the frame position and, for the ablated
  system, ``x_h``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .condot import DEFAULT_PATH, PathConfig
from .errors import DimensionError, DomainError
from .nn import MlpNet, frame_embedding, sinusoidal_embedding

__all__ = [
    "ModelConfig",
    "SfmNets",
    "SfmHeadOutput",
    "GaussianTarget",
    "build_nets",
    "class_condition",
    "weak_generator_forward",
    "sfm_head_forward",
    "vf_forward",
    "cfg_combine",
    "analytic_gaussian_vf",
]

SYSTEMS = ("sfm", "ablated")


@dataclass(frozen=True)
class ModelConfig:
    n_frames: int = 32
    n_channels: int = 2
    n_classes: int = 4
    system: str = "sfm"
    hidden: int = 64
    generator_layers: int = 2
    head_hidden: int = 32
    vf_hidden: int = 96
    vf_layers: int = 3
    activation: str = "silu"
    time_dim: int = 16
    time_max_freq: float = 16.0
    n_harmonics: int = 4
    coarse_condition: bool = False
    head_last_scale: float = 0.5

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise DomainError(f"system must be one of {SYSTEMS}, got {self.system!r}")
        for name in ("n_frames", "n_channels", "n_classes", "hidden", "head_hidden", "vf_hidden"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be positive")

    @property
    def uses_x_h_condition(self) -> bool:
        return self.system == "ablated" or self.coarse_condition

    @property
    def cond_dim(self) -> int:
        # one slot per class plus a null slot acting as the learned "no condition" embedding
        return self.n_classes + 1

    @property
    def frame_dim(self) -> int:
        return 2 * self.n_harmonics

    @property
    def vf_in_dim(self) -> int:
        d = self.n_channels + self.time_dim + self.cond_dim + self.frame_dim
        return d + (self.n_channels if self.uses_x_h_condition else 0)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SfmHeadOutput:
    x_h: np.ndarray  # (B, N, F)
    t_hat: np.ndarray  # (B,)
    log_var_hat: np.ndarray  # (B,)


@dataclass(frozen=True)
class GaussianTarget:
    mean: np.ndarray
    std: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64).ravel())
        if not self.std > 0:
            raise DomainError("std must be positive")


@dataclass
class SfmNets:
    """The four trainable networks plus the bookkeeping their forward passes need."""

    config: ModelConfig
    generator: MlpNet
    projection: MlpNet
    head: MlpNet
    vf: MlpNet
    _frames: np.ndarray = field(init=False, repr=False)
    _state: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        self._frames = frame_embedding(self.config.n_frames, self.config.n_harmonics)

    def named_nets(self) -> list[tuple[str, MlpNet]]:
        return [("generator", self.generator), ("projection", self.projection), ("head", self.head), ("vf", self.vf)]

    def parameters(self) -> list[np.ndarray]:
        return [p for _, net in self.named_nets() for p in net.parameters()]

    def gradients(self) -> list[np.ndarray]:
        return [g for _, net in self.named_nets() for g in net.gradients()]

    def zero_grad(self) -> None:
        for _, net in self.named_nets():
            net.zero_grad()

    # ---- weak generator -------------------------------------------------
    def generate(self, cond: np.ndarray):
        """``cond`` is ``(B, K)``; returns hidden ``(B, N, hidden)`` and ``x_g`` ``(B, N, F)``."""
        cfg = self.config
        cond = np.asarray(cond, dtype=np.float64)
        if cond.ndim != 2 or cond.shape[1] != cfg.n_classes:
            raise DimensionError(f"condition must be (B, {cfg.n_classes}), got {cond.shape}")
        b, n = cond.shape[0], cfg.n_frames
        inp = np.concatenate(
            [np.repeat(cond[:, None, :], n, axis=1), np.broadcast_to(self._frames, (b, n, cfg.frame_dim))],
            axis=2,
        )
        hidden = self.generator(inp.reshape(b * n, -1))
        x_g = self.projection(hidden)
        return hidden.reshape(b, n, -1), x_g.reshape(b, n, cfg.n_channels)

    def generate_backward(self, grad_hidden: np.ndarray, grad_x_g: np.ndarray) -> None:
        b, n = grad_x_g.shape[:2]
        g = self.projection.backward(grad_x_g.reshape(b * n, -1))
        self.generator.backward(g + grad_hidden.reshape(b * n, -1))

    # ---- head -----------------------------------------------------------
    def head_out(self, hidden: np.ndarray) -> SfmHeadOutput:
        b, n, _ = hidden.shape
        f = self.config.n_channels
        raw = self.head(hidden.reshape(b * n, -1)).reshape(b, n, f + 2)
        t_frames = 0.5 * (1.0 + np.tanh(0.5 * raw[:, :, f]))
        self._state["head_t_frames"] = t_frames
        return SfmHeadOutput(raw[:, :, :f], t_frames.mean(axis=1), raw[:, :, f + 1].mean(axis=1))

    def head_backward(self, grad_x_h: np.ndarray, grad_t_hat, grad_log_var) -> np.ndarray:
        t_frames = self._state["head_t_frames"]
        b, n, f = grad_x_h.shape
        g = np.empty((b, n, f + 2))
        g[:, :, :f] = grad_x_h
        g[:, :, f] = np.asarray(grad_t_hat)[:, None] * t_frames * (1.0 - t_frames) / n
        g[:, :, f + 1] = np.asarray(grad_log_var)[:, None] / n
        return self.head.backward(g.reshape(b * n, -1)).reshape(b, n, -1)

    # ---- vector field ---------------------------------------------------
    def vf_input(self, x_t: np.ndarray, t, cond: np.ndarray, x_h: np.ndarray | None = None) -> np.ndarray:
        cfg = self.config
        b, n, f = x_t.shape
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (b,))
        temb = sinusoidal_embedding(t, cfg.time_dim, cfg.time_max_freq)
        cond = np.broadcast_to(np.asarray(cond, dtype=np.float64), (b, cfg.cond_dim))
        parts = [
            x_t,
            np.repeat(temb[:, None, :], n, axis=1),
            np.repeat(cond[:, None, :], n, axis=1),
            np.broadcast_to(self._frames, (b, n, cfg.frame_dim)),
        ]
        if cfg.uses_x_h_condition:
            if x_h is None:
                raise DimensionError("this system needs x_h as a vector-field condition")
            parts.append(x_h)
        return np.concatenate(parts, axis=2).reshape(b * n, -1)

    def velocity(self, x_t: np.ndarray, t, cond: np.ndarray, x_h: np.ndarray | None = None) -> np.ndarray:
        b, n, f = x_t.shape
        return self.vf(self.vf_input(x_t, t, cond, x_h)).reshape(b, n, f)

    def velocity_backward(self, grad_v: np.ndarray):
        """Return ``(dL/dx_t, dL/dx_h or None)``."""
        b, n, f = grad_v.shape
        g = self.vf.backward(grad_v.reshape(b * n, -1)).reshape(b, n, -1)
        g_xh = g[:, :, -f:] if self.config.uses_x_h_condition else None
        return g[:, :, :f], g_xh


def build_nets(config: ModelConfig, rng: np.random.Generator) -> SfmNets:
    act = config.activation
    gen_sizes = [config.n_classes + config.frame_dim] + [config.hidden] * config.generator_layers
    generator = MlpNet.create(gen_sizes, [act] * config.generator_layers, rng)
    projection = MlpNet.create([config.hidden, config.n_channels], ["linear"], rng)
    head = MlpNet.create(
        [config.hidden, config.head_hidden, config.head_hidden, config.n_channels + 2],
        [act, act, "linear"],
        rng,
        last_scale=config.head_last_scale,
    )
    vf_sizes = [config.vf_in_dim] + [config.vf_hidden] * config.vf_layers + [config.n_channels]
    vf = MlpNet.create(vf_sizes, [act] * config.vf_layers + ["linear"], rng)
    return SfmNets(config, generator, projection, head, vf)


def class_condition(labels, n_classes: int, null: bool | np.ndarray = False, with_null_slot: bool = True) -> np.ndarray:
    """One-hot class vectors; rows flagged ``null`` become the null-condition vector."""
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    width = n_classes + 1 if with_null_slot else n_classes
    out = np.zeros((labels.size, width))
    out[np.arange(labels.size), labels] = 1.0
    if with_null_slot:
        null = np.broadcast_to(np.asarray(null, dtype=bool), labels.shape)
        out[null] = 0.0
        out[null, n_classes] = 1.0
    return out


def weak_generator_forward(nets: SfmNets, condition) -> tuple[np.ndarray, np.ndarray]:
    """Hidden states and coarse sample for one condition vector (or a batch of them)."""
    cond = np.asarray(condition, dtype=np.float64)
    single = cond.ndim == 1
    hidden, x_g = nets.generate(cond[None] if single else cond)
    return (hidden[0], x_g[0]) if single else (hidden, x_g)


def sfm_head_forward(nets: SfmNets, hidden) -> SfmHeadOutput:
    hidden = np.asarray(hidden, dtype=np.float64)
    if hidden.ndim == 2:
        out = nets.head_out(hidden[None])
        return SfmHeadOutput(out.x_h[0], float(out.t_hat[0]), float(out.log_var_hat[0]))
    return nets.head_out(hidden)


def vf_forward(nets: SfmNets, x_t, t: float, condition=None, x_h=None) -> np.ndarray:
    """Velocity prediction for one ``N x F`` state; ``condition=None`` selects the null condition."""
    cfg = nets.config
    if condition is None:
        cond = np.zeros(cfg.cond_dim)
        cond[cfg.n_classes] = 1.0
    else:
        cond = np.asarray(condition, dtype=np.float64)
        if cond.shape == (cfg.n_classes,):
            cond = np.append(cond, 0.0)
    x_t = np.asarray(x_t, dtype=np.float64)
    xh = None if x_h is None else np.asarray(x_h, dtype=np.float64)[None]
    return nets.velocity(x_t[None], np.clip(t, 0.0, 1.0), cond[None], xh)[0]


def cfg_combine(v_cond, v_uncond, beta: float) -> np.ndarray:
    """Classifier-free guidance: ``v_cond + beta (v_cond - v_uncond)``."""
    v_cond = np.asarray(v_cond, dtype=np.float64)
    v_uncond = np.asarray(v_uncond, dtype=np.float64)
    if v_cond.shape != v_uncond.shape:
        raise DimensionError(f"cfg_combine: shape mismatch {v_cond.shape} vs {v_uncond.shape}")
    if beta < 0:
        raise DomainError("beta must be non-negative")
    return v_cond + beta * (v_cond - v_uncond)


def analytic_gaussian_vf(x, t: float, target: GaussianTarget, cfg: PathConfig = DEFAULT_PATH) -> np.ndarray:
    """Marginal CondOT velocity when the data law is ``N(mean, std^2 I)``.

    ``x`` has the target's dimension in its last axis; leading axes are batch.
    """
    x = np.asarray(x, dtype=np.float64)
    mu, s2 = target.mean, target.std**2
    a_t = 1.0 - (1.0 - cfg.sigma_min) * t
    v_t = a_t**2 + t**2 * s2
    centred = x - t * mu
    return mu + (t * s2 / v_t - (1.0 - cfg.sigma_min) * a_t / v_t) * centred
