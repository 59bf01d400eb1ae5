"""Placing a coarse sample on the CondOT paths.

A coarse prediction ``x_h`` is treated as a draw from ``N(t_h x1, sigma_h^2 I)``.
``project_onto_path`` estimates ``(t_h, sigma_h^2)``, ``delta_rescale`` pulls
the triple back inside the admissible region ``(1 - sigma_min) t + sigma <= 1``
(optionally after amplifying it by a strength ``alpha >= 1``), and
``construct_intermediate`` tops the variance up with fresh Gaussian noise so the
result has exactly the CondOT marginal at time ``t_tilde``.

Per-item quantities (``t_h``, ``sigma_h_sq`` ...) are scalars for a single
``N x F`` sample and arrays of shape ``batch`` for ``batch x N x F`` inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .condot import DEFAULT_PATH, IsotropicGaussian, PathConfig, check_sample
from .errors import DegenerateTargetError, DimensionError, DomainError

__all__ = [
    "Projection",
    "Rescale",
    "IntermediateState",
    "project_onto_path",
    "mu_loss",
    "mu_loss_grad",
    "delta_rescale",
    "noise_coefficient",
    "construct_intermediate",
    "build_intermediate",
    "theorem1_map",
    "theorem1_law",
]


@dataclass(frozen=True)
class Projection:
    t_h: np.ndarray | float
    sigma_h_sq: np.ndarray | float


@dataclass(frozen=True)
class Rescale:
    delta: np.ndarray | float
    x_scale: np.ndarray | float
    t_tilde: np.ndarray | float
    sigma_tilde_sq: np.ndarray | float


@dataclass(frozen=True)
class IntermediateState:
    x_tilde: np.ndarray
    t_tilde: np.ndarray | float
    sigma_tilde_sq: np.ndarray | float
    x_start: np.ndarray


def _item(v, ndim: int) -> np.ndarray:
    """Reshape per-item values so they broadcast against ``(..., N, F)`` arrays."""
    v = np.asarray(v, dtype=np.float64)
    return v.reshape(v.shape + (1,) * (ndim - v.ndim))


def _scalar_or_array(v: np.ndarray):
    return float(v) if np.ndim(v) == 0 else v


def project_onto_path(x_h, x1, mask=None) -> Projection:
    """Orthogonal projection of ``x_h`` onto the line spanned by ``x1``.

    The coefficient is the frame-wise ratio ``<x_h^n, x1^n> / <x1^n, x1^n>``
    averaged over frames; the residual variance is the mean square of
    ``x_h - t_h x1`` over all elements. Negative coefficients are clamped to 0.
    ``mask`` (shape ``(..., N)``, true for real frames) drops padded frames
    from both averages.
    """
    x_h = check_sample(x_h, "x_h")
    x1 = check_sample(x1, "x1")
    if x_h.shape != x1.shape:
        raise DimensionError(f"project_onto_path: shape mismatch {x_h.shape} vs {x1.shape}")
    if mask is None:
        mask = np.ones(x1.shape[:-1], dtype=bool)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x1.shape[:-1])

    norm_sq = np.einsum("...nf,...nf->...n", x1, x1)
    if np.any(mask & (norm_sq == 0.0)):
        raise DegenerateTargetError("x1 has an all-zero frame; projection is undefined")
    dots = np.einsum("...nf,...nf->...n", x_h, x1)
    ratio = np.where(mask, dots / np.where(mask, norm_sq, 1.0), 0.0)
    n_valid = mask.sum(axis=-1)
    t_h = np.maximum(ratio.sum(axis=-1) / n_valid, 0.0)

    resid = x_h - _item(t_h, x_h.ndim) * x1
    sq = np.where(mask[..., None], resid**2, 0.0)
    sigma_h_sq = sq.sum(axis=(-2, -1)) / (n_valid * x1.shape[-1])
    return Projection(_scalar_or_array(t_h), _scalar_or_array(sigma_h_sq))


def mu_loss(x_h, x1, t_h) -> float:
    """Mean squared distance between ``x_h`` and ``t_h x1`` (``t_h`` held constant)."""
    x_h = np.asarray(x_h, dtype=np.float64)
    resid = x_h - _item(t_h, x_h.ndim) * np.asarray(x1, dtype=np.float64)
    return float(np.mean(resid**2))


def mu_loss_grad(x_h, x1, t_h) -> np.ndarray:
    x_h = np.asarray(x_h, dtype=np.float64)
    resid = x_h - _item(t_h, x_h.ndim) * np.asarray(x1, dtype=np.float64)
    return 2.0 * resid / resid.size


def delta_rescale(t_h, sigma_h, alpha: float = 1.0, cfg: PathConfig = DEFAULT_PATH) -> Rescale:
    """Scale ``(t_h, sigma_h)`` by ``alpha`` and shrink back onto the admissible boundary.

    ``delta = max(alpha ((1 - sigma_min) t_h + sigma_h), 1)``; every returned
    quantity uses the factor ``alpha / delta``.
    """
    if alpha < 1.0:
        raise DomainError(f"alpha must be >= 1, got {alpha}")
    t_h = np.asarray(t_h, dtype=np.float64)
    sigma_h = np.asarray(sigma_h, dtype=np.float64)
    if np.any(t_h < 0) or np.any(sigma_h < 0):
        raise DomainError("t_h and sigma_h must be non-negative")
    s = (1.0 - cfg.sigma_min) * t_h + sigma_h
    delta = np.maximum(alpha * s, 1.0)
    # alpha / delta, written so the clamped branch is exactly independent of alpha
    with np.errstate(divide="ignore"):
        scale = np.where(alpha * s > 1.0, 1.0 / s, alpha)
    return Rescale(
        delta=_scalar_or_array(delta),
        x_scale=_scalar_or_array(scale),
        t_tilde=_scalar_or_array(scale * t_h),
        sigma_tilde_sq=_scalar_or_array(scale**2 * sigma_h**2),
    )


def noise_coefficient(t_tilde, sigma_tilde_sq, cfg: PathConfig = DEFAULT_PATH):
    """Weight of the external noise needed to reach the CondOT std at ``t_tilde``."""
    t_tilde = np.asarray(t_tilde, dtype=np.float64)
    sigma_tilde_sq = np.asarray(sigma_tilde_sq, dtype=np.float64)
    if np.any(sigma_tilde_sq < 0):
        raise DomainError("sigma_tilde_sq must be non-negative")
    gap = (1.0 - (1.0 - cfg.sigma_min) * t_tilde) ** 2 - sigma_tilde_sq
    return _scalar_or_array(np.sqrt(np.maximum(gap, 0.0)))


def construct_intermediate(x_tilde, t_tilde, sigma_tilde_sq, x0, cfg: PathConfig = DEFAULT_PATH) -> np.ndarray:
    """``sqrt(max((1 - (1 - sigma_min) t)^2 - sigma^2, 0)) x0 + x_tilde``."""
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != x_tilde.shape:
        raise DimensionError(f"construct_intermediate: shape mismatch {x0.shape} vs {x_tilde.shape}")
    coef = noise_coefficient(t_tilde, sigma_tilde_sq, cfg)
    return _item(coef, x0.ndim) * x0 + x_tilde


def build_intermediate(x_h, t_h, sigma_h_sq, x0, alpha: float = 1.0, cfg: PathConfig = DEFAULT_PATH) -> IntermediateState:
    """Rescale then construct: the full path from head statistics to a start point."""
    x_h = np.asarray(x_h, dtype=np.float64)
    r = delta_rescale(t_h, np.sqrt(sigma_h_sq), alpha, cfg)
    x_tilde = _item(r.x_scale, x_h.ndim) * x_h
    x_start = construct_intermediate(x_tilde, r.t_tilde, r.sigma_tilde_sq, x0, cfg)
    return IntermediateState(x_tilde, r.t_tilde, r.sigma_tilde_sq, x_start)


def theorem1_map(x_m, t_m: float, sigma_m: float, x0, cfg: PathConfig = DEFAULT_PATH):
    """Map ``x_m ~ N(t_m x1, sigma_m^2 I)`` onto the CondOT paths.

    Returns ``(x_tau, tau)`` with ``tau = min(t_m, t_m / Delta)``. Below the
    boundary external noise is added; on or above it ``x_m`` is shrunk by
    ``Delta``.
    """
    if t_m < 0 or sigma_m <= 0:
        raise DomainError(f"need t_m >= 0 and sigma_m > 0, got {t_m}, {sigma_m}")
    x_m = np.asarray(x_m, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    delta = (1.0 - cfg.sigma_min) * t_m + sigma_m
    if delta < 1.0:
        gap = (1.0 - (1.0 - cfg.sigma_min) * t_m) ** 2 - sigma_m**2
        if gap < 0:
            warnings.warn(f"negative noise variance {gap:.3e} clamped to 0", RuntimeWarning, stacklevel=2)
            gap = 0.0
        return np.sqrt(gap) * x0 + x_m, t_m
    return x_m / delta, t_m / delta


def theorem1_law(x1, t_m: float, sigma_m: float, cfg: PathConfig = DEFAULT_PATH) -> IsotropicGaussian:
    """Analytic output distribution of ``theorem1_map`` given ``x1``."""
    x1 = np.asarray(x1, dtype=np.float64).ravel()
    delta = (1.0 - cfg.sigma_min) * t_m + sigma_m
    if delta < 1.0:
        return IsotropicGaussian(t_m * x1, 1.0 - (1.0 - cfg.sigma_min) * t_m)
    return IsotropicGaussian(t_m / delta * x1, sigma_m / delta)
