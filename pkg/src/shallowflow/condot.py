"""Conditional optimal-transport (CondOT) probability paths.

The path from a standard-normal ``x0`` to a data sample ``x1`` is the straight
line ``(1 - t) x0 + t (x1 + sigma_min x0)``; its marginal given ``x1`` is the
isotropic Gaussian ``N(t x1, (1 - (1 - sigma_min) t)^2 I)``.

Every function accepts arrays of any matching shape, so a single ``N x F``
sample and a ``B x N x F`` batch are handled alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError

__all__ = [
    "PathConfig",
    "IsotropicGaussian",
    "check_sample",
    "check_time",
    "condot_flow",
    "condot_vf",
    "path_marginal_stats",
    "gaussian_w2",
]


@dataclass(frozen=True)
class PathConfig:
    sigma_min: float = 1e-4

    def __post_init__(self):
        if not 0.0 <= self.sigma_min <= 0.2:
            raise DomainError(f"sigma_min must lie in [0, 0.2], got {self.sigma_min}")


DEFAULT_PATH = PathConfig()


@dataclass(frozen=True)
class IsotropicGaussian:
    """``N(mean, std^2 I)`` in ``dim`` dimensions."""

    mean: np.ndarray
    std: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64).ravel())
        # std = 0 is a point mass, still a valid W2 argument
        if not self.std >= 0:
            raise DomainError(f"std must be non-negative, got {self.std}")

    @property
    def dim(self) -> int:
        return self.mean.size


def check_sample(x, name: str = "sample") -> np.ndarray:
    """Return ``x`` as a float array after checking it is a finite N x F (or batch) array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2 or x.shape[-1] < 1 or x.shape[-2] < 1:
        raise DimensionError(f"{name} must have shape (..., N, F) with N, F >= 1, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} contains non-finite entries")
    return x


def _same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def check_time(t: float, name: str = "t") -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {t}")
    return t


def condot_flow(x0, x1, t: float, cfg: PathConfig = DEFAULT_PATH) -> np.ndarray:
    """Point at time ``t`` on the straight path from ``x0`` to ``x1 + sigma_min x0``."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    _same_shape(x0, x1, "condot_flow")
    t = check_time(t)
    return (1.0 - t) * x0 + t * (x1 + cfg.sigma_min * x0)


def condot_vf(x0, x1, cfg: PathConfig = DEFAULT_PATH) -> np.ndarray:
    """Conditional velocity of the CondOT path; it does not depend on ``t``."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    _same_shape(x0, x1, "condot_vf")
    return (x1 + cfg.sigma_min * x0) - x0


def path_marginal_stats(t: float, cfg: PathConfig = DEFAULT_PATH) -> tuple[float, float]:
    """Return ``(mean_coeff, std)`` so that ``x_t | x1 ~ N(mean_coeff x1, std^2 I)``."""
    t = check_time(t)
    return t, 1.0 - (1.0 - cfg.sigma_min) * t


def gaussian_w2(a: IsotropicGaussian, b: IsotropicGaussian) -> float:
    """Closed-form 2-Wasserstein distance between two isotropic Gaussians."""
    if a.dim != b.dim:
        raise DimensionError(f"gaussian_w2: dimension mismatch {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    return math.sqrt(float(diff @ diff) + a.dim * (a.std - b.std) ** 2)
