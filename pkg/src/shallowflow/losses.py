"""Training losses and their gradients.

Each loss is a plain mean over elements (or over batch items for the scalar
losses). The ``*_grad`` companions return the gradient with respect to the
first argument and are what the manual backward pass consumes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields

import numpy as np

from .errors import DimensionError, DivergenceError
from .transform import mu_loss, mu_loss_grad

__all__ = [
    "VAR_FLOOR",
    "LossBreakdown",
    "coarse_loss",
    "coarse_loss_grad",
    "cfm_loss",
    "cfm_loss_grad",
    "log_variance",
    "scalar_losses",
    "scalar_losses_grad",
    "total_sfm_loss",
    "mu_loss",
    "mu_loss_grad",
]

VAR_FLOOR = 1e-10


@dataclass(frozen=True)
class LossBreakdown:
    coarse: float = 0.0
    t: float = 0.0
    sigma: float = 0.0
    mu: float = 0.0
    cfm: float = 0.0
    total: float = 0.0

    def as_row(self) -> list[float]:
        return [getattr(self, f.name) for f in fields(self)]


def _mse(a, b, what: str) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"{what}: shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def _mse_grad(a, b) -> np.ndarray:
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return 2.0 * d / d.size


def coarse_loss(x_g, x1) -> float:
    return _mse(x_g, x1, "coarse_loss")


def coarse_loss_grad(x_g, x1) -> np.ndarray:
    return _mse_grad(x_g, x1)


def cfm_loss(v_pred, u_target) -> float:
    return _mse(v_pred, u_target, "cfm_loss")


def cfm_loss_grad(v_pred, u_target) -> np.ndarray:
    return _mse_grad(v_pred, u_target)


def log_variance(var):
    """``log(var)`` with the variance floored at ``VAR_FLOOR``."""
    var = np.asarray(var, dtype=np.float64)
    if np.any(var < VAR_FLOOR):
        warnings.warn("degenerate variance floored before taking the log", RuntimeWarning, stacklevel=2)
    out = np.log(np.maximum(var, VAR_FLOOR))
    return float(out) if out.ndim == 0 else out


def _floor_log(log_var):
    log_var = np.asarray(log_var, dtype=np.float64)
    low = math.log(VAR_FLOOR)
    if np.any(log_var < low):
        warnings.warn("degenerate log-variance target floored", RuntimeWarning, stacklevel=3)
    return np.maximum(log_var, low)


def scalar_losses(t_hat, t_tilde, log_var_hat, log_var_tilde) -> tuple[float, float]:
    """Squared errors of the predicted time and log-variance, averaged over items.

    The targets are constants: no gradient reaches them.
    """
    t_hat = np.asarray(t_hat, dtype=np.float64)
    log_var_hat = np.asarray(log_var_hat, dtype=np.float64)
    l_t = float(np.mean((t_hat - t_tilde) ** 2))
    l_sigma = float(np.mean((log_var_hat - _floor_log(log_var_tilde)) ** 2))
    return l_t, l_sigma


def scalar_losses_grad(t_hat, t_tilde, log_var_hat, log_var_tilde) -> tuple[np.ndarray, np.ndarray]:
    t_hat = np.asarray(t_hat, dtype=np.float64)
    log_var_hat = np.asarray(log_var_hat, dtype=np.float64)
    g_t = 2.0 * (t_hat - t_tilde) / t_hat.size
    g_s = 2.0 * (log_var_hat - _floor_log(log_var_tilde)) / log_var_hat.size
    return g_t, g_s


def total_sfm_loss(coarse: float, t: float, sigma: float, mu: float, cfm: float) -> LossBreakdown:
    """Unweighted sum of the five loss terms."""
    parts = (coarse, t, sigma, mu, cfm)
    if not all(math.isfinite(p) for p in parts):
        raise DivergenceError(f"non-finite loss component in {parts}")
    # fsum is correctly rounded, hence independent of term order.
    return LossBreakdown(coarse, t, sigma, mu, cfm, math.fsum(parts))
