"""Piecewise CondOT flow split at an intermediate time.

Training only ever uses the second segment ``[t_tilde, 1]``: a straight line
from the constructed start point to ``x1 + sigma_min x0``. The two-segment
evaluator exists to check that splitting an on-path trajectory changes
nothing.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .condot import DEFAULT_PATH, PathConfig
from .errors import DimensionError, DomainError

__all__ = ["TimeScheduler", "apply_scheduler", "schedule_time", "segment_point", "segment_vf", "two_segment_eval"]


class TimeScheduler(str, enum.Enum):
    IDENTITY = "identity"
    COSINE = "cosine"


def apply_scheduler(u, kind: TimeScheduler | str = TimeScheduler.IDENTITY):
    """Monotone map of ``[0, 1]`` onto itself."""
    kind = TimeScheduler(kind)
    u = np.asarray(u, dtype=np.float64)
    if kind is TimeScheduler.IDENTITY:
        out = u
    else:
        # 1 - cos(pi u / 2) already hits 0 and 1 at the endpoints.
        out = 1.0 - np.cos(0.5 * math.pi * u)
    return float(out) if out.ndim == 0 else out


def schedule_time(u, t_tilde, kind: TimeScheduler | str = TimeScheduler.IDENTITY):
    """Return ``(t_s, t)``: the scheduled segment fraction and the global time."""
    t_s = apply_scheduler(u, kind)
    t = (1.0 - np.asarray(t_tilde)) * t_s + t_tilde
    return t_s, (float(t) if np.ndim(t) == 0 else t)


def _check_shapes(*arrays):
    shape = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != shape:
            raise DimensionError(f"shape mismatch {shape} vs {a.shape}")


def segment_point(x_start, x1, x0, t_s, cfg: PathConfig = DEFAULT_PATH) -> np.ndarray:
    """``(1 - t_s) x_start + t_s (x1 + sigma_min x0)``; ``t_s`` may be per item."""
    x_start, x1, x0 = (np.asarray(a, dtype=np.float64) for a in (x_start, x1, x0))
    _check_shapes(x_start, x1, x0)
    t_s = np.asarray(t_s, dtype=np.float64)
    if np.any((t_s < 0) | (t_s > 1)):
        raise DomainError("t_s must lie in [0, 1]")
    t_s = t_s.reshape(t_s.shape + (1,) * (x0.ndim - t_s.ndim))
    return (1.0 - t_s) * x_start + t_s * (x1 + cfg.sigma_min * x0)


def segment_vf(x_start, x1, x0, t_tilde, cfg: PathConfig = DEFAULT_PATH) -> np.ndarray:
    """Constant velocity of the second segment: ``(x1 + sigma_min x0 - x_start) / (1 - t_tilde)``."""
    x_start, x1, x0 = (np.asarray(a, dtype=np.float64) for a in (x_start, x1, x0))
    _check_shapes(x_start, x1, x0)
    t_tilde = np.asarray(t_tilde, dtype=np.float64)
    if np.any(t_tilde >= 1):
        raise DomainError("t_tilde must be < 1")
    t_tilde = t_tilde.reshape(t_tilde.shape + (1,) * (x0.ndim - t_tilde.ndim))
    return (x1 + cfg.sigma_min * x0 - x_start) / (1.0 - t_tilde)


def two_segment_eval(x0, x_tm, x1, t: float, t_m: float, cfg: PathConfig = DEFAULT_PATH):
    """Flow and velocity of the two-segment path through ``x_tm`` at time ``t``."""
    if not 0.0 < t_m < 1.0:
        raise DomainError(f"t_m must lie in (0, 1), got {t_m}")
    x0, x_tm, x1 = (np.asarray(a, dtype=np.float64) for a in (x0, x_tm, x1))
    _check_shapes(x0, x_tm, x1)
    if t < t_m:
        r = t / t_m
        return (1.0 - r) * x0 + r * x_tm, (x_tm - x0) / t_m
    r = (t - t_m) / (1.0 - t_m)
    target = x1 + cfg.sigma_min * x0
    return (1.0 - r) * x_tm + r * target, (target - x_tm) / (1.0 - t_m)
