"""Explicit Runge-Kutta integrators with evaluation accounting.

Adaptive stepping uses an embedded pair, the mixed-tolerance RMS error norm
and a plain I-controller. Every call of the vector field is counted in
``nfe``, including the probe evaluation of the initial-step heuristic.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceError, DomainError, StiffnessError

__all__ = ["SolverKind", "ADAPTIVE_KINDS", "Tableau", "TABLEAUS", "SolveResult", "integrate_fixed", "integrate_adaptive", "solve"]

VectorField = Callable[[float, np.ndarray], np.ndarray]

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


class SolverKind(str, enum.Enum):
    EULER_FIXED = "euler_fixed"
    HEUN2 = "heun2_adaptive"
    FEHLBERG2 = "fehlberg2"
    BOSH3 = "bosh3"
    DOPRI5 = "dopri5"

    @property
    def adaptive(self) -> bool:
        return self is not SolverKind.EULER_FIXED


ADAPTIVE_KINDS = tuple(k for k in SolverKind if k.adaptive)


@dataclass(frozen=True)
class Tableau:
    c: tuple[float, ...]
    a: tuple[tuple[float, ...], ...]
    b: tuple[float, ...]  # advancing weights
    b_low: tuple[float, ...] | None  # embedded weights; None for fixed-step only
    order: int
    embedded_order: int

    @property
    def stages(self) -> int:
        return len(self.c)

    @property
    def fsal(self) -> bool:
        # The last stage is f(t + h, y_new) when its row equals the advancing weights.
        return self.c[-1] == 1.0 and tuple(self.a[-1]) + (0.0,) == tuple(self.b)

    @property
    def controller_order(self) -> int:
        return min(self.order, self.embedded_order)


TABLEAUS: dict[SolverKind, Tableau] = {
    SolverKind.EULER_FIXED: Tableau(c=(0.0,), a=((),), b=(1.0,), b_low=None, order=1, embedded_order=1),
    SolverKind.HEUN2: Tableau(
        c=(0.0, 1.0),
        a=((), (1.0,)),
        b=(0.5, 0.5),
        b_low=(1.0, 0.0),
        order=2,
        embedded_order=1,
    ),
    SolverKind.FEHLBERG2: Tableau(
        c=(0.0, 0.5, 1.0),
        a=((), (0.5,), (1 / 256, 255 / 256)),
        b=(1 / 512, 255 / 256, 1 / 512),
        b_low=(1 / 256, 255 / 256, 0.0),
        order=2,
        embedded_order=1,
    ),
    SolverKind.BOSH3: Tableau(
        c=(0.0, 0.5, 0.75, 1.0),
        a=((), (0.5,), (0.0, 0.75), (2 / 9, 1 / 3, 4 / 9)),
        b=(2 / 9, 1 / 3, 4 / 9, 0.0),
        b_low=(7 / 24, 1 / 4, 1 / 3, 1 / 8),
        order=3,
        embedded_order=2,
    ),
    SolverKind.DOPRI5: Tableau(
        c=(0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0),
        a=(
            (),
            (1 / 5,),
            (3 / 40, 9 / 40),
            (44 / 45, -56 / 15, 32 / 9),
            (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
            (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
            (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
        ),
        b=(35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0),
        b_low=(5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40),
        order=5,
        embedded_order=4,
    ),
}


@dataclass(frozen=True)
class SolveResult:
    endpoint: np.ndarray
    nfe: int
    accepted_steps: int
    rejected_steps: int
    wall_time: float


class _Counted:
    def __init__(self, vf: VectorField):
        self.vf = vf
        self.nfe = 0

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        self.nfe += 1
        out = np.asarray(self.vf(t, y), dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise DivergenceError(f"non-finite vector field output at t={t:.6g}")
        return out


def _rk_step(f: _Counted, tab: Tableau, t: float, y: np.ndarray, h: float, k0: np.ndarray):
    ks = [k0]
    for ci, row in zip(tab.c[1:], tab.a[1:]):
        incr = sum((aij * kj for aij, kj in zip(row, ks) if aij != 0.0), np.zeros_like(y))
        ks.append(f(t + ci * h, y + h * incr))
    y_new = y + h * sum((bi * ki for bi, ki in zip(tab.b, ks) if bi != 0.0), np.zeros_like(y))
    return y_new, ks


def integrate_fixed(
    vf: VectorField,
    x_start,
    t0: float,
    t1: float,
    steps: int,
    kind: SolverKind | str = SolverKind.EULER_FIXED,
) -> SolveResult:
    """Uniform steps over ``[t0, t1]``; forward Euler unless another tableau is named."""
    if steps < 1:
        raise DomainError(f"steps must be positive, got {steps}")
    if not t0 < t1:
        raise DomainError(f"need t0 < t1, got {t0}, {t1}")
    tab = TABLEAUS[SolverKind(kind)]
    f = _Counted(vf)
    start = time.perf_counter()
    y = np.array(x_start, dtype=np.float64)
    h = (t1 - t0) / steps
    for i in range(steps):
        t = t0 + i * h
        y, _ = _rk_step(f, tab, t, y, h, f(t, y))
    return SolveResult(y, f.nfe, steps, 0, time.perf_counter() - start)


def _rms(x: np.ndarray) -> float:
    return math.sqrt(float(np.mean(x * x)))


def _initial_step(f: _Counted, t0: float, y0: np.ndarray, f0: np.ndarray, order: int, rtol: float, atol: float) -> float:
    """Hairer-Norsett-Wanner starting step (one extra evaluation)."""
    scale = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    dmax = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dmax <= 1e-15 else (0.01 / dmax) ** (1.0 / (order + 1))
    return min(100.0 * h0, h1)


def integrate_adaptive(
    vf: VectorField,
    x_start,
    t0: float,
    t1: float,
    kind: SolverKind | str = SolverKind.DOPRI5,
    rtol: float = 1e-5,
    atol: float = 1e-5,
) -> SolveResult:
    """Embedded-pair integration of ``dy/dt = vf(t, y)`` from ``t0`` to ``t1``."""
    kind = SolverKind(kind)
    if not kind.adaptive:
        raise DomainError(f"{kind.value} is not an adaptive solver")
    if not t0 < t1:
        raise DomainError(f"need t0 < t1, got {t0}, {t1}")
    if rtol <= 0 or atol <= 0:
        raise DomainError("tolerances must be positive")
    tab = TABLEAUS[kind]
    err_w = tuple(b - bl for b, bl in zip(tab.b, tab.b_low))
    exponent = -1.0 / (tab.controller_order + 1)
    span = t1 - t0

    f = _Counted(vf)
    start = time.perf_counter()
    t = float(t0)
    y = np.array(x_start, dtype=np.float64)
    k0 = f(t, y)
    h = min(_initial_step(f, t, y, k0, tab.order, rtol, atol), span)
    accepted = rejected = 0

    while t < t1:
        if h < 1e-12 * span:
            raise StiffnessError(f"step size {h:.3e} underflowed at t={t:.6g}")
        last = t + h >= t1
        if last:
            h = t1 - t
        y_new, ks = _rk_step(f, tab, t, y, h, k0)
        err_vec = h * sum((w * k for w, k in zip(err_w, ks) if w != 0.0), np.zeros_like(y))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(err_vec / scale)
        if not math.isfinite(err):
            raise DivergenceError(f"non-finite error estimate at t={t:.6g}")

        if err <= 1.0:
            accepted += 1
            t = t1 if last else t + h
            y = y_new
            if tab.fsal:
                k0 = ks[-1]
            elif t < t1:
                k0 = f(t, y)
            factor = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err**exponent))
        else:
            rejected += 1
            factor = min(1.0, max(MIN_FACTOR, SAFETY * err**exponent))
        h *= factor

    return SolveResult(y, f.nfe, accepted, rejected, time.perf_counter() - start)


def solve(
    vf: VectorField,
    x_start,
    t0: float,
    t1: float = 1.0,
    kind: SolverKind | str = SolverKind.DOPRI5,
    rtol: float = 1e-5,
    atol: float = 1e-5,
    fixed_steps: int = 10,
) -> SolveResult:
    """Dispatch on ``kind``: fixed-step Euler or one of the adaptive pairs."""
    kind = SolverKind(kind)
    if kind.adaptive:
        return integrate_adaptive(vf, x_start, t0, t1, kind, rtol, atol)
    return integrate_fixed(vf, x_start, t0, t1, fixed_steps)
