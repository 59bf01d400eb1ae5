"""Executable invariant suite behind ``shallowflow verify``.

Each check returns a ``CheckResult`` with the measured value next to its
threshold; a check passes when ``measured <= threshold``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .condot import PathConfig, condot_flow, condot_vf, gaussian_w2
from .models import GaussianTarget, ModelConfig, analytic_gaussian_vf, build_nets
from .ode import ADAPTIVE_KINDS, TABLEAUS, SolverKind, integrate_adaptive, integrate_fixed
from .piecewise import two_segment_eval
from .pipeline import StepNoise, TrainConfig, compute_loss
from .transform import project_onto_path, theorem1_law, theorem1_map

__all__ = [
    "CheckResult",
    "DEFAULT_THRESHOLDS",
    "check_theorem2",
    "check_theorem1",
    "check_w2_continuity",
    "check_projection",
    "check_transport",
    "check_solver_accuracy",
    "check_solver_order",
    "gradient_check",
    "check_gradients",
    "run_verify",
    "format_report",
]

PATH = PathConfig(1e-4)
THEOREM1_CASES = ((0.5, 0.3), (0.8, 0.5), (0.2, 0.9))
PROJECTION_CASES = ((0.3, 0.2), (0.7, 0.1))

DEFAULT_THRESHOLDS = {
    "theorem2": 1e-12,
    "theorem1_mean": 0.01,
    "theorem1_std": 0.01,
    "w2_continuity": 0.01,
    "projection": 0.02,
    "transport_mean": 0.02,
    "transport_std": 0.02,
    "solver_accuracy": 1e-4,
    "solver_order": 0.2,
    "gradient": 1e-4,
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    threshold: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.measured <= self.threshold)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name:<34} measured={self.measured:.3e}  threshold={self.threshold:.3e}{extra}"


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def check_theorem2(rng: np.random.Generator, n: int = 10_000, threshold: float = 1e-12) -> CheckResult:
    """Two-segment flow through an on-path point equals the global CondOT flow."""
    worst = 0.0
    for _ in range(n):
        x0, x1 = rng.standard_normal((2, 4, 2))
        t_m, t = rng.uniform(0.0, 1.0, size=2)
        x_tm = condot_flow(x0, x1, t_m, PATH)
        flow, vel = two_segment_eval(x0, x_tm, x1, t, t_m, PATH)
        worst = max(worst, _rel(flow, condot_flow(x0, x1, t, PATH)), _rel(vel, condot_vf(x0, x1, PATH)))
    return CheckResult("theorem2_identity", worst, threshold, f"{n} tuples, max relative error")


def check_theorem1(
    rng: np.random.Generator,
    n: int = 100_000,
    mean_tol: float = 0.01,
    std_tol: float = 0.01,
    map_fn: Callable = theorem1_map,
) -> list[CheckResult]:
    """Monte Carlo of the noise-mixing map: output law is the CondOT marginal at ``tau``."""
    d = 8
    x1 = np.array([2.0, -3.0, 4.0, -2.5, 3.5, -4.0, 2.2, -3.3])
    out = []
    for t_m, s_m in THEOREM1_CASES:
        x_m = t_m * x1 + s_m * rng.standard_normal((n, d))
        x0 = rng.standard_normal((n, d))
        y, tau = map_fn(x_m, t_m, s_m, x0, PATH)
        mean_err = float(np.linalg.norm(y.mean(axis=0) - tau * x1) / np.linalg.norm(tau * x1))
        want = 1.0 - (1.0 - PATH.sigma_min) * tau
        got = float(np.sqrt(y.var(axis=0).mean()))
        tag = f"t_m={t_m}, sigma_m={s_m}"
        out.append(CheckResult(f"theorem1_mean[{tag}]", mean_err, mean_tol, f"tau={tau:.4f}"))
        out.append(CheckResult(f"theorem1_std[{tag}]", abs(got - want) / want, std_tol, f"std={got:.5f} want={want:.5f}"))
    return out


def check_w2_continuity(threshold: float = 0.01, eps: float = 1e-3) -> list[CheckResult]:
    """W2 between mapped laws at neighbouring parameters straddling ``Delta = 1``."""
    x1 = np.linspace(-2.0, 2.0, 8)
    bound = threshold * (1.0 + float(np.linalg.norm(x1)))
    out = []
    for t in (0.2, 0.5, 0.8):
        s = 1.0 - (1.0 - PATH.sigma_min) * t  # on the boundary
        base = theorem1_law(x1, t, s, PATH)
        for name, dt, ds in (("t", eps, 0.0), ("t", -eps, 0.0), ("sigma", 0.0, eps), ("sigma", 0.0, -eps)):
            w = gaussian_w2(base, theorem1_law(x1, t + dt, s + ds, PATH))
            out.append(CheckResult(f"w2_continuity[t={t},d{name}={dt + ds:+.0e}]", w, bound))
    return out


def check_projection(rng: np.random.Generator, threshold: float = 0.02) -> list[CheckResult]:
    """Planted ``x_h = t* x1 + sigma* eps`` on a 64 x 64 target is recovered."""
    out = []
    for t_star, s_star in PROJECTION_CASES:
        x1 = rng.standard_normal((64, 64))
        x_h = t_star * x1 + s_star * rng.standard_normal(x1.shape)
        p = project_onto_path(x_h, x1)
        err = max(abs(p.t_h - t_star), abs(math.sqrt(p.sigma_h_sq) - s_star))
        out.append(
            CheckResult(
                f"projection[t*={t_star},sigma*={s_star}]",
                err,
                threshold,
                f"t_h={p.t_h:.4f} sigma_h={math.sqrt(p.sigma_h_sq):.4f}",
            )
        )
    return out


def check_transport(
    rng: np.random.Generator, n: int = 10_000, mean_tol: float = 0.02, std_tol: float = 0.02
) -> list[CheckResult]:
    """Integrating the closed-form Gaussian field from N(0, I) reaches N(mu, s^2 + sigma_min^2)."""
    d, s = 8, 0.5
    direction = np.linspace(1.0, 2.0, d)
    target = GaussianTarget(3.0 * direction / np.linalg.norm(direction), s)
    x0 = rng.standard_normal((n, d))
    res = integrate_adaptive(lambda t, x: analytic_gaussian_vf(x, t, target, PATH), x0, 0.0, 1.0, SolverKind.DOPRI5)
    y = res.endpoint
    mean_err = float(np.linalg.norm(y.mean(axis=0) - target.mean) / np.linalg.norm(target.mean))
    want = math.sqrt(s**2 + PATH.sigma_min**2)
    std_err = float(np.max(np.abs(y.std(axis=0) - want)) / want)
    return [
        CheckResult("transport_mean", mean_err, mean_tol, f"nfe={res.nfe}"),
        CheckResult("transport_std", std_err, std_tol, "worst coordinate"),
    ]


def check_solver_accuracy(threshold: float = 1e-4) -> list[CheckResult]:
    out = []
    for kind in ADAPTIVE_KINDS:
        res = integrate_adaptive(lambda t, y: -y, np.array([1.0]), 0.0, 1.0, kind, 1e-5, 1e-5)
        err = abs(float(res.endpoint[0]) - math.exp(-1.0))
        out.append(CheckResult(f"solver_accuracy[{kind.value}]", err, threshold, f"nfe={res.nfe}"))
    return out


def order_ratio(kind: SolverKind, steps: int = 20) -> float:
    """Global error ratio between step sizes ``h`` and ``h/2`` on ``dy/dt = -y``."""
    errs = []
    for n in (steps, 2 * steps):
        res = integrate_fixed(lambda t, y: -y, np.array([1.0]), 0.0, 1.0, n, kind)
        errs.append(abs(float(res.endpoint[0]) - math.exp(-1.0)))
    return errs[0] / errs[1]


def check_solver_order(threshold: float = 0.2) -> list[CheckResult]:
    out = []
    for kind in SolverKind:
        p = TABLEAUS[kind].order
        ratio = order_ratio(kind)
        out.append(CheckResult(f"solver_order[{kind.value}]", abs(ratio / 2**p - 1.0), threshold, f"ratio={ratio:.3f} vs 2^{p}"))
    return out


def gradient_check(
    system: str, rng: np.random.Generator, n_per_group: int = 40, h: float = 1e-4, floor: float = 1e-6
) -> dict[str, float]:
    """Worst relative error of analytic vs central-difference gradients per network group.

    Stop-gradient statistics are computed once and held fixed for the
    perturbed evaluations, so both sides differentiate the same objective.
    """
    mcfg = ModelConfig(n_frames=4, n_channels=2, n_classes=3, system=system, hidden=12, head_hidden=8, vf_hidden=12)
    nets = build_nets(mcfg, rng)
    tcfg = TrainConfig(cfg_dropout_prob=0.3)
    labels = np.array([0, 1, 2, 1])
    x1 = rng.standard_normal((4, mcfg.n_frames, mcfg.n_channels)) + 1.0
    noise = StepNoise.draw(rng, x1.shape, tcfg.cfg_dropout_prob)
    nets.zero_grad()
    _, stats = compute_loss(nets, x1, labels, noise, tcfg)
    groups = {"g": ["generator", "projection"], "h": ["head"], "v": ["vf"]}
    worst = {}
    for group, names in groups.items():
        pairs = [(p, g) for name, net in nets.named_nets() if name in names for p, g in zip(net.parameters(), net.gradients())]
        sizes = np.array([p.size for p, _ in pairs])
        picks = rng.choice(sizes.sum(), size=min(n_per_group, sizes.sum()), replace=False)
        bounds = np.cumsum(sizes)
        w = 0.0
        for flat in picks:
            k = int(np.searchsorted(bounds, flat, side="right"))
            p, g = pairs[k]
            idx = np.unravel_index(int(flat - (bounds[k] - sizes[k])), p.shape)
            old = p[idx]
            p[idx] = old + h
            lp = compute_loss(nets, x1, labels, noise, tcfg, stats, backward=False)[0].total
            p[idx] = old - h
            lm = compute_loss(nets, x1, labels, noise, tcfg, stats, backward=False)[0].total
            p[idx] = old
            num = (lp - lm) / (2 * h)
            ana = float(g[idx])
            w = max(w, abs(ana - num) / max(abs(ana), abs(num), floor))
        worst[group] = w
    return worst


def check_gradients(rng: np.random.Generator, threshold: float = 1e-4) -> list[CheckResult]:
    out = []
    for system in ("sfm", "ablated"):
        for group, w in gradient_check(system, rng).items():
            out.append(CheckResult(f"gradient[{system},{group}]", w, threshold, "40 parameters"))
    return out


def run_verify(seed: int = 0, thresholds: dict | None = None, theorem1_fn: Callable = theorem1_map) -> list[CheckResult]:
    th = dict(DEFAULT_THRESHOLDS)
    unknown = set(thresholds or {}) - set(th)
    if unknown:
        raise KeyError(f"unknown tolerance names: {sorted(unknown)}")
    th.update(thresholds or {})
    rng = np.random.default_rng(seed)
    results = [check_theorem2(rng, threshold=th["theorem2"])]
    results += check_theorem1(rng, mean_tol=th["theorem1_mean"], std_tol=th["theorem1_std"], map_fn=theorem1_fn)
    results += check_w2_continuity(th["w2_continuity"])
    results += check_projection(rng, th["projection"])
    results += check_transport(rng, mean_tol=th["transport_mean"], std_tol=th["transport_std"])
    results += check_solver_accuracy(th["solver_accuracy"])
    results += check_solver_order(th["solver_order"])
    results += check_gradients(rng, th["gradient"])
    return results


def format_report(results: list[CheckResult], elapsed: float | None = None) -> str:
    lines = [r.line() for r in results]
    n_fail = sum(not r.passed for r in results)
    tail = f"{len(results) - n_fail}/{len(results)} checks passed"
    if elapsed is not None:
        tail += f" in {elapsed:.1f}s"
    return "\n".join(lines + [tail])


def timed_verify(seed: int = 0, thresholds: dict | None = None) -> tuple[list[CheckResult], float]:
    start = time.perf_counter()
    results = run_verify(seed, thresholds)
    return results, time.perf_counter() - start
