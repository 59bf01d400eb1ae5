"""Command-line entry point.

All commands share one run directory (``--out``): ``train`` writes
``<out>/sfm`` and ``<out>/ablated`` (checkpoint + loss.csv); ``sample``,
``bench`` and ``sweep`` read those checkpoints and write their CSVs next to
them.

Exit codes: 0 success, 1 failed check or numerical failure, 2 usage or
config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .bench import run_bench, run_sweep, write_bench_csv, write_sweep_csv, write_timing_csv
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, dump_config, load_config
from .data import generate_dataset, write_dataset_csv
from .errors import ConfigError, ShallowFlowError
from .models import build_nets
from .pipeline import baseline_sample, item_rng, sfm_sample, train, write_loss_csv
from .verify import DEFAULT_THRESHOLDS, format_report, timed_verify

__all__ = ["main", "build_parser", "cmd_train", "cmd_sample", "cmd_bench", "cmd_sweep", "cmd_verify", "cmd_dataset"]

log = logging.getLogger("shallowflow")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
SYSTEMS = ("sfm", "ablated")


def _alphas(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(a) for a in text.split(",") if a.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _tolerance(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or name not in DEFAULT_THRESHOLDS:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE with NAME in {sorted(DEFAULT_THRESHOLDS)}")
    return name, float(value)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shallowflow", description="Shallow flow matching toolkit")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default="runs/default"):
        sp.add_argument("--config", type=Path, help="YAML run configuration")
        sp.add_argument("--out", type=Path, default=Path(out_default), help="run directory")
        sp.add_argument("--seed", type=int, help="overrides train.seed and sample.seed")

    def solving(sp):
        sp.add_argument("--solver", help="ODE solver (euler_fixed, heun2_adaptive, fehlberg2, bosh3, dopri5)")
        sp.add_argument("--rtol", type=float)
        sp.add_argument("--atol", type=float)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=_tolerance, action="append", default=[], metavar="NAME=VALUE")

    t = sub.add_parser("train", help="train the SFM and ablated systems")
    common(t)
    t.add_argument("--system", choices=SYSTEMS + ("both",), default="both")

    s = sub.add_parser("sample", help="generate samples from a trained checkpoint")
    common(s)
    solving(s)
    s.add_argument("--alpha", type=float)
    s.add_argument("--system", choices=SYSTEMS, default="sfm")
    s.add_argument("--n-items", type=int, default=8)

    b = sub.add_parser("bench", help="NFE benchmark of ablated vs SFM")
    common(b)
    solving(b)
    b.add_argument("--alpha", type=_alphas, help="comma-separated strengths")
    b.add_argument("--repeats", type=int)
    b.add_argument("--n-items", type=int)

    w = sub.add_parser("sweep", help="alpha sweep of start statistics and W2")
    common(w)
    solving(w)
    w.add_argument("--alpha", type=_alphas, help="comma-separated strengths")
    w.add_argument("--n-items", type=int)

    d = sub.add_parser("dataset", help="dump the toy dataset to CSV")
    common(d)
    return p


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    train, sample, bench, sweep = cfg.train, cfg.sample, cfg.bench, cfg.sweep
    try:
        if getattr(args, "seed", None) is not None:
            train = dataclasses.replace(train, seed=args.seed)
            sample = dataclasses.replace(sample, seed=args.seed)
        upd = {k: getattr(args, k) for k in ("solver", "rtol", "atol") if getattr(args, k, None) is not None}
        alpha = getattr(args, "alpha", None)
        if isinstance(alpha, float):
            upd["alpha"] = alpha
        sample = dataclasses.replace(sample, **upd)
        bupd = {}
        if getattr(args, "solver", None) is not None:
            bupd["solvers"] = (args.solver,)
        if isinstance(alpha, tuple):
            bupd["alphas"] = alpha
        if getattr(args, "repeats", None) is not None:
            bupd["repeats"] = args.repeats
        if args.command == "bench":
            if getattr(args, "n_items", None) is not None:
                bupd["n_items"] = args.n_items
            bench = dataclasses.replace(bench, **bupd)
        if args.command == "sweep":
            supd = {}
            if isinstance(alpha, tuple):
                supd["alphas"] = alpha
            if getattr(args, "n_items", None) is not None:
                supd["n_items"] = args.n_items
            sweep = dataclasses.replace(sweep, **supd)
    except ValueError as exc:
        raise ConfigError("command line", str(exc)) from exc
    return dataclasses.replace(cfg, train=train, sample=sample, bench=bench, sweep=sweep)


def _load(out: Path, system: str):
    nets, _ = load_checkpoint(out / system / "checkpoint")
    return nets


def cmd_verify(args) -> int:
    results, elapsed = timed_verify(args.seed, dict(args.tol))
    print(format_report(results, elapsed))
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def cmd_train(args) -> int:
    cfg = _resolve(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump_config(cfg))
    dataset = generate_dataset(cfg.data)
    systems = SYSTEMS if args.system == "both" else (args.system,)
    for system in systems:
        start = time.perf_counter()
        nets = build_nets(cfg.model_config(system), np.random.default_rng([cfg.train.seed, 0]))
        rows = []
        history = train(nets, dataset, cfg.train, lambda e, s, parts: rows.append((e, s, parts)))
        (out / system).mkdir(exist_ok=True)
        write_loss_csv(rows, out / system / "loss.csv")
        save_checkpoint(nets, out / system / "checkpoint", meta={"system": system, "epochs": cfg.train.epochs, "seed": cfg.train.seed})
        first, last = history[0].total, history[-1].total
        print(
            f"{system}: {len(history)} epochs, {rows[-1][1]} steps, total loss {first:.6g} -> {last:.6g} "
            f"({100 * (1 - last / first):.1f}% lower) in {time.perf_counter() - start:.1f}s"
        )
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = _resolve(args)
    nets = _load(args.out, args.system)
    fn = sfm_sample if args.system == "sfm" else baseline_sample
    k = nets.config.n_classes
    path = args.out / f"samples_{args.system}.csv"
    nfe, acc, rej, wall = [], [], [], []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item_id", "class", "frame"] + [f"ch{c}" for c in range(nets.config.n_channels)])
        for i in range(args.n_items):
            x, res = fn(nets, i % k, cfg.sample, item_rng(cfg.sample.seed, i))
            for n, frame in enumerate(x):
                w.writerow([i, i % k, n] + [f"{v:.6g}" for v in frame])
            nfe.append(res.nfe)
            acc.append(res.accepted_steps)
            rej.append(res.rejected_steps)
            wall.append(res.wall_time)
    s = cfg.sample
    print(
        f"{args.system} solver={s.solver} alpha={s.alpha:g} items={args.n_items} mean_nfe={np.mean(nfe):.6g} "
        f"accepted={sum(acc)} rejected={sum(rej)} wall_time={math.fsum(wall):.4f}s -> {path}"
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _resolve(args)
    sfm, ablated = _load(args.out, "sfm"), _load(args.out, "ablated")
    b = cfg.bench
    rows = run_bench(sfm, ablated, b.solvers, b.alphas, b.n_items, b.repeats, cfg.sample)
    write_bench_csv(rows, args.out / "bench.csv")
    write_timing_csv(rows, args.out / "bench_timing.csv")
    for r in rows:
        label = "ablated" if r.alpha is None else f"sfm a={r.alpha:g}"
        print(f"{r.solver:<15} {label:<10} mean_nfe={r.mean_nfe:9.3f}  rate={r.speedup_rate_percent:7.3f}%")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    sfm = _load(args.out, "sfm")
    dataset = generate_dataset(cfg.data)
    rows, selected = run_sweep(sfm, dataset, cfg.sweep.alphas, cfg.sweep.n_items, cfg.sample)
    write_sweep_csv(rows, selected, args.out / "sweep.csv")
    for r in rows:
        print(f"alpha={r.alpha:<5g} t={r.mean_t_tilde:.4f} sigma={r.mean_sigma_tilde:.4f} w2={r.distribution_w2:.4f}")
    print(f"selected alpha={selected:g}")
    return EXIT_OK


def cmd_dataset(args) -> int:
    cfg = _resolve(args)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "dataset.csv"
    write_dataset_csv(generate_dataset(cfg.data), path)
    print(f"wrote {cfg.data.n_items} items to {path}")
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "train": cmd_train,
    "sample": cmd_sample,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
    "dataset": cmd_dataset,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:  # includes CheckpointError
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ShallowFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
