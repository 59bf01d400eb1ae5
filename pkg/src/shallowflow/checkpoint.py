"""Checkpoint directory: ``manifest.json`` plus a raw ``params.bin`` payload.

The payload holds every parameter as little-endian float32, net by net in
``SfmNets.named_nets`` order, each layer's weight (row-major) then bias.
Loading widens to float64, so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .models import ModelConfig, SfmNets
from .nn import Layer, MlpNet

__all__ = ["FORMAT_VERSION", "save_checkpoint", "load_checkpoint", "quantize"]

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
PAYLOAD = "params.bin"
_DTYPE = np.dtype("<f4")


def _manifest(nets: SfmNets, meta: dict | None) -> dict:
    layout = {}
    for name, net in nets.named_nets():
        layout[name] = [
            {"in": l.weight.shape[0], "out": l.weight.shape[1], "activation": l.activation} for l in net.layers
        ]
    return {
        "format_version": FORMAT_VERSION,
        "dtype": "float32-le",
        "payload": PAYLOAD,
        "param_count": sum(p.size for p in nets.parameters()),
        "model": nets.config.to_dict(),
        "nets": layout,
        "meta": meta or {},
    }


def save_checkpoint(nets: SfmNets, path: str | Path, meta: dict | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    payload = b"".join(np.ascontiguousarray(p, dtype=_DTYPE).tobytes() for p in nets.parameters())
    (path / PAYLOAD).write_bytes(payload)
    text = json.dumps(_manifest(nets, meta), indent=2, sort_keys=True) + "\n"
    (path / MANIFEST).write_text(text)
    return path


def load_checkpoint(path: str | Path) -> tuple[SfmNets, dict]:
    """Return the networks and the manifest's ``meta`` block."""
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST).read_text())
        raw = (path / PAYLOAD).read_bytes()
    except FileNotFoundError as exc:
        raise CheckpointError(f"no checkpoint at {path}: {exc.filename} missing") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"unreadable manifest in {path}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {manifest.get('format_version')!r}")
    flat = np.frombuffer(raw, dtype=_DTYPE).astype(np.float64)
    if flat.size != manifest["param_count"]:
        raise CheckpointError(f"payload has {flat.size} values, manifest says {manifest['param_count']}")

    config = ModelConfig(**manifest["model"])
    offset = 0
    nets = {}
    for name in ("generator", "projection", "head", "vf"):
        layers = []
        for spec in manifest["nets"][name]:
            n_w = spec["in"] * spec["out"]
            w = flat[offset : offset + n_w].reshape(spec["in"], spec["out"]).copy()
            b = flat[offset + n_w : offset + n_w + spec["out"]].copy()
            offset += n_w + spec["out"]
            layers.append(Layer(w, b, spec["activation"]))
        nets[name] = MlpNet(layers)
    return SfmNets(config, **nets), manifest.get("meta", {})


def quantize(nets: SfmNets) -> None:
    """Round parameters in place to the float32 values a checkpoint would store."""
    for p in nets.parameters():
        p[...] = p.astype(_DTYPE)
