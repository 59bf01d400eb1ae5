"""Seeded toy datasets of frame-structured sequences.

``sinusoid_classes``: class ``k`` has a fixed trajectory
``A[k, c] sin(2 pi f[k, c] n / N + phi[k, c])`` per channel ``c``; items add
i.i.d. ``N(0, rho^2)`` noise, so each class is ``N(mean_k, rho^2 I)``.
``gaussian_mixture``: same, with class means drawn i.i.d. standard normal.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError

__all__ = ["DatasetKind", "DatasetSpec", "Dataset", "generate_dataset", "write_dataset_csv"]


class DatasetKind(str, enum.Enum):
    SINUSOID_CLASSES = "sinusoid_classes"
    GAUSSIAN_MIXTURE = "gaussian_mixture"


@dataclass(frozen=True)
class DatasetSpec:
    kind: DatasetKind = DatasetKind.SINUSOID_CLASSES
    n_items: int = 2048
    n_frames: int = 32
    n_channels: int = 2
    n_classes: int = 4
    noise_scale: float = 0.7
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", DatasetKind(self.kind))
        if self.n_frames < 1 or self.n_channels < 1 or self.n_classes < 1:
            raise DomainError("n_frames, n_channels and n_classes must be positive")
        if self.n_items < self.n_classes:
            raise DomainError(f"n_items ({self.n_items}) must be >= n_classes ({self.n_classes})")
        if self.noise_scale < 0:
            raise DomainError("noise_scale must be non-negative")


@dataclass(frozen=True)
class Dataset:
    spec: DatasetSpec
    labels: np.ndarray  # (n_items,)
    x1: np.ndarray  # (n_items, N, F)
    class_means: np.ndarray  # (K, N, F)

    def __len__(self) -> int:
        return self.labels.size

    def conditions(self) -> np.ndarray:
        """One-hot class conditions, shape ``(n_items, K)``."""
        return np.eye(self.spec.n_classes)[self.labels]

    def __iter__(self):
        return iter(zip(self.conditions(), self.x1))


def _class_means(spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    k, n, f = spec.n_classes, spec.n_frames, spec.n_channels
    if spec.kind is DatasetKind.GAUSSIAN_MIXTURE:
        return rng.standard_normal((k, n, f))
    amp = rng.uniform(1.0, 2.0, size=(k, 1, f))
    freq = rng.integers(1, 4, size=(k, 1, f))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(k, 1, f))
    frames = np.arange(n)[None, :, None]
    return amp * np.sin(2.0 * np.pi * freq * frames / n + phase)


def generate_dataset(spec: DatasetSpec) -> Dataset:
    """Deterministic, class-balanced dataset (labels cycle ``0..K-1``)."""
    rng = np.random.default_rng(spec.seed)
    means = _class_means(spec, rng)
    labels = np.arange(spec.n_items) % spec.n_classes
    noise = rng.standard_normal((spec.n_items, spec.n_frames, spec.n_channels))
    x1 = means[labels] + spec.noise_scale * noise
    return Dataset(spec, labels, x1, means)


def write_dataset_csv(dataset: Dataset, path: str | Path) -> None:
    """One row per frame: ``item_id,class,frame,ch0..chF-1``."""
    f = dataset.spec.n_channels
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item_id", "class", "frame"] + [f"ch{c}" for c in range(f)])
        for i, (label, x) in enumerate(zip(dataset.labels, dataset.x1)):
            for n, frame in enumerate(x):
                w.writerow([i, int(label), n] + [f"{v:.6g}" for v in frame])
