import csv

import numpy as np
import pytest

from shallowflow.data import DatasetKind, DatasetSpec, generate_dataset, write_dataset_csv
from shallowflow.errors import DomainError


def test_deterministic_per_seed():
    a = generate_dataset(DatasetSpec(n_items=64, seed=3))
    b = generate_dataset(DatasetSpec(n_items=64, seed=3))
    np.testing.assert_array_equal(a.x1, b.x1)
    c = generate_dataset(DatasetSpec(n_items=64, seed=4))
    assert not np.array_equal(a.x1, c.x1)


def test_noise_free_items_equal_class_mean():
    d = generate_dataset(DatasetSpec(n_items=16, noise_scale=0.0))
    np.testing.assert_array_equal(d.x1, d.class_means[d.labels])
    assert np.bincount(d.labels).tolist() == [4, 4, 4, 4]


@pytest.mark.parametrize("kind", list(DatasetKind))
def test_class_statistics(kind):
    rho = 0.7
    d = generate_dataset(DatasetSpec(kind=kind, n_items=40_000, n_classes=4, noise_scale=rho))
    for k in range(4):
        items = d.x1[d.labels == k].reshape(10_000, -1)
        mean = d.class_means[k].ravel()
        err = np.linalg.norm(items.mean(axis=0) - mean) / np.linalg.norm(mean)
        assert err < 0.02
        cov = np.cov(items, rowvar=False)
        assert np.diag(cov).mean() == pytest.approx(rho**2, rel=0.05)
        off = cov - np.diag(np.diag(cov))
        assert np.abs(off).max() < 0.05 * rho**2


def test_csv_layout(tmp_path):
    d = generate_dataset(DatasetSpec(n_items=4, n_frames=3, n_channels=2))
    path = tmp_path / "d.csv"
    write_dataset_csv(d, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["item_id", "class", "frame", "ch0", "ch1"]
    assert len(rows) == 1 + 4 * 3
    assert float(rows[1][3]) == pytest.approx(d.x1[0, 0, 0], rel=1e-5)


def test_validation():
    with pytest.raises(DomainError):
        DatasetSpec(n_items=2, n_classes=4)
    with pytest.raises(DomainError):
        DatasetSpec(noise_scale=-1.0)
    with pytest.raises(ValueError):
        DatasetSpec(kind="spirals")
