import csv

import numpy as np
import pytest

from shallowflow.bench import (
    BENCH_COLUMNS,
    SWEEP_COLUMNS,
    fit_isotropic,
    read_sweep_selected,
    run_bench,
    run_sweep,
    write_bench_csv,
    write_sweep_csv,
)
from shallowflow.pipeline import SampleConfig, item_rng, sfm_start

BASE = SampleConfig(rtol=1e-3, atol=1e-3)


@pytest.fixture(scope="module")
def bench_rows(tiny_models):
    nets, _ = tiny_models
    return run_bench(nets["sfm"], nets["ablated"], ["bosh3"], [1.0, 2.0], n_items=3, repeats=2, base=BASE)


@pytest.fixture(scope="module")
def sweep(tiny_models):
    nets, data = tiny_models
    return run_sweep(nets["sfm"], data, [1.0, 2.0, 50.0, 100.0], n_items=6, base=BASE)


def test_bench_rows(bench_rows):
    assert [(r.system, r.alpha) for r in bench_rows] == [("ablated", None), ("sfm", 1.0), ("sfm", 2.0)]
    ablated = bench_rows[0]
    assert ablated.speedup_rate_percent == 0.0
    for r in bench_rows[1:]:
        assert r.speedup_rate_percent == pytest.approx(100 * (ablated.mean_nfe - r.mean_nfe) / ablated.mean_nfe)


def test_bench_csv(bench_rows, tmp_path):
    path = tmp_path / "bench.csv"
    write_bench_csv(bench_rows, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == BENCH_COLUMNS
    assert rows[1][1] == ""  # the ablated system has no alpha
    write_bench_csv(bench_rows, tmp_path / "again.csv")
    assert path.read_bytes() == (tmp_path / "again.csv").read_bytes()


def test_start_time_doubles_until_clamped(tiny_models):
    nets, _ = tiny_models
    for i in range(6):
        t1 = float(sfm_start(nets["sfm"], i % 3, 1.0, item_rng(0, i))[0].t_tilde)
        state = sfm_start(nets["sfm"], i % 3, 2.0, item_rng(0, i))[0]
        s2 = (1 - 1e-4) * float(state.t_tilde) + np.sqrt(float(state.sigma_tilde_sq))
        if s2 < 1.0 - 1e-12:  # alpha = 2 still below the clamp
            assert float(state.t_tilde) == pytest.approx(2 * t1, abs=1e-9)


def test_sweep_saturation_and_selection(sweep):
    rows, selected = sweep
    assert rows[2].mean_t_tilde == rows[3].mean_t_tilde
    assert rows[2].mean_sigma_tilde == rows[3].mean_sigma_tilde
    assert selected == min(rows, key=lambda r: r.distribution_w2).alpha


def test_sweep_csv_header(sweep, tmp_path):
    rows, selected = sweep
    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, selected, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# selected_alpha=")
    assert lines[1].split(",") == SWEEP_COLUMNS
    assert read_sweep_selected(path) == selected


def test_fit_isotropic():
    rng = np.random.default_rng(0)
    x = 2.0 + 0.5 * rng.standard_normal((20_000, 3, 2))
    g = fit_isotropic(x)
    np.testing.assert_allclose(g.mean, 2.0, atol=0.02)
    assert g.std == pytest.approx(0.5, rel=0.01)
