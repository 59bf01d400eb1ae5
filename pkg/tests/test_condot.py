import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shallowflow.condot import (
    IsotropicGaussian,
    PathConfig,
    check_sample,
    condot_flow,
    condot_vf,
    gaussian_w2,
    path_marginal_stats,
)
from shallowflow.errors import DimensionError, DomainError


def test_flow_endpoints():
    rng = np.random.default_rng(0)
    x0, x1 = rng.standard_normal((2, 5, 3))
    cfg = PathConfig(1e-4)
    np.testing.assert_array_equal(condot_flow(x0, x1, 0.0, cfg), x0)
    np.testing.assert_allclose(condot_flow(x0, x1, 1.0, cfg), x1 + 1e-4 * x0, rtol=0, atol=1e-15)


def test_flow_scalar_example():
    # sigma_min = 0 and t = 1/2 gives the midpoint
    out = condot_flow(np.array([[0.0]]), np.array([[2.0]]), 0.5, PathConfig(0.0))
    assert out[0, 0] == 1.0


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0, 1), s=st.floats(0, 0.2), seed=st.integers(0, 2**16))
def test_vf_is_time_derivative(t, s, seed):
    rng = np.random.default_rng(seed)
    x0, x1 = rng.standard_normal((2, 4, 2))
    cfg = PathConfig(s)
    h = 1e-6
    lo, hi = max(t - h, 0.0), min(t + h, 1.0)
    fd = (condot_flow(x0, x1, hi, cfg) - condot_flow(x0, x1, lo, cfg)) / (hi - lo)
    np.testing.assert_allclose(fd, condot_vf(x0, x1, cfg), atol=1e-6)


def test_marginal_stats_match_monte_carlo():
    cfg = PathConfig(1e-4)
    rng = np.random.default_rng(1)
    x1 = np.full((1, 4), 2.0)
    x0 = rng.standard_normal((200_000, 1, 4))
    t = 0.3
    xt = condot_flow(x0, np.broadcast_to(x1, x0.shape), t, cfg)
    m, s = path_marginal_stats(t, cfg)
    assert abs(xt.mean() - m * 2.0) < 5e-3
    assert abs(xt.std() - s) < 5e-3


def test_marginal_stats_endpoints():
    assert path_marginal_stats(0.0) == (0.0, 1.0)
    m, s = path_marginal_stats(1.0, PathConfig(1e-4))
    assert m == 1.0 and math.isclose(s, 1e-4)


def test_w2_examples():
    a = IsotropicGaussian(np.zeros(4), 1.0)
    assert gaussian_w2(a, a) == 0.0
    b = IsotropicGaussian(np.array([3.0, 4.0, 0.0, 0.0]), 1.0)
    assert gaussian_w2(a, b) == 5.0
    c = IsotropicGaussian(np.zeros(4), 2.0)
    assert gaussian_w2(a, c) == 2.0  # sqrt(d) * |1 - 2|
    point = IsotropicGaussian(np.zeros(4), 0.0)
    assert gaussian_w2(a, point) == 2.0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**16))
def test_w2_is_a_metric_on_samples(seed):
    rng = np.random.default_rng(seed)
    g = [IsotropicGaussian(rng.standard_normal(3), float(rng.uniform(0.1, 2))) for _ in range(3)]
    assert gaussian_w2(g[0], g[1]) == pytest.approx(gaussian_w2(g[1], g[0]))
    assert gaussian_w2(g[0], g[2]) <= gaussian_w2(g[0], g[1]) + gaussian_w2(g[1], g[2]) + 1e-12


def test_validation_errors():
    with pytest.raises(DomainError):
        PathConfig(0.5)
    with pytest.raises(DomainError):
        IsotropicGaussian(np.zeros(2), -1.0)
    with pytest.raises(DimensionError):
        gaussian_w2(IsotropicGaussian(np.zeros(2), 1.0), IsotropicGaussian(np.zeros(3), 1.0))
    with pytest.raises(DimensionError):
        condot_flow(np.zeros((2, 2)), np.zeros((3, 2)), 0.5)
    with pytest.raises(DomainError):
        condot_flow(np.zeros((2, 2)), np.zeros((2, 2)), 1.5)
    with pytest.raises(ValueError):
        check_sample(np.array([[np.nan]]))
