import math
import warnings

import numpy as np
import pytest

from shallowflow import losses as L
from shallowflow.errors import DimensionError, DivergenceError


def _fd(f, x, h=1e-4):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        hi = f(x)
        x[idx] = old - h
        lo = f(x)
        x[idx] = old
        g[idx] = (hi - lo) / (2 * h)
    return g


def test_mse_losses_and_grads():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((2, 3, 4, 2))
    assert L.coarse_loss(a, b) == pytest.approx(np.mean((a - b) ** 2))
    np.testing.assert_allclose(L.cfm_loss_grad(a, b), _fd(lambda x: L.cfm_loss(x, b), a.copy()), rtol=1e-6, atol=1e-12)
    np.testing.assert_allclose(L.coarse_loss_grad(a, b), _fd(lambda x: L.coarse_loss(x, b), a.copy()), rtol=1e-6, atol=1e-12)


def test_mu_loss_grad_per_item_time():
    rng = np.random.default_rng(1)
    x, x1 = rng.standard_normal((2, 3, 4, 2))
    t = np.array([0.1, 0.4, 0.8])
    np.testing.assert_allclose(L.mu_loss_grad(x, x1, t), _fd(lambda z: L.mu_loss(z, x1, t), x.copy()), rtol=1e-6, atol=1e-12)


def test_scalar_losses_and_grads():
    t_hat, lv_hat = np.array([0.2, 0.5]), np.array([-1.0, 0.5])
    t_tar, lv_tar = np.array([0.1, 0.4]), np.array([-2.0, 0.0])
    l_t, l_s = L.scalar_losses(t_hat, t_tar, lv_hat, lv_tar)
    assert l_t == pytest.approx(0.01)
    assert l_s == pytest.approx((1.0 + 0.25) / 2)
    g_t, g_s = L.scalar_losses_grad(t_hat, t_tar, lv_hat, lv_tar)
    np.testing.assert_allclose(g_t, _fd(lambda z: L.scalar_losses(z, t_tar, lv_hat, lv_tar)[0], t_hat.copy()), rtol=1e-6, atol=1e-12)
    np.testing.assert_allclose(g_s, _fd(lambda z: L.scalar_losses(t_hat, t_tar, z, lv_tar)[1], lv_hat.copy()), rtol=1e-6, atol=1e-12)


def test_scalar_loss_example():
    assert L.scalar_losses(0.3, 0.3, 0.0, -2.0) == (0.0, 4.0)


def test_log_variance_floor_warns():
    with pytest.warns(RuntimeWarning):
        assert L.log_variance(0.0) == pytest.approx(math.log(L.VAR_FLOOR))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert L.log_variance(1.0) == 0.0


def test_total_is_order_independent_sum():
    parts = (0.1, 1e-17, 3.0, 1e16, -1e16)
    out = L.total_sfm_loss(*parts)
    assert out.total == math.fsum(parts)
    assert L.total_sfm_loss(*reversed(parts)).total == out.total
    assert out.as_row() == [*parts, out.total]


def test_errors():
    with pytest.raises(DimensionError):
        L.cfm_loss(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(DivergenceError):
        L.total_sfm_loss(0.0, float("nan"), 0.0, 0.0, 0.0)
