import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shallowflow.condot import PathConfig, condot_flow, condot_vf
from shallowflow.errors import DomainError
from shallowflow.piecewise import apply_scheduler, schedule_time, segment_point, segment_vf, two_segment_eval

PATH = PathConfig(1e-4)


@pytest.mark.parametrize("kind", ["identity", "cosine"])
def test_scheduler_fixes_endpoints_and_is_monotone(kind):
    assert apply_scheduler(0.0, kind) == 0.0
    assert apply_scheduler(1.0, kind) == pytest.approx(1.0, abs=1e-15)
    u = np.linspace(0, 1, 101)
    assert np.all(np.diff(apply_scheduler(u, kind)) >= 0)


def test_schedule_time_maps_onto_segment():
    t_s, t = schedule_time(np.array([0.0, 0.5, 1.0]), 0.2)
    np.testing.assert_allclose(t, [0.2, 0.6, 1.0])
    np.testing.assert_allclose(t_s, [0.0, 0.5, 1.0])


def test_segment_endpoints():
    rng = np.random.default_rng(0)
    xs, x1, x0 = rng.standard_normal((3, 4, 2))
    np.testing.assert_array_equal(segment_point(xs, x1, x0, 0.0, PATH), xs)
    np.testing.assert_allclose(segment_point(xs, x1, x0, 1.0, PATH), x1 + 1e-4 * x0)


def test_segment_vf_is_slope_in_global_time():
    rng = np.random.default_rng(1)
    xs, x1, x0 = rng.standard_normal((3, 4, 2))
    t_tilde = 0.3
    v = segment_vf(xs, x1, x0, t_tilde, PATH)
    # moving t_s by dt / (1 - t_tilde) moves global time by dt
    dt = 1e-3
    step = segment_point(xs, x1, x0, dt / (1 - t_tilde), PATH) - xs
    np.testing.assert_allclose(step / dt, v, rtol=1e-10)


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 1), t_m=st.floats(0.01, 0.99), seed=st.integers(0, 2**16))
def test_two_segment_identity(t, t_m, seed):
    rng = np.random.default_rng(seed)
    x0, x1 = rng.standard_normal((2, 3, 2))
    x_tm = condot_flow(x0, x1, t_m, PATH)
    flow, vel = two_segment_eval(x0, x_tm, x1, t, t_m, PATH)
    np.testing.assert_allclose(flow, condot_flow(x0, x1, t, PATH), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(vel, condot_vf(x0, x1, PATH), rtol=1e-11, atol=1e-12)


def test_domain_errors():
    z = np.zeros((2, 2))
    with pytest.raises(DomainError):
        two_segment_eval(z, z, z, 0.5, 1.0)
    with pytest.raises(DomainError):
        segment_vf(z, z, z, 1.0)
    with pytest.raises(DomainError):
        segment_point(z, z, z, 1.5)
    with pytest.raises(ValueError):
        apply_scheduler(0.5, "nope")
