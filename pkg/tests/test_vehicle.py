import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhtrack.vehicle import (
    ControlInput,
    IntegrationDivergence,
    NavigatorTrajectory,
    NetworkState,
    VehicleState,
    derivative,
    eval_navigator,
    output_derivatives,
    ring_initial_states,
    step,
)

finite = st.floats(-5.0, 5.0, allow_nan=False)
states = st.lists(finite, min_size=6, max_size=6).map(np.array)


def test_derivative_straight():
    assert np.array_equal(derivative([0, 0, 0, 1, 0, 0], [0, 0]), [1, 0, 0, 0, 0, 0])


def test_derivative_quarter_turn():
    d = derivative([0, 0, math.pi / 2, 2, 0, 0], [0, 0])
    assert np.allclose(d, [0, 2, 0, 0, 0, 0], atol=1e-15)


def test_derivative_generic():
    px, py, th, v, w, F = 1, 1, 0.3, 1.5, 0.2, 0.4
    u1, u2 = 0.1, -0.2
    expected = [v * math.cos(th), v * math.sin(th), w, F, u2, u1]
    assert np.allclose(derivative([px, py, th, v, w, F], [u1, u2]), expected, rtol=0, atol=1e-15)


def test_output_derivatives_examples():
    y, yd, ydd = output_derivatives([0, 0, 0, 1, 0, 0])
    assert np.array_equal(y, [0, 0]) and np.array_equal(yd, [1, 0]) and np.array_equal(ydd, [0, 0])
    assert np.allclose(output_derivatives([0, 0, 0, 1, 1, 0])[2], [0, 1])


def test_output_derivatives_finite_difference():
    # integrate with constant inputs and difference the logged velocity
    dt = 1e-3
    x = NetworkState(0.0, [[0.0, 0.0, 0.4, 1.2, 0.3, -0.2]])
    u = [[0.5, -0.1]]
    yd, ydd = [], []
    for _ in range(200):
        _, a, b = output_derivatives(x.states[0])
        yd.append(a)
        ydd.append(b)
        x = step(x, u, dt)
    yd, ydd = np.array(yd), np.array(ydd)
    fd = (yd[2:] - yd[:-2]) / (2 * dt)
    assert np.max(np.abs(fd - ydd[1:-1])) < 1e-6


def test_step_at_rest():
    x = NetworkState(1.0, np.zeros((3, 6)))
    out = step(x, np.zeros((3, 2)), 0.01)
    assert np.array_equal(out.states, x.states)
    assert out.t == pytest.approx(1.01)


def test_step_linear_flow():
    out = step(NetworkState(0.0, [[0, 0, 0, 1, 0, 0]]), [[0, 0]], 0.01)
    assert abs(out.states[0, 0] - 0.01) <= 1e-17


def _integrate(x0, u, T, dt):
    x = NetworkState(0.0, x0)
    for _ in range(int(round(T / dt))):
        x = step(x, u, dt)
    return x.states


def test_rk4_step_halving_ratio():
    x0 = np.array([[0.0, 0.0, 0.1, 1.0, 0.5, 0.2]])
    u = [[0.3, -0.4]]
    ref = _integrate(x0, u, 2.0, 0.1 / 16)
    e1 = np.abs(_integrate(x0, u, 2.0, 0.1) - ref).max()
    e2 = np.abs(_integrate(x0, u, 2.0, 0.05) - ref).max()
    assert 12 <= e1 / e2 <= 20


def test_step_deterministic():
    x = NetworkState(0.0, ring_initial_states(NavigatorTrajectory(), 5))
    u = np.linspace(-1, 1, 10).reshape(5, 2)
    assert np.array_equal(step(x, u, 1e-3).states, step(x, u, 1e-3).states)


def test_step_divergence():
    x = NetworkState(0.0, [[0, 0, 0, 1, 0, 0], [0, 0, 0, 1, 0, 1e308]])
    with pytest.raises(IntegrationDivergence) as err:
        step(x, [[0, 0], [1e308, 0]], 10.0)
    assert err.value.vehicle == 2


def test_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        step(NetworkState(0.0, np.zeros((1, 6))), [[0, 0]], 0.0)


@settings(max_examples=100, deadline=None)
@given(states)
def test_nonholonomic_constraint(s):
    d = derivative(s, [0.0, 0.0])
    assert abs(d[0] * math.sin(s[2]) - d[1] * math.cos(s[2])) <= 1e-12 * max(1.0, abs(s[3]))


def test_nonholonomic_along_run():
    x = NetworkState(0.0, ring_initial_states(NavigatorTrajectory(), 4))
    u = np.array([[0.2, 0.1], [-0.1, 0.3], [0.0, -0.2], [0.1, 0.0]])
    for _ in range(100):
        d = derivative(x.states, u)
        th = x.states[:, 2]
        assert np.max(np.abs(d[:, 0] * np.sin(th) - d[:, 1] * np.cos(th))) <= 1e-12
        x = step(x, u, 1e-2)


def test_state_roundtrip():
    s = VehicleState(1, 2, 3, 4, 5, 6)
    assert VehicleState.from_array(s.as_array()) == s
    assert NetworkState(0.0, [s.as_array()]).vehicle(1) == s
    assert ControlInput(1.0, 2.0).u2 == 2.0


def test_navigator_unit_circle():
    y, yd, ydd, yddd = eval_navigator(NavigatorTrajectory("circle", radius=1.0, omega=1.0), 0.0)
    for got, want in zip((y, yd, ydd, yddd), ((1, 0), (0, 1), (-1, 0), (0, -1))):
        assert np.allclose(got, want, atol=1e-15)


def test_navigator_line():
    d = NavigatorTrajectory("line", velocity=(1.0, 2.0)).evaluate(3.0)
    assert np.array_equal(d, [[3, 6], [1, 2], [0, 0], [0, 0]])


@pytest.mark.parametrize("kind", ["circle", "lemniscate"])
def test_navigator_finite_differences(kind):
    traj = NavigatorTrajectory(kind, a_x=3.0, a_y=2.0, omega=0.7, center=(1.0, -1.0))
    h = 1e-4
    for t in (0.0, 1.3, 7.9):
        lo, mid, hi = traj.evaluate(t - h), traj.evaluate(t), traj.evaluate(t + h)
        fd = (hi[:3] - lo[:3]) / (2 * h)
        assert np.allclose(fd, mid[1:], atol=1e-6)


def test_navigator_unknown_kind():
    with pytest.raises(ValueError):
        NavigatorTrajectory("spiral")


def test_ring_initial_states():
    traj = NavigatorTrajectory()
    x = ring_initial_states(traj, 4, radius=2.0)
    y0, yd0, _, _ = eval_navigator(traj, 0.0)
    assert np.allclose(np.hypot(x[:, 0] - y0[0], x[:, 1] - y0[1]), 2.0)
    assert np.allclose(x[:, 3], np.hypot(*yd0))
    assert np.allclose(x[:, 2], math.atan2(yd0[1], yd0[0]))
    assert np.array_equal(x[:, 4:], np.zeros((4, 2)))
