"""Dynamically extended unicycle vehicles and the navigator trajectory.

State ordering per vehicle is ``(p_x, p_y, theta, v_x, omega, F)``; the
network state is an ``(m, 6)`` array. Inputs are ``(u1, u2)`` with
``dF/dt = u1`` and ``domega/dt = u2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

PX, PY, THETA, VX, OMEGA, FORCE = range(6)
STATE_NAMES = ("px", "py", "theta", "vx", "omega", "F")


class IntegrationDivergence(RuntimeError):
    """A non-finite state was produced during integration."""

    def __init__(self, vehicle: int, t: float):
        super().__init__(f"non-finite state for vehicle {vehicle} at t={t:.6g}")
        self.vehicle = vehicle
        self.t = t


@dataclass(frozen=True)
class VehicleState:
    p_x: float
    p_y: float
    theta: float
    v_x: float
    omega: float
    F: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_x, self.p_y, self.theta, self.v_x, self.omega, self.F])

    @classmethod
    def from_array(cls, x) -> VehicleState:
        return cls(*(float(v) for v in x))


@dataclass(frozen=True)
class ControlInput:
    u1: float  # jerk channel, dF/dt
    u2: float  # torque channel, domega/dt


@dataclass
class NetworkState:
    t: float
    states: np.ndarray  # (m, 6)

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.states.shape[1] != 6:
            raise ValueError(f"expected (m, 6) states, got {self.states.shape}")

    @property
    def m(self) -> int:
        return self.states.shape[0]

    def vehicle(self, i: int) -> VehicleState:
        """Vehicle ``i`` (1-based, matching graph numbering)."""
        return VehicleState.from_array(self.states[i - 1])


def derivative(s, u) -> np.ndarray:
    """Right-hand side of the extended unicycle, vectorised over leading axes."""
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    th, v = s[..., THETA], s[..., VX]
    out = np.empty(np.broadcast_shapes(s.shape, u.shape[:-1] + (6,)))
    out[..., PX] = v * np.cos(th)
    out[..., PY] = v * np.sin(th)
    out[..., THETA] = s[..., OMEGA]
    out[..., VX] = s[..., FORCE]
    out[..., OMEGA] = u[..., 1]
    out[..., FORCE] = u[..., 0]
    return out


def output_derivatives(s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Planar position and its first two time derivatives.

    Works on a single state ``(6,)`` or a stack ``(m, 6)``; each returned
    array has trailing dimension 2.
    """
    s = np.asarray(s, dtype=float)
    c, sn = np.cos(s[..., THETA]), np.sin(s[..., THETA])
    v, w, F = s[..., VX], s[..., OMEGA], s[..., FORCE]
    y = s[..., PX:PY + 1].copy()
    yd = np.empty_like(y)
    yd[..., 0], yd[..., 1] = v * c, v * sn
    ydd = np.empty_like(y)
    ydd[..., 0] = F * c - v * w * sn
    ydd[..., 1] = F * sn + v * w * c
    return y, yd, ydd


def _check_finite(states: np.ndarray, t: float) -> None:
    bad = ~np.isfinite(states).all(axis=1)
    if bad.any():
        raise IntegrationDivergence(int(np.flatnonzero(bad)[0]) + 1, t)


def step(net_state: NetworkState, controls, dt: float) -> NetworkState:
    """One classical RK4 step with controls held constant over the step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = net_state.states
    u = np.asarray(controls, dtype=float).reshape(x.shape[0], 2)
    # overflow is reported through the finite check below
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = derivative(x, u)
        k2 = derivative(x + 0.5 * dt * k1, u)
        k3 = derivative(x + 0.5 * dt * k2, u)
        k4 = derivative(x + dt * k3, u)
        x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    t_new = net_state.t + dt
    _check_finite(x_new, t_new)
    return NetworkState(t_new, x_new)


def step_closed_loop(
    net_state: NetworkState,
    policy: Callable[[float, np.ndarray], np.ndarray],
    dt: float,
) -> tuple[NetworkState, np.ndarray]:
    """RK4 step with the feedback ``policy(t, states)`` re-evaluated per stage.

    Returns the new state and the control applied at the start of the step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    t, x = net_state.t, net_state.states
    h = 0.5 * dt
    u0 = policy(t, x)
    k1 = derivative(x, u0)
    x2 = x + h * k1
    k2 = derivative(x2, policy(t + h, x2))
    x3 = x + h * k2
    k3 = derivative(x3, policy(t + h, x3))
    x4 = x + dt * k3
    k4 = derivative(x4, policy(t + dt, x4))
    x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _check_finite(x_new, t + dt)
    return NetworkState(t + dt, x_new), u0


# --- navigator -------------------------------------------------------------

_QUARTER_TURNS = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])


def _harmonic(k: float, arg: float) -> np.ndarray:
    """``(4, 2)``: derivatives of order 0..3 of (cos, sin)(k t + phi) at k t + phi = arg."""
    ca, sa = math.cos(arg), math.sin(arg)
    scale = np.array([1.0, k, k * k, k * k * k])[:, None]
    return scale * (_QUARTER_TURNS @ np.array([[ca, sa], [-sa, ca]]))


NAVIGATOR_KINDS = ("circle", "lemniscate", "line")


@dataclass(frozen=True)
class NavigatorTrajectory:
    """Closed-form navigator path.

    ``circle``: center + radius * (cos w t, sin w t).
    ``lemniscate``: center + (a_x sin w t, a_y sin 2 w t / 2).
    ``line``: start + velocity * t.
    """

    kind: str = "circle"
    radius: float = 5.0
    a_x: float = 5.0
    a_y: float = 5.0
    omega: float = 0.2
    center: tuple[float, float] = (0.0, 0.0)
    start: tuple[float, float] = (0.0, 0.0)
    velocity: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if self.kind not in NAVIGATOR_KINDS:
            raise ValueError(f"unknown navigator kind {self.kind!r}")

    def evaluate(self, t: float) -> np.ndarray:
        """``(4, 2)`` array: position and derivatives of order 1..3 at ``t``."""
        out = np.zeros((4, 2))
        if self.kind == "line":
            out[0] = np.add(self.start, np.multiply(self.velocity, t))
            out[1] = self.velocity
            return out
        w = self.omega
        if self.kind == "circle":
            out = self.radius * _harmonic(w, w * t)
        else:
            out[:, 0] = self.a_x * _harmonic(w, w * t)[:, 1]
            out[:, 1] = 0.5 * self.a_y * _harmonic(2 * w, 2 * w * t)[:, 1]
        out[0] += self.center
        return out


def eval_navigator(traj: NavigatorTrajectory, t: float):
    """``(y0, y0', y0'', y0''')`` at time ``t``."""
    d = traj.evaluate(t)
    return d[0], d[1], d[2], d[3]


def ring_initial_states(traj: NavigatorTrajectory, m: int, radius: float = 2.0) -> np.ndarray:
    """Vehicles spread on a ring around the navigator start, moving with it."""
    y0, yd0, _, _ = eval_navigator(traj, 0.0)
    speed = float(np.hypot(*yd0))
    heading = float(np.arctan2(yd0[1], yd0[0])) if speed > 0 else 0.0
    angles = 2.0 * np.pi * np.arange(m) / m
    x = np.zeros((m, 6))
    x[:, PX] = y0[0] + radius * np.cos(angles)
    x[:, PY] = y0[1] + radius * np.sin(angles)
    x[:, THETA] = heading
    x[:, VX] = speed
    return x
