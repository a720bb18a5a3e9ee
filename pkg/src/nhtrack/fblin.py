"""Input-output feedback linearization of the vehicle network.

Per vehicle the error coordinates are ``eta_i = (eps, eps', eps'')`` with
``eps = y_i - z_i`` and xy interleaved, so the stacked vector is
vehicle-major: ``(eps_x, eps_y, eps'_x, eps'_y, eps''_x, eps''_y)`` per block.
Third output derivatives are ``y''' = sigma(x) + psi(x) u``; the control is
found from the implicit network equation ``M u = Psi^-1 (-sigma + z'''_sigma
+ K eta)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .netgraph import CommNetwork, check_balance
from .resilience import trimmed_weights
from .vehicle import FORCE, OMEGA, THETA, VX, NetworkState, output_derivatives

PIVOT_TOL = 1e-12

# dense LU with partial pivoting (LAPACK getrf/getrs)
_getrf, _getrs = scipy.linalg.lapack.get_lapack_funcs(("getrf", "getrs"), dtype=np.float64)


class ControlSingularity(RuntimeError):
    """A vehicle speed fell below the guard, so ``psi_i`` is (nearly) singular."""

    def __init__(self, vehicle: int, speed: float, t: float | None = None):
        where = "" if t is None else f" at t={t:.6g}"
        super().__init__(f"|v_x| = {abs(speed):.3g} below guard for vehicle {vehicle}{where}")
        self.vehicle, self.speed, self.t = vehicle, speed, t


class SingularControlMatrix(RuntimeError):
    def __init__(self, cond: float, t: float | None = None):
        where = "" if t is None else f" at t={t:.6g}"
        super().__init__(f"control matrix M numerically singular{where} (cond ~ {cond:.3g})")
        self.cond, self.t = cond, t


# --- linear part -----------------------------------------------------------

CHAIN_A = np.zeros((6, 6))
CHAIN_A[[0, 1, 2, 3], [2, 3, 4, 5]] = 1.0
CHAIN_B = np.zeros((6, 2))
CHAIN_B[4, 0] = CHAIN_B[5, 1] = 1.0


def chain_matrices(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Block-diagonal ``(I_m kron A, I_m kron B)`` for ``m`` double triple-integrators."""
    eye = np.eye(m)
    return np.kron(eye, CHAIN_A), np.kron(eye, CHAIN_B)


def gains_from_pole(p: float) -> tuple[float, float, float]:
    """Gains placing the per-axis triple pole at ``-p``: ``(p^3, 3p^2, 3p)``."""
    if not p > 0:
        raise ValueError(f"pole must be positive, got {p}")
    return (p**3, 3.0 * p**2, 3.0 * p)


@dataclass(frozen=True)
class ControllerConfig:
    """Per-axis gains ``(k1, k2, k3)`` for ``u+ = -k1 eps - k2 eps' - k3 eps''``."""

    gains: tuple[float, float, float] = field(default_factory=lambda: gains_from_pole(2.0))
    v_min: float = 0.05
    pole: float | None = 2.0

    def __post_init__(self):
        k1, k2, k3 = self.gains
        if not (k1 > 0 and k2 > 0 and k3 > 0 and k2 * k3 > k1):
            raise ValueError(f"gains {self.gains} do not give a Hurwitz s^3 + k3 s^2 + k2 s + k1")
        if not self.v_min > 0:
            raise ValueError("v_min must be positive")

    @classmethod
    def from_pole(cls, p: float = 2.0, v_min: float = 0.05) -> ControllerConfig:
        return cls(gains_from_pole(p), v_min, p)

    def block_gain(self) -> np.ndarray:
        k1, k2, k3 = self.gains
        return -np.kron(np.array([[k1, k2, k3]]), np.eye(2))

    def gain_matrix(self, m: int) -> np.ndarray:
        """Network gain ``K`` (``2m x 6m``) acting on the stacked ``eta``."""
        return np.kron(np.eye(m), self.block_gain())

    def closed_loop(self, m: int) -> np.ndarray:
        A, B = chain_matrices(m)
        return A + B @ self.gain_matrix(m)


# --- nonlinear terms -------------------------------------------------------

@dataclass(frozen=True)
class LinearizationTerms:
    sigma: np.ndarray  # (m, 2)
    psi: np.ndarray  # (m, 2, 2)
    lam: np.ndarray | None = None  # (m, 2), sigma - z''' when z''' is known


def sigma_psi(s) -> tuple[np.ndarray, np.ndarray]:
    """Drift ``sigma`` and input matrix ``psi`` of ``y''' = sigma + psi u``.

    Vectorised: ``s`` of shape ``(..., 6)`` gives ``(..., 2)`` and ``(..., 2, 2)``.
    """
    s = np.asarray(s, dtype=float)
    th, v, w, F = s[..., THETA], s[..., VX], s[..., OMEGA], s[..., FORCE]
    c, sn = np.cos(th), np.sin(th)
    sigma = np.empty(s.shape[:-1] + (2,))
    sigma[..., 0] = -(2 * F * w * sn + v * w**2 * c)
    sigma[..., 1] = 2 * F * w * c - v * w**2 * sn
    psi = np.empty(s.shape[:-1] + (2, 2))
    psi[..., 0, 0] = c
    psi[..., 0, 1] = -v * sn
    psi[..., 1, 0] = sn
    psi[..., 1, 1] = v * c
    return sigma, psi


def linearization_terms(states, z3=None) -> LinearizationTerms:
    sigma, psi = sigma_psi(states)
    lam = None if z3 is None else sigma - np.asarray(z3, dtype=float)
    return LinearizationTerms(sigma, psi, lam)


# --- error coordinates -----------------------------------------------------

@dataclass
class ErrorState:
    """Error coordinates for every vehicle.

    ``eta`` is ``(m, 3, 2)``: derivative order by axis. ``z`` holds the
    references (order 0..2) and ``weights`` the fusion weights actually used.
    """

    eta: np.ndarray
    z: np.ndarray
    weights: np.ndarray
    trims: dict = field(default_factory=dict)

    @property
    def stacked(self) -> np.ndarray:
        """Vehicle-major ``eta`` of length ``6m``."""
        return self.eta.reshape(-1)

    @property
    def eps(self) -> np.ndarray:
        return self.eta[:, 0, :]


def node_signals(states: np.ndarray, nav: np.ndarray) -> np.ndarray:
    """``(m+1, 3, 2)`` outputs and derivatives of all nodes, navigator first."""
    y, yd, ydd = output_derivatives(states)
    out = np.empty((states.shape[0] + 1, 3, 2))
    out[0] = nav[:3]
    out[1:, 0], out[1:, 1], out[1:, 2] = y, yd, ydd
    return out


def received_positions(signals: np.ndarray, view=None, t: float = 0.0) -> np.ndarray:
    """``(m, m+1, 2)``: the position vehicle ``i`` receives from node ``j``."""
    m = signals.shape[0] - 1
    rec = np.broadcast_to(signals[:, 0], (m, m + 1, 2)).copy()
    if view is not None and len(view):
        rec[view.receivers - 1, view.senders] += view.at(t, order=0)[:, 0]
    return rec


def corruption_term(weights: np.ndarray, view, t: float) -> np.ndarray:
    """``sum_j w_ij a_ij`` (orders 0..2) per vehicle, shape ``(m, 3, 2)``."""
    if view is None or not len(view):
        return np.zeros((weights.shape[0], 3, 2))
    w = weights[view.receivers - 1, view.senders]
    return (view.incidence @ (w[:, None] * view.at(t).reshape(len(view), 6))).reshape(-1, 3, 2)


def fuse(weights: np.ndarray, signals: np.ndarray, view=None, t: float = 0.0) -> np.ndarray:
    """References ``z`` (orders 0..2) for fixed fusion ``weights``."""
    z = (weights @ signals.reshape(signals.shape[0], -1)).reshape(-1, 3, 2)
    if view is not None:
        z += corruption_term(weights, view, t)
    return z


def build_eta(net_state: NetworkState, net: CommNetwork, traj, attacks=None, res=None) -> ErrorState:
    """Error coordinates from the current states and (possibly corrupted) neighbour signals.

    ``attacks`` is an :class:`~nhtrack.adversary.AttackView` and ``res`` a
    :class:`~nhtrack.resilience.ResilienceConfig`; when ``res`` is given the
    fusion weights are the trimmed, renormalised ones.
    """
    if not check_balance(net):
        raise ValueError("network weights are not balanced; normalize first")
    states = net_state.states
    signals = node_signals(states, traj.evaluate(net_state.t))
    weights, trims = net.weights, {}
    if res is not None and res.theta > 0:
        rec = received_positions(signals, attacks, net_state.t)
        weights, trims = trimmed_weights(net, res, rec)
    z = fuse(weights, signals, attacks, net_state.t)
    eta = signals[1:] - z
    return ErrorState(eta, z, weights, trims)


# --- control solve ---------------------------------------------------------

def control_system(states, eta, weights, cfg: ControllerConfig, nav3):
    """Assemble ``(M, rhs)`` of the implicit control equation.

    ``weights`` is the ``m x (m+1)`` fusion matrix (column 0 navigator),
    ``nav3`` the navigator's third derivative.
    """
    states = np.asarray(states, dtype=float)
    m = states.shape[0]
    _guard_speed(states, cfg)
    sigma, psi = sigma_psi(states)
    psi_inv = _inv2(psi, states[:, VX])
    A = weights[:, 1:]
    z3_sigma = A @ sigma + weights[:, :1] * nav3
    eta = np.asarray(eta, dtype=float).reshape(m, 3, 2)
    k1, k2, k3 = cfg.gains
    u_plus = -k1 * eta[:, 0] - k2 * eta[:, 1] - k3 * eta[:, 2]
    rhs = (psi_inv @ (-sigma + z3_sigma + u_plus)[:, :, None]).reshape(-1)
    # M = I - Psi^-1 (A kron I2) Psi; block (i, j) is A_ij psi_i^-1 psi_j
    coupling = (psi_inv[:, None] @ psi[None]) * A[:, :, None, None]
    M = np.eye(2 * m) - coupling.transpose(0, 2, 1, 3).reshape(2 * m, 2 * m)
    return M, rhs


def solve_control(net_state: NetworkState, eta: ErrorState, net: CommNetwork, cfg: ControllerConfig,
                  traj, weights=None) -> np.ndarray:
    """Virtual inputs ``(m, 2)`` solving ``M u = rhs`` by LU with partial pivoting."""
    W = eta.weights if weights is None else weights
    nav3 = traj.evaluate(net_state.t)[3]
    try:
        M, rhs = control_system(net_state.states, eta.eta, W, cfg, nav3)
    except ControlSingularity as err:
        err.t = net_state.t
        raise
    u, _ = lu_solve_checked(M, rhs, net_state.t)
    return u.reshape(-1, 2)


def lu_solve_checked(M, rhs, t=None):
    """LU solve with a pivot check; returns the solution and its residual (inf-norm)."""
    lu, piv, info = _getrf(M)
    if info > 0 or np.min(np.abs(np.diagonal(lu))) < PIVOT_TOL:
        raise SingularControlMatrix(float(np.linalg.cond(M)), t)
    u, info = _getrs(lu, piv, rhs)
    return u, float(np.max(np.abs(M @ u - rhs)))


def _guard_speed(states, cfg):
    v = states[:, VX]
    if np.abs(v).min() >= cfg.v_min:
        return
    low = np.flatnonzero(np.abs(v) < cfg.v_min)
    if low.size:
        raise ControlSingularity(int(low[0]) + 1, float(v[low[0]]))


def _inv2(psi, v):
    """Closed-form inverse of each ``psi_i`` (determinant equals ``v_i``)."""
    inv = np.empty_like(psi)
    inv[:, 0, 0] = psi[:, 1, 1]
    inv[:, 0, 1] = -psi[:, 0, 1]
    inv[:, 1, 0] = -psi[:, 1, 0]
    inv[:, 1, 1] = psi[:, 0, 0]
    return inv / v[:, None, None]
