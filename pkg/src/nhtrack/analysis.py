"""Tracking metrics, Hurwitz/Lyapunov checks and the ultimate-bound certificate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .fblin import chain_matrices
from .netgraph import CommNetwork


class CertificateError(ValueError):
    pass


@dataclass
class MetricsSeries:
    t: np.ndarray
    e_tilde: np.ndarray  # mean |y_i - y_0|
    eps_tilde: np.ndarray  # mean |y_i - z_i|
    eta_norm: np.ndarray
    e_vehicle: np.ndarray  # (N, m)
    eps_vehicle: np.ndarray  # (N, m)


def compute_metrics(run) -> MetricsSeries:
    """Averaged leader-tracking and reference-disagreement errors of a run log."""
    y = run.states[:, :, :2]
    e = np.linalg.norm(y - run.nav[:, None, 0], axis=2)
    eps = np.linalg.norm(y - run.z, axis=2)
    return MetricsSeries(run.t, e.mean(axis=1), eps.mean(axis=1), run.eta_norm, e, eps)


def steady_state(values, frac: float = 0.2) -> float:
    """limsup proxy: the maximum over the final ``frac`` of the samples."""
    values = np.asarray(values)
    start = int(np.floor((1.0 - frac) * (len(values) - 1)))
    return float(np.max(values[start:]))


def fit_decay_rate(t, norms, t_start: float = 0.0, rel_floor: float = 1e-9) -> float:
    """Least-squares exponential rate ``c2`` of ``norms ~ c1 exp(-c2 t)``.

    Only samples after ``t_start`` and above ``rel_floor * norms[0]`` are
    used, so the fit ignores the round-off floor.
    """
    t, norms = np.asarray(t), np.asarray(norms)
    keep = (t >= t_start) & (norms > rel_floor * norms[0])
    if keep.sum() < 2:
        raise ValueError("not enough samples above the floor to fit a decay rate")
    slope, _ = np.polyfit(t[keep], np.log(norms[keep]), 1)
    return float(-slope)


def is_hurwitz(M, tol: float = 1e-9) -> bool:
    return bool(np.all(np.linalg.eigvals(np.asarray(M, dtype=float)).real < -tol))


def lyapunov_solve(A_c, Q=None) -> np.ndarray:
    """Unique ``P > 0`` with ``A_c' P + P A_c = -Q`` (Bartels-Stewart)."""
    A_c = np.asarray(A_c, dtype=float)
    n = A_c.shape[0]
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    if not is_hurwitz(A_c):
        raise CertificateError("closed-loop matrix is not Hurwitz; no positive definite solution")
    P = scipy.linalg.solve_continuous_lyapunov(A_c.T, -Q)
    P = 0.5 * (P + P.T)
    resid = np.linalg.norm(A_c.T @ P + P @ A_c + Q)
    if resid > 1e-8 * max(1.0, np.linalg.norm(Q)):
        raise CertificateError(f"Lyapunov residual {resid:.3g} too large")
    return P


def selection_matrix(m: int) -> np.ndarray:
    """``S`` with ``eps = S eta`` for the vehicle-major stacking."""
    S = np.zeros((2 * m, 6 * m))
    for i in range(m):
        S[2 * i, 6 * i] = S[2 * i + 1, 6 * i + 1] = 1.0
    return S


def output_gain(net: CommNetwork) -> float:
    """``|L^-1|_2``: bounds ``|y - y_0|`` by the stacked clean tracking error."""
    return float(np.linalg.norm(np.linalg.inv(net.lap), 2))


@dataclass(frozen=True)
class RobustnessCertificate:
    P: np.ndarray
    Q: np.ndarray
    rho_d: float
    abar: float
    eta_bound: float
    delta: float
    c_eps: float = 1.0
    S_norm: float = 1.0
    residual: float = 0.0
    empirical: bool = True

    @property
    def lambda_min_Q(self) -> float:
        return float(np.linalg.eigvalsh(self.Q).min())

    def report(self, limsup_eta: float | None = None, limsup_e: float | None = None) -> str:
        lines = [
            "robustness certificate",
            f"  P size              {self.P.shape[0]}x{self.P.shape[1]}",
            f"  Lyapunov residual   {self.residual:.3e}",
            f"  lambda_min(P)       {np.linalg.eigvalsh(self.P).min():.6e}",
            f"  lambda_min(Q)       {self.lambda_min_Q:.6e}",
            f"  rho_d               {self.rho_d:.6e}" + ("  (empirical)" if self.empirical else ""),
            f"  abar                {self.abar:.6e}",
            f"  c_eps               {self.c_eps:.6e}",
            f"  |S|                 {self.S_norm:.6e}",
            f"  eta bound           {self.eta_bound:.6e}",
            f"  delta(abar)         {self.delta:.6e}",
        ]
        if limsup_eta is not None:
            lines.append(f"  limsup |eta|        {limsup_eta:.6e}  {'<=' if limsup_eta <= self.eta_bound else '>'} bound")
        if limsup_e is not None:
            lines.append(f"  limsup |y_i - y_0|  {limsup_e:.6e}  {'<=' if limsup_e <= self.delta else '>'} delta")
        return "\n".join(lines) + "\n"


def ultimate_bound(A_c, rho_d: float, abar: float, Q=None, B=None, S=None,
                   c_eps: float = 1.0, empirical: bool = True) -> RobustnessCertificate:
    """Ultimate bounds on ``|eta|`` and ``|y_i - y_0|`` under a bounded residual.

    ``eta_bound = 2 |P B| rho_d abar / lambda_min(Q)`` and
    ``delta = c_eps |S| eta_bound``. ``B`` and ``S`` default to the canonical
    input and selection matrices for ``A_c`` of size ``6m``.
    """
    A_c = np.asarray(A_c, dtype=float)
    n = A_c.shape[0]
    if n % 6:
        raise CertificateError("closed-loop matrix must be 6m x 6m")
    m = n // 6
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    B = chain_matrices(m)[1] if B is None else np.asarray(B)
    S = selection_matrix(m) if S is None else np.asarray(S)
    P = lyapunov_solve(A_c, Q)
    lam_q = float(np.linalg.eigvalsh(Q).min())
    eta_bound = 2.0 * np.linalg.norm(P @ B, 2) * rho_d * abar / lam_q
    S_norm = float(np.linalg.norm(S, 2))
    return RobustnessCertificate(
        P=P, Q=Q, rho_d=float(rho_d), abar=float(abar), eta_bound=float(eta_bound),
        delta=float(c_eps * S_norm * eta_bound), c_eps=float(c_eps), S_norm=S_norm,
        residual=float(np.linalg.norm(A_c.T @ P + P @ A_c + Q)), empirical=empirical,
    )


def disturbance_residual(t, eta, A_c, B=None) -> np.ndarray:
    """``rho(t)`` from ``B rho = d eta/dt - A_c eta`` with central differences.

    ``eta`` is ``(N, 6m)``; returns ``(N, 2m)`` (one-sided at the ends).
    """
    eta = np.asarray(eta, dtype=float)
    m = eta.shape[1] // 6
    B = chain_matrices(m)[1] if B is None else B
    deta = np.gradient(eta, np.asarray(t), axis=0, edge_order=2)
    resid = deta - eta @ np.asarray(A_c).T
    return resid @ np.linalg.pinv(B).T


def estimate_rho_d(t, eta, A_c, abar: float, B=None, skip: int = 2) -> float:
    """Empirical ``rho_d = max_t |rho(t)| / abar`` from a logged ``eta``.

    ``skip`` drops samples at each end where the difference stencil is
    one-sided.
    """
    if not abar > 0:
        raise CertificateError("abar must be positive to estimate rho_d")
    rho = disturbance_residual(t, eta, A_c, B)
    norms = np.linalg.norm(rho, axis=1)
    if skip:
        norms = norms[skip:-skip]
    return float(norms.max() / abar)


def linear_prediction(A_c_block, eta0, t) -> np.ndarray:
    """``expm(A t) eta0`` per vehicle block: ``eta0 (m, 6)`` -> ``(len(t), m, 6)``."""
    eta0 = np.asarray(eta0, dtype=float)
    return np.stack([eta0 @ scipy.linalg.expm(A_c_block * tk).T for tk in np.asarray(t)])
