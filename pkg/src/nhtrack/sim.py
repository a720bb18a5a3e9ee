"""Closed-loop scenario runner.

Each control step freezes the trimmed fusion weights computed from the
signals received at the start of the step, then advances the network with
RK4. By default the feedback law is re-evaluated at every RK4 stage
(``update="stage"``), which integrates the continuous-time closed loop;
``update="zoh"`` holds the step-start input instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fblin
from .adversary import AttackModel, AttackView
from .fblin import ControllerConfig
from .netgraph import CommNetwork, check_balance
from .resilience import ResilienceConfig, Trimmer
from .vehicle import NavigatorTrajectory, NetworkState, ring_initial_states, step, step_closed_loop

log = logging.getLogger(__name__)

UPDATE_MODES = ("stage", "zoh")


class SimulationError(RuntimeError):
    """A run aborted; ``log`` holds every step completed before the failure."""

    def __init__(self, cause: Exception, step: int, partial):
        super().__init__(f"step {step}: {cause}")
        self.cause, self.step, self.log = cause, step, partial


@dataclass
class Scenario:
    network: CommNetwork
    navigator: NavigatorTrajectory = field(default_factory=NavigatorTrajectory)
    controller: ControllerConfig = field(default_factory=ControllerConfig.from_pole)
    attack: AttackModel | None = None
    resilience: ResilienceConfig | None = None
    T: float = 20.0
    dt: float = 1e-3
    seed: int = 0
    ring_radius: float = 2.0
    initial_states: np.ndarray | None = None
    update: str = "stage"
    name: str = "scenario"

    def __post_init__(self):
        if not (self.T > 0 and self.dt > 0):
            raise ValueError("T and dt must be positive")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"T/dt = {n} is not an integer")
        if self.update not in UPDATE_MODES:
            raise ValueError(f"update must be one of {UPDATE_MODES}")
        if not check_balance(self.network):
            raise ValueError("network weights are not balanced")
        if self.attack is not None:
            self.attack.validate(self.network)
        if self.initial_states is not None:
            x = np.asarray(self.initial_states, dtype=float)
            if x.shape != (self.network.m, 6):
                raise ValueError(f"initial states must be ({self.network.m}, 6)")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def m(self) -> int:
        return self.network.m

    def initial(self) -> np.ndarray:
        if self.initial_states is not None:
            return np.array(self.initial_states, dtype=float)
        return ring_initial_states(self.navigator, self.m, self.ring_radius)

    @property
    def worst_case(self) -> bool:
        """True when some vehicle lacks the redundancy to trim safely."""
        return self.resilience is not None and self.resilience.is_worst_case


@dataclass
class RunLog:
    """Per-step record of a run; row ``k`` is time ``k * dt``.

    Shapes (``N`` rows, ``m`` vehicles): ``states (N, m, 6)``, ``nav (N, 4, 2)``
    navigator output and derivatives, ``z (N, m, 2)`` references used by the
    controller, ``switches (N, m)`` cumulative kept-set changes, ``u (N, m, 2)``
    applied inputs, ``attack (N, m)`` largest incoming perturbation norm,
    ``residual (N,)`` control-solve residual.
    """

    t: np.ndarray
    states: np.ndarray
    nav: np.ndarray
    z: np.ndarray
    switches: np.ndarray
    u: np.ndarray
    attack: np.ndarray
    residual: np.ndarray
    eta_norm: np.ndarray

    @property
    def m(self) -> int:
        return self.states.shape[1]

    @property
    def y(self) -> np.ndarray:
        return self.states[:, :, :2]

    @property
    def e_tilde(self) -> np.ndarray:
        return np.linalg.norm(self.y - self.nav[:, None, 0], axis=2).mean(axis=1)

    @property
    def eps_tilde(self) -> np.ndarray:
        return np.linalg.norm(self.y - self.z, axis=2).mean(axis=1)

    def truncated(self, n: int) -> RunLog:
        return RunLog(*(getattr(self, f)[:n] for f in self.__dataclass_fields__))

    @classmethod
    def allocate(cls, n: int, m: int) -> RunLog:
        return cls(
            t=np.zeros(n), states=np.zeros((n, m, 6)), nav=np.zeros((n, 4, 2)),
            z=np.zeros((n, m, 2)), switches=np.zeros((n, m)), u=np.zeros((n, m, 2)),
            attack=np.zeros((n, m)), residual=np.zeros(n), eta_norm=np.zeros(n),
        )

    def __eq__(self, other):
        if not isinstance(other, RunLog):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in self.__dataclass_fields__)


class ClosedLoop:
    """Feedback law of one scenario, with the fusion weights set per step."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.view = AttackView(sc.attack, sc.m) if sc.attack is not None and sc.attack.signals else None
        self.weights = sc.network.weights
        self.trimmer = None
        if sc.resilience is not None and sc.resilience.theta > 0:
            self.trimmer = Trimmer(sc.network, sc.resilience)
        self.last = None

    def freeze_weights(self, t: float, states: np.ndarray) -> dict:
        """Trim on the positions received at ``t``; returns the kept sets."""
        if self.trimmer is None:
            return {}
        signals = fblin.node_signals(states, self.sc.navigator.evaluate(t))
        rec = fblin.received_positions(signals, self.view, t)
        self.weights, kept = self.trimmer.apply(rec)
        return kept

    def evaluate(self, t: float, states: np.ndarray):
        nav = self.sc.navigator.evaluate(t)
        signals = fblin.node_signals(states, nav)
        z = fblin.fuse(self.weights, signals, self.view, t)
        eta = signals[1:] - z
        try:
            M, rhs = fblin.control_system(states, eta, self.weights, self.sc.controller, nav[3])
        except fblin.ControlSingularity as err:
            err.t = t
            raise
        u, resid = fblin.lu_solve_checked(M, rhs, t)
        return u.reshape(-1, 2), nav, z, eta, resid

    def __call__(self, t: float, states: np.ndarray) -> np.ndarray:
        out = self.evaluate(t, states)
        if self.last is None:
            self.last = out
        return out[0]


def run_scenario(sc: Scenario) -> RunLog:
    """Simulate ``sc`` and return the full log (``n_steps + 1`` rows)."""
    n = sc.n_steps
    m = sc.m
    out = RunLog.allocate(n + 1, m)
    loop = ClosedLoop(sc)
    state = NetworkState(0.0, sc.initial())
    prev_kept: dict = {}
    switches = np.zeros(m)
    for k in range(n + 1):
        t = k * sc.dt
        state.t = t  # avoid accumulating dt round-off in the clock
        try:
            kept = loop.freeze_weights(t, state.states)
            for i, ks in kept.items():
                if i in prev_kept and prev_kept[i] != ks:
                    switches[i - 1] += 1
                prev_kept[i] = ks
            loop.last = None
            if k < n:
                if sc.update == "stage":
                    new_state, _ = step_closed_loop(state, loop, sc.dt)
                else:
                    new_state = step(state, loop(t, state.states), sc.dt)
            else:
                loop(t, state.states)
        except Exception as err:
            partial = out.truncated(k)
            raise SimulationError(err, k, partial) from err
        u, nav, z, eta, resid = loop.last
        out.t[k] = t
        out.states[k] = state.states
        out.nav[k] = nav
        out.z[k] = z[:, 0]
        out.switches[k] = switches
        out.u[k] = u
        out.residual[k] = resid
        out.eta_norm[k] = np.linalg.norm(eta)
        if loop.view is not None:
            a = np.linalg.norm(loop.view.at(t, order=0)[:, 0], axis=1)
            np.maximum.at(out.attack[k], loop.view.receivers - 1, a)
        if k < n:
            state = new_state
    return out


def clean_eta(sc: Scenario, run: RunLog) -> np.ndarray:
    """Replay ``eta`` against the uncorrupted nominal references, ``(N, m, 3, 2)``."""
    W = sc.network.weights
    out = np.empty((len(run.t), sc.m, 3, 2))
    for k in range(len(run.t)):
        signals = fblin.node_signals(run.states[k], run.nav[k])
        out[k] = signals[1:] - fblin.fuse(W, signals)
    return out


def write_outputs(sc: Scenario, run: RunLog, out_dir, plots: bool = True) -> Path:
    from . import logio, svgplot

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{sc.name}.csv"
    logio.write_csv(run, path)
    if plots:
        svgplot.plot_run(run, out_dir, sc.name)
    return path
