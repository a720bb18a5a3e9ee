"""Bounded corruption of transmitted neighbour signals.

Every attack signal is written as a constant offset plus a short sum of
rotating phasors,

    a(t) = offset + sum_k c_k (cos(w_k t + phi_k), sin(w_k t + phi_k)),

which keeps all time derivatives in closed form and makes the sup-norm
bound ``|offset| + sum |c_k|`` exact and cheap to enforce.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netgraph import CommNetwork, build_topology

SIGNAL_KINDS = ("constant_offset", "sinusoid", "bounded_random")
PRESET_ATTACKED = (2, 5, 8, 11)
RANDOM_COMPONENTS = 5


class AttackConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AttackSignal:
    """One edge's perturbation ``a_ij(t)``.

    Use the ``constant``/``sinusoid``/``bounded_random`` constructors rather
    than filling the phasor arrays by hand.
    """

    kind: str
    offset: tuple[float, float] = (0.0, 0.0)
    amps: tuple[float, ...] = ()
    freqs: tuple[float, ...] = ()
    phases: tuple[float, ...] = ()

    @classmethod
    def constant(cls, offset) -> AttackSignal:
        ox, oy = (float(v) for v in offset)
        return cls("constant_offset", (ox, oy))

    @classmethod
    def sinusoid(cls, amplitude: float, frequency: float = 0.1, phase: float = 0.0) -> AttackSignal:
        """Phasor of constant norm ``amplitude`` rotating at ``frequency`` rad/s."""
        return cls("sinusoid", (0.0, 0.0), (float(amplitude),), (float(frequency),), (float(phase),))

    @classmethod
    def bounded_random(cls, bound: float, seed, max_frequency: float = 0.2) -> AttackSignal:
        """Smooth random trigonometric polynomial with sup-norm at most ``bound``."""
        rng = np.random.default_rng(seed)
        c = rng.uniform(0.1, 1.0, RANDOM_COMPONENTS)
        c *= bound / c.sum()
        w = rng.uniform(-max_frequency, max_frequency, RANDOM_COMPONENTS)
        phi = rng.uniform(0.0, 2.0 * np.pi, RANDOM_COMPONENTS)
        return cls("bounded_random", (0.0, 0.0), tuple(c), tuple(w), tuple(phi))

    @property
    def sup_norm(self) -> float:
        """Upper bound on ``|a(t)|`` over all t (attained for the built-in kinds)."""
        return float(np.hypot(*self.offset) + np.sum(np.abs(self.amps)))

    def evaluate(self, t: float, order: int = 2) -> np.ndarray:
        """``(order+1, 2)`` array with ``a`` and its derivatives up to ``order``."""
        out = np.zeros((order + 1, 2))
        out[0] = self.offset
        if self.amps:
            c, w, phi = np.array(self.amps), np.array(self.freqs), np.array(self.phases)
            _phasor_derivs(c, w, w * t + phi, out)
        return out


def _phasor_derivs(c, w, arg, out) -> None:
    """Accumulate derivatives of sum c (cos arg, sin arg) into ``out`` (last axis xy)."""
    ca, sa = np.cos(arg), np.sin(arg)
    for n in range(out.shape[-2]):
        # d^n/dt^n rotates the phasor by n*pi/2 and scales by w^n
        rc, rs = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[n % 4]
        scale = c * w**n
        out[..., n, 0] += np.sum(scale * (ca * rc - sa * rs), axis=-1)
        out[..., n, 1] += np.sum(scale * (sa * rc + ca * rs), axis=-1)


@dataclass(frozen=True)
class AttackModel:
    """Adversarial edge set with a bound and one signal per edge.

    ``signals`` maps ``(receiver, sender)`` to its :class:`AttackSignal`.
    """

    signals: dict
    abar: float

    def __post_init__(self):
        if not self.abar >= 0:
            raise AttackConfigError("abar must be nonnegative")
        for edge, sig in self.signals.items():
            if sig.sup_norm > self.abar * (1 + 1e-12) + 1e-15:
                raise AttackConfigError(
                    f"signal on edge {edge} has sup norm {sig.sup_norm} > abar={self.abar}"
                )

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(self.signals)

    @property
    def corrupts_navigator(self) -> bool:
        return any(j == 0 for _, j in self.signals)

    def adversarial_neighbors(self, i: int) -> set[int]:
        return {j for (r, j) in self.signals if r == i}

    def validate(self, net: CommNetwork) -> None:
        for i, j in self.signals:
            if net.weight(i, j) <= 0:
                raise AttackConfigError(f"attacked edge ({i},{j}) is not in the network")


def corrupt(y_and_derivs, edge, t: float, model: AttackModel | None) -> np.ndarray:
    """Received ``(y, y', y'')`` over ``edge = (i, j)``; identity on clean edges."""
    y = np.array(y_and_derivs, dtype=float).reshape(3, 2)
    if model is None or tuple(edge) not in model.signals:
        return y
    return y + model.signals[tuple(edge)].evaluate(t, order=2)


def preset_attack(
    topology: str,
    m: int,
    abar: float = 1.0,
    kind: str = "sinusoid",
    attacked=PRESET_ATTACKED,
    seed: int = 0,
    frequency: float = 0.1,
    direction=(0.0, 1.0),
) -> AttackModel:
    """Attack on the fixed vehicle set ``attacked``.

    For the star the navigator -> i channels of the attacked vehicles are
    corrupted; otherwise every outgoing transmission of an attacked sender.
    """
    bad = [a for a in attacked if not 1 <= a <= m]
    if bad:
        raise AttackConfigError(f"attacked indices {bad} out of range 1..{m}")
    net = build_topology(topology, m)
    if topology == "star":
        edges = [(i, 0) for i in attacked]
    else:
        hit = set(attacked)
        edges = [(i, j) for i, j, w in net.edges if j in hit and w > 0]
    return AttackModel({e: make_signal(kind, abar, e, seed, frequency, direction) for e in sorted(edges)}, abar)


def make_signal(kind: str, abar: float, edge, seed: int = 0, frequency: float = 0.1,
                direction=(0.0, 1.0), offset=None) -> AttackSignal:
    if kind == "constant_offset":
        if offset is None:
            d = np.asarray(direction, dtype=float)
            offset = abar * d / np.linalg.norm(d)
        return AttackSignal.constant(offset)
    if kind == "sinusoid":
        return AttackSignal.sinusoid(abar, frequency)
    if kind == "bounded_random":
        return AttackSignal.bounded_random(abar, [seed, edge[0], edge[1]], max_frequency=2 * frequency)
    raise AttackConfigError(f"unknown attack kind {kind!r}")


@dataclass
class AttackView:
    """Vectorised per-time lookup of all attacked edges.

    ``receivers``/``senders`` index the edges; :meth:`at` returns an
    ``(E, order+1, 2)`` array of perturbations and their derivatives.
    """

    model: AttackModel
    m: int
    receivers: np.ndarray = field(init=False)
    senders: np.ndarray = field(init=False)
    incidence: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        edges = self.model.edges
        self.receivers = np.array([i for i, _ in edges], dtype=int)
        self.senders = np.array([j for _, j in edges], dtype=int)
        # (m, E) receiver incidence, used to sum weighted perturbations per vehicle
        self.incidence = np.zeros((self.m, len(edges)))
        self.incidence[self.receivers - 1, np.arange(len(edges))] = 1.0
        sigs = [self.model.signals[e] for e in edges]
        k = max((len(s.amps) for s in sigs), default=0)
        E = len(sigs)
        self._offset = np.array([s.offset for s in sigs], dtype=float).reshape(E, 2)
        self._c = np.zeros((E, k))
        self._w = np.zeros((E, k))
        self._phi = np.zeros((E, k))
        for n, s in enumerate(sigs):
            self._c[n, : len(s.amps)] = s.amps
            self._w[n, : len(s.freqs)] = s.freqs
            self._phi[n, : len(s.phases)] = s.phases

    def __len__(self) -> int:
        return len(self.receivers)

    def at(self, t: float, order: int = 2) -> np.ndarray:
        out = np.zeros((len(self), order + 1, 2))
        out[:, 0] = self._offset
        if self._c.size:
            _phasor_derivs(self._c, self._w, self._w * t + self._phi, out)
        return out

    def lookup(self, receiver: int, sender: int, t: float) -> np.ndarray:
        """``(a, a', a'')`` for one edge; zeros for clean edges."""
        hit = np.flatnonzero((self.receivers == receiver) & (self.senders == sender))
        if hit.size == 0:
            return np.zeros((3, 2))
        return self.at(t)[hit[0]]
