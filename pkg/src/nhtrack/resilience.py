"""Trimmed fusion of neighbour signals anchored on trusted neighbours.

Each non-trusted neighbour gets a deviation score (mean distance to the
trusted neighbours' reported outputs); the ``theta`` highest-scoring ones are
dropped and the rest are fused with proportionally renormalised weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netgraph import CommNetwork


class ResilienceError(ValueError):
    pass


@dataclass(frozen=True)
class ResilienceConfig:
    """Trimming level and per-vehicle trusted sets.

    Vehicles with fewer than ``2*theta + 1`` in-neighbours cannot be trimmed
    safely; they are listed in ``worst_case`` and fuse untrimmed.
    """

    theta: int
    trusted: dict = field(default_factory=dict)
    worst_case: frozenset = frozenset()

    @classmethod
    def for_network(cls, net: CommNetwork, theta: int, trusted=None) -> ResilienceConfig:
        """Validate against ``net``; the navigator is trusted wherever it is a neighbour."""
        if theta < 0:
            raise ResilienceError("theta must be nonnegative")
        given = {int(k): tuple(sorted(set(v))) for k, v in (trusted or {}).items()}
        out, worst = {}, set()
        for i in range(1, net.m + 1):
            nbrs = net.neighbors(i)
            tr = set(given.get(i, ()))
            if 0 in nbrs:
                tr.add(0)
            if not tr <= set(nbrs):
                raise ResilienceError(f"trusted set {sorted(tr)} of vehicle {i} not within neighbours {nbrs}")
            if theta == 0:
                out[i] = ()
                continue
            if len(nbrs) < 2 * theta + 1:
                worst.add(i)
                out[i] = tuple(sorted(tr))
                continue
            if len(tr) < theta:
                raise ResilienceError(
                    f"vehicle {i} needs {theta} trusted neighbours, has {sorted(tr)}"
                )
            # keep the navigator first when trimming the trusted set to size theta
            out[i] = tuple(sorted(tr, key=lambda j: (j != 0, j))[:theta])
        for i in given:
            if not 1 <= i <= net.m:
                raise ResilienceError(f"trusted entry for unknown vehicle {i}")
        return cls(theta, out, frozenset(worst))

    @property
    def is_worst_case(self) -> bool:
        return bool(self.worst_case)

    def trims(self, i: int) -> bool:
        return self.theta > 0 and i not in self.worst_case


@dataclass(frozen=True)
class TrimResult:
    scores: dict
    removed: frozenset
    kept: tuple
    weights: dict


def _position(signal) -> np.ndarray:
    # accepts a bare position (2,) or a (3, 2) position/derivative stack
    return np.asarray(signal, dtype=float).reshape(-1, 2)[0]


def deviation_scores(i: int, received: dict, cfg: ResilienceConfig) -> dict:
    """Mean distance from each non-trusted neighbour to the trusted ones."""
    if cfg.theta == 0:
        return {}
    trusted = cfg.trusted.get(i, ())
    if not trusted:
        raise ResilienceError(f"vehicle {i} has no trusted neighbours")
    anchors = np.array([_position(received[l]) for l in trusted])
    scores = {}
    for k, yk in received.items():
        if k not in trusted:
            scores[k] = float(np.mean(np.linalg.norm(anchors - _position(yk), axis=1)))
    return scores


def trim(i: int, scores: dict, cfg: ResilienceConfig, net: CommNetwork) -> TrimResult:
    """Drop the ``theta`` highest scores (lower index first on ties) and renormalise."""
    nbrs = net.neighbors(i)
    n_remove = cfg.theta if cfg.trims(i) else 0
    ranked = sorted(scores, key=lambda k: (-scores[k], k))
    removed = frozenset(ranked[:n_remove])
    kept = tuple(j for j in nbrs if j not in removed)
    if not kept:
        raise ResilienceError(f"vehicle {i}: trimming left no neighbours")
    w = np.array([net.weight(i, j) for j in kept])
    total = w.sum()
    w = w / total if total > 0 else np.full(len(kept), 1.0 / len(kept))
    return TrimResult(dict(scores), removed, kept, dict(zip(kept, w.tolist())))


def resilient_reference(i: int, received: dict, cfg: ResilienceConfig, net: CommNetwork):
    """Fused ``(z, z', z'')`` from the kept neighbours plus the trim record.

    ``received`` maps neighbour index to its (possibly corrupted) ``(3, 2)``
    array of output and derivatives. One kept set serves all three orders.
    """
    scores = deviation_scores(i, received, cfg) if cfg.trims(i) else {}
    res = trim(i, scores, cfg, net)
    z = np.zeros((3, 2))
    for j in res.kept:
        z += res.weights[j] * np.asarray(received[j], dtype=float).reshape(3, 2)
    return z, res


def trimmed_weights(net: CommNetwork, cfg: ResilienceConfig, received_pos: np.ndarray) -> tuple[np.ndarray, dict]:
    """Effective ``m x (m+1)`` fusion weights for the whole network.

    ``received_pos[i-1, j]`` is the position vehicle ``i`` receives from node
    ``j`` (only entries on edges are read).
    """
    W = net.weights.copy()
    results = {}
    for i in range(1, net.m + 1):
        if not cfg.trims(i):
            continue
        received = {j: received_pos[i - 1, j] for j in net.neighbors(i)}
        res = trim(i, deviation_scores(i, received, cfg), cfg, net)
        row = np.zeros(net.m + 1)
        for j, w in res.weights.items():
            row[j] = w
        W[i - 1] = row
        results[i] = res
    return W, results


class Trimmer:
    """Precomputed, array-based equivalent of :func:`trimmed_weights`.

    Used inside the simulation loop, where the dict-based path is too slow.
    """

    def __init__(self, net: CommNetwork, cfg: ResilienceConfig):
        self.net, self.cfg = net, cfg
        self.plans = []
        for i in range(1, net.m + 1):
            if not cfg.trims(i):
                continue
            nbrs = np.array(net.neighbors(i))
            trusted = np.array(cfg.trusted[i])
            if trusted.size == 0:
                raise ResilienceError(f"vehicle {i} has no trusted neighbours")
            others = np.array([j for j in nbrs if j not in set(trusted.tolist())])
            self.plans.append((i, nbrs, trusted, others, net.weights[i - 1, nbrs]))

    def apply(self, received_pos: np.ndarray) -> tuple[np.ndarray, dict]:
        """Fusion weights and kept sets for the received positions ``(m, m+1, 2)``."""
        W = self.net.weights.copy()
        kept_sets = {}
        theta = self.cfg.theta
        for i, nbrs, trusted, others, w in self.plans:
            rec = received_pos[i - 1]
            diff = rec[others][:, None, :] - rec[trusted][None, :, :]
            scores = np.sqrt((diff**2).sum(axis=2)).mean(axis=1)
            order = np.lexsort((others, -scores))
            removed = others[order[:theta]]
            keep = ~np.isin(nbrs, removed)
            kw = w[keep]
            total = kw.sum()
            kw = kw / total if total > 0 else np.full(kw.size, 1.0 / kw.size)
            row = np.zeros(self.net.m + 1)
            row[nbrs[keep]] = kw
            W[i - 1] = row
            kept_sets[i] = tuple(nbrs[keep].tolist())
        return W, kept_sets
