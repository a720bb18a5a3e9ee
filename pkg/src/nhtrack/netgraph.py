"""Communication digraph of a navigator plus ``m`` tracking vehicles.

Node 0 is the navigator; vehicles are numbered ``1..m``. An edge
``(i, j, w)`` means vehicle ``i`` receives from node ``j`` with weight ``w``.
The edge list is the source of truth and the matrices are derived from it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

BALANCE_TOL = 1e-9


class GraphError(ValueError):
    """Raised for malformed or unsupported communication graphs."""


@dataclass(frozen=True)
class CommNetwork:
    """Weighted communication digraph with navigator node 0.

    Attributes
    ----------
    m : int
        Number of tracking vehicles.
    edges : tuple of (int, int, float)
        ``(receiver, sender, weight)`` triples, receivers in ``1..m`` and
        senders in ``0..m``.
    """

    m: int
    edges: tuple[tuple[int, int, float], ...]
    _weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 1:
            raise GraphError(f"need at least one vehicle, got m={self.m}")
        edges = tuple((int(i), int(j), float(w)) for i, j, w in self.edges)
        object.__setattr__(self, "edges", edges)
        W = np.zeros((self.m, self.m + 1))
        for i, j, w in edges:
            if not 1 <= i <= self.m:
                raise GraphError(f"receiver {i} outside 1..{self.m}")
            if not 0 <= j <= self.m:
                raise GraphError(f"sender {j} outside 0..{self.m}")
            if i == j:
                raise GraphError(f"self-loop at vehicle {i}")
            if not np.isfinite(w) or w < 0:
                raise GraphError(f"edge ({i},{j}) has invalid weight {w}")
            if W[i - 1, j] != 0.0:
                raise GraphError(f"duplicate edge ({i},{j})")
            W[i - 1, j] = w
        W.setflags(write=False)
        object.__setattr__(self, "_weights", W)

    @property
    def weights(self) -> np.ndarray:
        """``m x (m+1)`` matrix; column 0 is the navigator, column j vehicle j."""
        return self._weights

    @property
    def adj_m(self) -> np.ndarray:
        """Inter-vehicle adjacency, ``[A_m]_ij = w_ij`` for ``j >= 1``."""
        return self._weights[:, 1:].copy()

    @property
    def adj_0(self) -> np.ndarray:
        """Diagonal navigator-influence matrix."""
        return np.diag(self._weights[:, 0])

    @property
    def in_degree(self) -> np.ndarray:
        return self._weights[:, 1:].sum(axis=1)

    @property
    def total_weight(self) -> np.ndarray:
        """Per-vehicle ``w_i = d_i + w_i0``."""
        return self._weights.sum(axis=1)

    @property
    def lap_m(self) -> np.ndarray:
        return np.diag(self.in_degree) - self.adj_m

    @property
    def lap(self) -> np.ndarray:
        """Augmented Laplacian ``L_m + A_0``."""
        return self.lap_m + self.adj_0

    def neighbors(self, i: int) -> list[int]:
        """In-neighbors of vehicle ``i`` in ascending order."""
        return [int(j) for j in np.flatnonzero(self._weights[i - 1] > 0)]

    def weight(self, i: int, j: int) -> float:
        return float(self._weights[i - 1, j])

    def without_edge(self, i: int, j: int) -> CommNetwork:
        kept = [e for e in self.edges if (e[0], e[1]) != (i, j)]
        if len(kept) == len(self.edges):
            raise GraphError(f"no edge ({i},{j})")
        return CommNetwork(self.m, tuple(kept))

    @classmethod
    def from_weights(cls, W: np.ndarray) -> CommNetwork:
        W = np.asarray(W, dtype=float)
        m = W.shape[0]
        if W.shape != (m, m + 1):
            raise GraphError(f"weight matrix must be m x (m+1), got {W.shape}")
        edges = [(i + 1, j, W[i, j]) for i in range(m) for j in range(m + 1) if W[i, j] != 0]
        return cls(m, tuple(edges))


def build_topology(kind: str, m: int) -> CommNetwork:
    """Star, cyclic or path network with the fixed per-row weight classes.

    star: navigator -> every vehicle (1.0). cyclic: navigator (0.1) plus both
    ring neighbours (0.45 each). path: navigator -> 1 and k-1 -> k (1.0).
    """
    if kind == "star":
        if m < 2:
            raise GraphError("star topology needs m >= 2")
        edges = [(i, 0, 1.0) for i in range(1, m + 1)]
    elif kind == "cyclic":
        if m < 3:
            raise GraphError("cyclic topology needs m >= 3")
        edges = []
        for i in range(1, m + 1):
            prev = m if i == 1 else i - 1
            nxt = 1 if i == m else i + 1
            edges += [(i, 0, 0.1), (i, prev, 0.45), (i, nxt, 0.45)]
    elif kind == "path":
        if m < 2:
            raise GraphError("path topology needs m >= 2")
        edges = [(1, 0, 1.0)] + [(k, k - 1, 1.0) for k in range(2, m + 1)]
    else:
        raise GraphError(f"unknown topology kind {kind!r}")
    return CommNetwork(m, tuple(edges))


def normalize_weights(net: CommNetwork) -> CommNetwork:
    """Rescale each row by ``w_i`` so that ``(A_m + A_0) 1 = 1``."""
    w = net.total_weight
    isolated = np.flatnonzero(w <= 0)
    if isolated.size:
        raise GraphError(f"isolated vehicles (no in-edges): {(isolated + 1).tolist()}")
    if np.max(np.abs(w - 1.0)) <= 1e-12:
        return net
    edges = tuple((i, j, wij / w[i - 1]) for i, j, wij in net.edges)
    return CommNetwork(net.m, edges)


def check_balance(net: CommNetwork, tol: float = BALANCE_TOL) -> bool:
    return bool(np.max(np.abs(net.total_weight - 1.0)) <= tol)


def check_navigator_reachability(net: CommNetwork) -> bool:
    """Breadth-first search from node 0 along sender -> receiver edges."""
    out: dict[int, list[int]] = {}
    for i, j, w in net.edges:
        if w > 0:
            out.setdefault(j, []).append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        for nxt in out.get(queue.popleft(), ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return len(seen) == net.m + 1


def laplacian_eigenvalues(net: CommNetwork) -> np.ndarray:
    return np.linalg.eigvals(net.lap)


def laplacian_positive_stable(net: CommNetwork, tol: float = 1e-9) -> bool:
    return bool(np.all(laplacian_eigenvalues(net).real > tol))
