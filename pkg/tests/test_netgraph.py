import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhtrack.netgraph import (
    CommNetwork,
    GraphError,
    build_topology,
    check_balance,
    check_navigator_reachability,
    laplacian_eigenvalues,
    laplacian_positive_stable,
    normalize_weights,
)

KINDS = ("star", "cyclic", "path")


def in_weights(net, i):
    return {j: net.weight(i, j) for j in net.neighbors(i)}


def test_star_edges():
    net = build_topology("star", 4)
    for i in range(1, 5):
        assert in_weights(net, i) == {0: 1.0}


def test_cyclic_weights():
    net = build_topology("cyclic", 4)
    assert in_weights(net, 1) == {0: 0.1, 2: 0.45, 4: 0.45}
    assert net.weights[0].sum() == pytest.approx(1.0, abs=1e-15)


def test_path_edges():
    net = build_topology("path", 4)
    assert in_weights(net, 3) == {2: 1.0}
    assert in_weights(net, 1) == {0: 1.0}


@pytest.mark.parametrize("kind,m", [("star", 1), ("cyclic", 2), ("path", 1), ("ring", 4)])
def test_build_rejects(kind, m):
    with pytest.raises(GraphError):
        build_topology(kind, m)


@pytest.mark.parametrize(
    "edges",
    [((1, 1, 1.0),), ((0, 1, 1.0),), ((1, 3, 1.0),), ((1, 0, -0.1),), ((1, 0, 0.5), (1, 0, 0.5))],
)
def test_malformed_edges(edges):
    with pytest.raises(GraphError):
        CommNetwork(2, edges)


def test_normalize_identity_on_balanced():
    net = build_topology("cyclic", 4)
    assert normalize_weights(net) == net


def test_normalize_rescale():
    net = CommNetwork(2, ((1, 0, 2.0), (1, 2, 2.0), (2, 0, 1.0)))
    out = normalize_weights(net)
    assert in_weights(out, 1) == {0: 0.5, 2: 0.5}
    assert check_balance(out)


def test_normalize_isolated():
    with pytest.raises(GraphError):
        normalize_weights(CommNetwork(2, ((1, 0, 1.0),)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 10.0), min_size=12, max_size=12))
def test_normalize_random_cyclic(ws):
    base = build_topology("cyclic", 4)
    net = CommNetwork(4, tuple((i, j, w) for (i, j, _), w in zip(base.edges, ws)))
    out = normalize_weights(net)
    assert np.allclose((out.adj_m + out.adj_0).sum(axis=1), 1.0, atol=1e-12, rtol=0)
    assert check_balance(out)
    assert normalize_weights(out) == out


def test_balance_false_for_half_weight():
    assert not check_balance(CommNetwork(2, ((1, 0, 0.5), (2, 0, 1.0))))


def test_reachability():
    assert check_navigator_reachability(build_topology("path", 4))
    assert not check_navigator_reachability(build_topology("path", 4).without_edge(1, 0))
    assert check_navigator_reachability(build_topology("star", 12))


def test_star_laplacian_identity():
    net = build_topology("star", 4)
    assert np.array_equal(net.lap, np.eye(4))
    assert laplacian_positive_stable(net)


def test_cyclic4_eigenvalues():
    # circulant: 1 - 0.9 cos(2 pi k / 4) for k = 0..3
    eig = np.sort(laplacian_eigenvalues(build_topology("cyclic", 4)).real)
    assert np.allclose(eig, [0.1, 1.0, 1.0, 1.9], atol=1e-12)


def test_disconnected_not_positive_stable():
    # vehicles 1,2 listen only to each other, no navigator access
    net = CommNetwork(3, ((1, 2, 1.0), (2, 1, 1.0), (3, 0, 1.0)))
    assert check_balance(net)
    assert not laplacian_positive_stable(net)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("m", [3, 4, 7, 12])
def test_topology_invariants(kind, m):
    net = build_topology(kind, m)
    assert check_balance(net)
    assert check_navigator_reachability(net)
    assert laplacian_positive_stable(net)
    W = np.diag(net.total_weight)
    assert np.array_equal(net.lap, W - net.adj_m)
    ones = np.ones(m)
    assert np.allclose(np.linalg.solve(net.lap, net.adj_0 @ ones), ones, atol=1e-9)
    assert np.allclose(net.lap @ ones, net.adj_0 @ ones, atol=1e-12)


def test_from_weights_roundtrip():
    net = build_topology("cyclic", 5)
    assert np.array_equal(CommNetwork.from_weights(net.weights).weights, net.weights)


def test_weights_read_only():
    net = build_topology("star", 3)
    with pytest.raises(ValueError):
        net.weights[0, 0] = 2.0
