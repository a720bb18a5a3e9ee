# The three 4-vehicle communication graphs and the algebra the controller relies on.
import numpy as np

from nhtrack.netgraph import (
    build_topology,
    check_balance,
    check_navigator_reachability,
    laplacian_eigenvalues,
    laplacian_positive_stable,
)

np.set_printoptions(precision=3, suppress=True)

for kind in ("star", "cyclic", "path"):
    net = build_topology(kind, 4)
    print(f"--- {kind}")
    print("weights (column 0 = navigator)\n", net.weights)
    print("augmented Laplacian\n", net.lap)
    print("eigenvalues", np.sort(laplacian_eigenvalues(net).real))
    print("balanced", check_balance(net), "reachable", check_navigator_reachability(net),
          "positive stable", laplacian_positive_stable(net))
    # with balanced weights the steady state of the references is the navigator itself
    print("L^-1 A0 1 =", np.linalg.solve(net.lap, net.adj_0 @ np.ones(4)))
