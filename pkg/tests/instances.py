"""Random small instances shared by the oracle and acceptance tests."""

import numpy as np

from wdrsp.graph import Network
from wdrsp.samples import SampleSet


def random_instance(rng: np.random.Generator, max_vertices: int = 7, max_extra: int = 6,
                    max_samples: int = 10):
    """Network with a guaranteed o-d chain plus random shortcut arcs, and samples."""
    m = int(rng.integers(3, max_vertices + 1))
    arcs = {(k, k + 1) for k in range(m - 1)}
    for _ in range(int(rng.integers(1, max_extra + 1))):
        u, v = (int(x) for x in rng.integers(0, m, 2))
        if u != v:
            arcs.add((u, v))
    net = Network(m, tuple(sorted(arcs)), 0, m - 1)
    N = int(rng.integers(2, max_samples + 1))
    mu = rng.uniform(1.0, 5.0, net.n)
    data = np.maximum(0.0, rng.normal(mu, 0.5 * mu, (N, net.n)))
    return net, SampleSet(data)


def random_flow_network(rng: np.random.Generator, max_vertices: int = 8):
    """Feasible flow instance: a chain with ample capacity plus random extra arcs."""
    m = int(rng.integers(2, max_vertices + 1))
    arcs = {(k, k + 1) for k in range(m - 1)}
    for _ in range(int(rng.integers(0, 2 * m))):
        u, v = (int(x) for x in rng.integers(0, m, 2))
        if u != v:
            arcs.add((u, v))
    arcs = tuple(sorted(arcs))
    supply = np.zeros(m)
    total = float(rng.integers(1, 6))
    supply[0] += total
    supply[-1] -= total
    if m > 2:
        extra = float(rng.integers(0, 3))
        k = int(rng.integers(1, m - 1))
        supply[k] += extra
        supply[-1] -= extra
    caps = np.array([(20.0 if v == u + 1 else float(rng.integers(0, 6))) for u, v in arcs])
    K = int(rng.integers(1, 6))
    costs = rng.uniform(0.0, 5.0, (K, len(arcs)))
    return Network(m, arcs, 0, m - 1), caps, supply, SampleSet(costs)
