import numpy as np

from afc.kernel import AmcKernel


def random_kernel(rng, n, leak_lo=0.1, leak_hi=0.5, density=1.0):
    """Random kernel with leaks drawn from ``[leak_lo, leak_hi]``."""
    Q = rng.random((n, n)) * (rng.random((n, n)) < density)
    Q[Q.sum(axis=1) == 0, 0] = 1.0
    r = rng.uniform(leak_lo, leak_hi, n)
    Q = Q / Q.sum(axis=1, keepdims=True) * (1 - r)[:, None]
    return AmcKernel(Q, 1.0 - Q.sum(axis=1))


def random_graph_edges(rng, n, p, weighted):
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    if weighted:
        w = rng.integers(1, 4, len(edges)).astype(float) if rng.random() < 0.5 else rng.uniform(0.5, 3.0, len(edges))
    else:
        w = np.ones(len(edges))
    return edges, w
