from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from afc.graph import (BaseTopology, GraphError, GraphSummary, WorkingGraph, betweenness, global_center,
                       local_center, local_topk, random_walk_stationary, ranked, shortest_path_counts)
from helpers import random_graph_edges
from oracles import brute_betweenness, brute_sigma


def path3():
    return BaseTopology.from_edges(3, [(0, 1), (1, 2)]).full()


def test_path_counts_and_betweenness():
    d, sigma = shortest_path_counts(path3(), 0)
    assert d.tolist() == [0, 1, 2]
    assert sigma.tolist() == [1, 1, 1]
    assert betweenness(path3()).tolist() == [0, 2, 0]


def test_four_cycle_has_two_geodesics():
    H = BaseTopology.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).full()
    _, sigma = shortest_path_counts(H, 0)
    assert sigma[2] == 2


def test_unreachable_nodes_have_inf_distance_and_zero_sigma():
    H = BaseTopology.from_edges(4, [(0, 1)]).full()
    d, sigma = shortest_path_counts(H, 0)
    assert np.isinf(d[2]) and sigma[2] == 0 and sigma[0] == 1


def test_two_clique_betweenness_values(two_clique):
    B = betweenness(two_clique.full())
    # bridge node 5 and its neighbours 1, 6 carry everything; 0-based indices
    assert B.tolist() == [30, 0, 0, 0, 32, 30, 0, 0, 0]
    assert global_center(two_clique.full()) == 4


def test_two_clique_geodesic_through_bridge(two_clique):
    # 1-based labels 2 -> 7 are indices 1 -> 6
    _, sigma = shortest_path_counts(two_clique.full(), 1)
    assert sigma[6] == 1
    assert brute_sigma(9, two_clique.edges.tolist(), two_clique.weights.tolist(), 1)[6] == 1


def test_two_clique_local_center_and_topk(two_clique):
    H = two_clique.full()
    assert local_center(2, H, k_min=5) == 4
    assert local_topk(1, H, 1) == [4]
    assert [two_clique.label(v) for v in local_topk(1, H, 3)] == [5, 1, 6]
    assert len(local_topk(1, H, 20, k_min=5)) == 9


def test_two_clique_bridge_removed_is_invalid(two_clique):
    keep = [k for k, (u, v) in enumerate(two_clique.edges.tolist()) if (u, v) not in ((0, 4), (4, 5))]
    H = WorkingGraph.from_arrays(9, two_clique.edges[keep], two_clique.weights[keep])
    assert local_center(2, H, k_min=5) is None
    assert local_topk(2, H, 3, k_min=5) is None


def test_isolated_node_is_its_own_center():
    H = BaseTopology.from_edges(3, [(0, 1)]).full()
    assert local_center(2, H, k_min=1) == 2
    assert local_center(2, H, k_min=2) is None


def test_two_clique_stationary_law_exact(two_clique):
    deg = two_clique.degrees()
    pi = [Fraction(int(d), int(deg.sum())) for d in deg]
    assert pi[4] == Fraction(2, 28) and pi[0] == Fraction(4, 28) and pi[5] == Fraction(4, 28)
    assert np.allclose(random_walk_stationary(two_clique), [float(x) for x in pi], atol=1e-14)


def test_ties_go_to_smallest_index():
    assert ranked([3, 1, 2], np.array([0, 5.0, 5.0, 5.0 * (1 + 1e-12)])) == [1, 2, 3]
    H = BaseTopology.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).full()
    assert local_center(3, H) == 0


def test_base_topology_validation():
    with pytest.raises(GraphError):
        BaseTopology.from_edges(3, [(0, 0)])
    with pytest.raises(GraphError):
        BaseTopology.from_edges(3, [(0, 1), (1, 0)])
    with pytest.raises(GraphError):
        BaseTopology.from_edges(3, [(0, 1, 0.0)])
    with pytest.raises(GraphError):
        BaseTopology.from_edges(3, [(0, 3)])


def test_components_partition_and_edges_inside():
    rng = np.random.default_rng(3)
    edges, w = random_graph_edges(rng, 30, 0.06, False)
    H = BaseTopology.from_edges(30, edges).full()
    assert H.sizes.sum() == 30
    for u, v in H.edges:
        assert H.component[u] == H.component[v]


def test_matches_networkx_on_random_graph():
    nx = pytest.importorskip("networkx")
    G = nx.gnp_random_graph(60, 0.08, seed=5)
    rng = np.random.default_rng(1)
    for u, v in G.edges:
        G[u][v]["weight"] = float(rng.integers(1, 5))
    base = BaseTopology.from_edges(60, [(u, v, d["weight"]) for u, v, d in G.edges(data=True)])
    ref = nx.betweenness_centrality(G, normalized=False, weight="weight")
    assert np.allclose(betweenness(base.full()), 2 * np.array([ref[v] for v in range(60)]), atol=1e-9)


@st.composite
def small_graphs(draw):
    n = draw(st.integers(2, 8))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    w = draw(st.lists(st.sampled_from([1.0, 2.0, 3.0, 0.5]), min_size=len(chosen), max_size=len(chosen)))
    return n, chosen, w


@given(small_graphs())
def test_betweenness_matches_brute_force(g):
    n, edges, w = g
    base = BaseTopology.from_edges(n, [(u, v, x) for (u, v), x in zip(edges, w)])
    assert np.allclose(betweenness(base.full()), brute_betweenness(n, edges, w), atol=1e-9)


@given(small_graphs(), st.floats(0.01, 100))
def test_weight_scaling_keeps_ordering(g, c):
    n, edges, w = g
    a = BaseTopology.from_edges(n, [(u, v, x) for (u, v), x in zip(edges, w)]).full()
    b = BaseTopology.from_edges(n, [(u, v, c * x) for (u, v), x in zip(edges, w)]).full()
    sa, sb = GraphSummary(a), GraphSummary(b)
    for i in range(n):
        assert sa.ranking(i) == sb.ranking(i)


@given(small_graphs(), st.integers(1, 4))
def test_topk_prefix_consistent(g, k):
    n, edges, w = g
    H = BaseTopology.from_edges(n, [(u, v, x) for (u, v), x in zip(edges, w)]).full()
    for i in range(n):
        top = local_topk(i, H, k)
        assert top[0] == local_center(i, H)
        assert set(top) <= set(H.component_of(i).tolist())
        assert len(top) == min(k, H.component_size(i))
        assert local_topk(i, H, k) == top
