import numpy as np
import pytest

from afc.bounds import hoeffding_eps
from afc.constrained import (PoolMode, TargetPool, build_constrained_kernel, enumerate_clique_pool,
                             exact_constrained_kernel, pool_statistics, triangles)
from afc.core import uniform
from afc.graph import BaseTopology
from afc.kernel import estimate_kernel, sample_rows
from afc.realization import RealizationModel
from conftest import CLIQUE_MODEL


def test_single_triangle_pool():
    base = BaseTopology.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    pool = enumerate_clique_pool(base, 8)
    assert pool.primitives == ((0, 1, 2),) and pool.W == {0, 1, 2} and pool.truncated


def test_no_triangles_is_an_error():
    with pytest.raises(ValueError):
        enumerate_clique_pool(BaseTopology.from_edges(3, [(0, 1), (1, 2)]))


def test_lexicographic_tie_break():
    # two disjoint triangles with identical degree sums
    base = BaseTopology.from_edges(6, [(3, 4), (4, 5), (3, 5), (0, 1), (1, 2), (0, 2)])
    assert enumerate_clique_pool(base, 1).primitives == ((0, 1, 2),)


def test_degree_sum_ranking(two_clique):
    pool = enumerate_clique_pool(two_clique, 1)
    # triangles holding a bridge endpoint score highest; (0,1,2) first lexicographically
    assert pool.primitives == ((0, 1, 2),)
    assert len(triangles(two_clique)) == 8


def test_pool_is_union_of_primitives_only():
    # triangles {0,1,2} and {0,2,3}; {1,2,3} is not a designated primitive
    pool = TargetPool(((0, 1, 2), (0, 2, 3)))
    assert pool.W == {0, 1, 2, 3}
    assert (1, 2, 3) not in pool.primitives


def test_fallback_validation():
    pool = TargetPool(((0, 1, 2),))
    with pytest.raises(ValueError):
        pool.with_fallback(1, {1, 5})
    with pytest.raises(ValueError):
        pool.with_fallback(4, {5})
    fb = pool.with_fallback(5, {5, 6})
    assert fb.fallback_set == {5, 6}
    assert enumerate_clique_pool(BaseTopology.from_edges(3, [(0, 1), (1, 2), (0, 2)]), fallback=True).fallback_node == 0


def test_vacuous_pool_matches_unconstrained(small_graph):
    m = RealizationModel(p_on=0.8, alpha=0.15, k_min=2)
    pool = TargetPool(tuple((v,) for v in range(5)))
    con = build_constrained_kernel(m, small_graph, pool, "hard", 3, 400, seed=8)
    assert con.kernel.digest() == estimate_kernel(m, small_graph, 400, 8).kernel.digest()


def test_unreachable_pool_absorbs_everything():
    base = BaseTopology.from_edges(4, [(0, 1), (1, 2)])
    m = RealizationModel(p_on=0.9, alpha=0.15, k_min=2)
    con = build_constrained_kernel(m, base, TargetPool(((3,),)), PoolMode.HARD, 2, 200, 0, stabilize_floor=None)
    assert np.allclose(con.kernel.r, 1.0)


def test_hard_kernel_matches_enumeration(two_clique, clique_law):
    pool = TargetPool(((4,),))
    exact = exact_constrained_kernel(clique_law, pool, "hard", 1)
    assert np.allclose(exact.Q[:, [v for v in range(9) if v != 4]], 0)
    M = 20_000
    con = build_constrained_kernel(CLIQUE_MODEL, two_clique, pool, "hard", 1, M, seed=2, stabilize_floor=None)
    assert np.abs(con.kernel.P - exact.P).max() < hoeffding_eps(M, 0.01, 9)


def test_feasibility_identity_and_shared_draws(two_clique):
    pool = TargetPool(((0, 1, 2),)).with_fallback(6, {6, 7, 8})
    rows = sample_rows(CLIQUE_MODEL, two_clique, 500, seed=1)
    hard = build_constrained_kernel(CLIQUE_MODEL, two_clique, pool, "hard", 2, rows=rows, stabilize_floor=None)
    fb = build_constrained_kernel(CLIQUE_MODEL, two_clique, pool, "fallback", 2, rows=rows, stabilize_floor=None)
    assert np.allclose(hard.xi + hard.kernel.r, 1.0, atol=1e-12)
    assert np.array_equal(hard.xi, fb.xi)
    assert np.allclose(pool_statistics(hard.kernel, None, pool).xi, hard.xi)
    assert np.allclose(pool_statistics(fb.kernel, None, pool).xi, fb.xi)
    assert fb.fallback_rate.max() > 0


def test_hard_mode_pool_mass_is_one(two_clique):
    pool = enumerate_clique_pool(two_clique, 3)
    con = build_constrained_kernel(CLIQUE_MODEL, two_clique, pool, "hard", 3, 300, seed=0)
    s = np.zeros(9)
    s[list(pool.W)] = 1 / len(pool.W)
    st = pool_statistics(con.kernel, s, pool)
    assert st.m_W == pytest.approx(1.0, abs=1e-10)
    assert sum(st.within_pool.values()) == pytest.approx(1.0)


def test_unvisited_fallback_set_keeps_profile(two_clique):
    pool = TargetPool(tuple((v,) for v in range(8))).with_fallback(8, {8})
    con = build_constrained_kernel(CLIQUE_MODEL, two_clique, pool, "fallback", 1, 200, seed=0)
    s = uniform(9)
    s[8] = 0
    s /= s.sum()
    st = pool_statistics(con.kernel, s, pool, xi=con.xi)
    if con.fallback_rate.max() == 0:
        assert st.c_fb == pytest.approx(1.0) and np.allclose(st.censored, st.b)


def test_zero_pool_mass_reports_empty():
    base = BaseTopology.from_edges(4, [(0, 1), (1, 2)])
    m = RealizationModel(p_on=0.9, alpha=0.15, k_min=2)
    pool = TargetPool(((3,),))
    con = build_constrained_kernel(m, base, pool, "hard", 2, 50, 0)
    s = np.array([1.0, 0, 0, 0])
    assert pool_statistics(con.kernel, s, pool).within_pool == {}
