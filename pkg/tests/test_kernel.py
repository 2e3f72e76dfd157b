import json
import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from afc.bounds import hoeffding_eps
from afc.graph import BaseTopology
from afc.kernel import (ABSORBED, AmcKernel, ExactLaw, KernelError, SummaryCache, counts_to_kernel,
                        estimate_kernel, exact_kernel, sample_next, sample_rows, stabilize, write_kernel)
from afc.realization import RealizationModel, substream
from helpers import random_kernel


def triangle():
    return BaseTopology.from_edges(3, [(0, 1), (1, 2), (0, 2)])


def test_row_normalization_enforced():
    with pytest.raises(KernelError):
        AmcKernel([[0.5]], [0.6])
    with pytest.raises(KernelError):
        AmcKernel([[1.2]], [-0.2])


def test_alpha_one_always_absorbs(two_clique):
    m = RealizationModel(alpha=1.0, k_min=1)
    rng = substream(0, 0)
    assert all(sample_next(3, m, two_clique, rng) == ABSORBED for _ in range(50))


def test_no_randomness_gives_global_center(two_clique):
    m = RealizationModel(p_on=1.0, alpha=0.0, k_min=1)
    rng = substream(0, 0)
    assert {sample_next(i, m, two_clique, rng) for i in range(9)} == {4}


def test_exact_kernel_triangle_by_hand():
    """Triangle, p_on=1/2, k_min=2: enumerate the 8 subsets by hand.

    From anchor 0, with edges e01, e12, e02 (in that order):
    - none / only e12: component {0} -> absorbed          (2/8)
    - only e01: {0,1}, tie -> 0                            (1/8)
    - only e02: {0,2}, tie -> 0                            (1/8)
    - e01+e12: path 0-1-2, center 1                        (1/8)
    - e02+e12: path 0-2-1, center 2                        (1/8)
    - e01+e02: path 1-0-2, center 0                        (1/8)
    - all: triangle, all tied -> 0                         (1/8)
    """
    m = RealizationModel(p_on=0.5, alpha=0.15, k_min=2)
    K = exact_kernel(m, triangle())
    row0 = np.array([4, 1, 1, 2]) / 8
    row0[:3] *= 0.85
    row0[3] = 1 - row0[:3].sum()
    assert np.allclose(K.P[0], row0, atol=1e-15)


def test_exact_kernel_degenerate_cases(two_clique):
    K = exact_kernel(RealizationModel(p_on=1.0, alpha=0.2, k_min=1), triangle())
    assert np.allclose(K.Q[:, 0], 0.8) and np.allclose(K.r, 0.2)
    K = exact_kernel(RealizationModel(p_on=0.0, alpha=0.2, k_min=2), triangle())
    assert np.allclose(K.r, 1.0)


def test_exact_enumeration_cap():
    base = BaseTopology.from_edges(8, [(u, v) for u in range(8) for v in range(u + 1, 8)])
    with pytest.raises(KernelError):
        ExactLaw(RealizationModel(), base)


def test_single_draw_row_is_unit_mass(small_graph):
    m = RealizationModel(p_on=0.9, alpha=0.15, k_min=1)
    est = estimate_kernel(m, small_graph, 1, seed=3, stabilize_floor=None)
    assert np.all(np.isin(est.kernel.P, [0.0, 1.0]))
    assert np.allclose(est.kernel.P.sum(axis=1), 1)


def test_estimation_is_reproducible_and_thread_invariant(small_graph, monkeypatch):
    m = RealizationModel(p_on=0.8, alpha=0.15, k_min=2)
    a = estimate_kernel(m, small_graph, 300, seed=5).kernel
    monkeypatch.setenv("AFC_THREADS", "4")
    b = estimate_kernel(m, small_graph, 300, seed=5).kernel
    assert a.digest() == b.digest()
    c = estimate_kernel(m, small_graph, 300, seed=6).kernel
    assert a.digest() != c.digest()


def test_row_order_does_not_matter(small_graph):
    m = RealizationModel(p_on=0.8, alpha=0.15, k_min=2)
    rows = sample_rows(m, small_graph, 200, seed=9)
    from afc.kernel import sample_row
    cache = SummaryCache(small_graph)
    back = [sample_row(m, small_graph, i, 200, substream(9, i, 0), cache) for i in reversed(range(5))][::-1]
    for a, b in zip(rows, back):
        assert np.array_equal(a.next_states(2), b.next_states(2))


def test_two_clique_row_matches_exact_within_3_sigma(two_clique, clique_exact):
    from conftest import CLIQUE_MODEL
    M = 50_000
    row = sample_rows(CLIQUE_MODEL, two_clique, M, seed=21)[2]
    p_hat = np.mean(row.next_states(1) == 4)
    p = clique_exact.Q[2, 4]
    assert abs(p_hat - p) < 3 * np.sqrt(p * (1 - p) / M)


def test_estimate_converges_under_hoeffding(small_graph):
    m = RealizationModel(p_on=0.7, alpha=0.15, k_min=2)
    P = exact_kernel(m, small_graph).P
    est = estimate_kernel(m, small_graph, 20_000, seed=1, stabilize_floor=None)
    assert np.abs(est.kernel.P - P).max() < hoeffding_eps(20_000, 0.01, 5)


def test_stabilization_floor():
    K = AmcKernel([[0.0, 1.0], [0.5, 0.3]], [0.0, 0.2])
    S, rec = stabilize(K, 1e-6)
    assert rec.rows == (0,)
    assert S.r[0] == pytest.approx(1e-6) and S.Q[0, 1] == pytest.approx(1 - 1e-6)
    assert np.array_equal(S.P[1], K.P[1])
    assert np.abs(S.Q).sum(axis=1).max() <= 1 - 1e-6 + 1e-15


def test_counts_to_kernel():
    K = counts_to_kernel(np.array([[1, 1, ABSORBED, 0], [ABSORBED] * 4]), 2)
    assert K.P[0].tolist() == [0.25, 0.5, 0.25]
    assert K.P[1].tolist() == [0.0, 0.0, 1.0]


def test_csv_round_trip_and_envelope(tmp_path, small_graph):
    m = RealizationModel(p_on=0.8, alpha=0.15, k_min=2)
    est = estimate_kernel(m, small_graph, 50, seed=0)
    write_kernel(est, m, tmp_path, labels=list("abcde"))
    header = open(tmp_path / "kernel.csv").readline().strip()
    assert header == "node,a,b,c,d,e,absorbed"
    back = AmcKernel.from_csv(tmp_path / "kernel.csv")
    assert back.digest() == est.kernel.digest()
    env = json.load(open(tmp_path / "kernel.json"))
    assert env["M"] == 50 and env["sha256"] == est.kernel.digest()


@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_random_kernels_are_normalized(seed, n):
    K = random_kernel(np.random.default_rng(seed), n)
    assert np.allclose(K.P.sum(axis=1), 1, atol=1e-12)
    assert np.allclose(K.full_matrix().sum(axis=1), 1, atol=1e-12)
    # norm bound from the leak floor
    N = np.linalg.inv(np.eye(n) - K.Q)
    assert np.abs(N).sum(axis=1).max() <= 1 / K.r.min() + 1e-9
