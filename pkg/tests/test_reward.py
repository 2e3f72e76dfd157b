import numpy as np
import pytest
from hypothesis import given, strategies as st

from afc.core import afc, canonical_kernel, point_mass, ratio_se, uniform
from afc.graph import BaseTopology
from afc.kernel import ABSORBED, counts_to_kernel, estimate_kernel, sample_rows
from afc.realization import RealizationModel, substream
from afc.reward import (RewardSpec, estimate_psi, exact_psi, improvement_eta, psi_standard_error,
                        reward_afc, reward_f_from_hubs, switching_eta, tabulated_sampler, transition_psi)
from conftest import CLIQUE_MODEL
from helpers import random_kernel


def test_trivial_reward_values():
    K = random_kernel(np.random.default_rng(0), 4)
    s = uniform(4)
    assert reward_afc(K, s, np.ones(4)) == pytest.approx(1.0, abs=1e-14)
    assert reward_afc(K, s, np.eye(4)[2]) == pytest.approx(afc(K, s).b[2], abs=1e-15)
    C = canonical_kernel(uniform(3), 0.5)
    assert reward_afc(C, point_mass(3, 0), [1, 0, 0]) == pytest.approx(2 / 3)


def test_negative_psi_rejected():
    K = random_kernel(np.random.default_rng(0), 3)
    with pytest.raises(ValueError):
        reward_afc(K, None, [1, -1, 0])
    with pytest.raises(ValueError):
        RewardSpec.node([1.0, -2.0])


def test_node_psi_is_f_exactly():
    f = np.array([1.0, 2.0, 0.5])
    assert np.array_equal(estimate_psi(RewardSpec.node(f), None, None), f)


def test_switching_psi_is_off_diagonal_mass():
    K = random_kernel(np.random.default_rng(1), 5)
    psi = estimate_psi(RewardSpec.transition(switching_eta), None, None, kernel=K)
    assert np.allclose(psi, K.Q.sum(axis=1) - np.diag(K.Q))


def test_improvement_eta():
    eta = improvement_eta([1.0, 3.0])
    assert eta(0, 1) == 2.0 and eta(1, 0) == 0.0 and eta(0, ABSORBED) == 0.0


def test_top1_size_equals_continuation_mass(small_graph):
    m = RealizationModel(p_on=0.7, alpha=0.15, k_min=2)
    rows = sample_rows(m, small_graph, 500, seed=2)
    est = estimate_kernel(m, small_graph, 500, 2, stabilize_floor=None, rows=rows)
    psi = estimate_psi(RewardSpec.valued_topk(1, np.ones(5)), m, small_graph, rows=rows)
    assert np.allclose(psi, 1 - est.kernel.r, atol=1e-15)


def test_top3_estimate_matches_enumeration(two_clique, clique_law):
    spec = RewardSpec.valued_topk(3, np.ones(9))
    exact = exact_psi(spec, clique_law)
    rows = sample_rows(CLIQUE_MODEL, two_clique, 50_000, seed=4)
    est = estimate_psi(spec, CLIQUE_MODEL, two_clique, rows=rows)
    se = psi_standard_error(spec, rows, 1)
    assert np.all(np.abs(est - exact) < 3 * se)


def test_hub_reward():
    # star center 0 with a tail 0-1-2 and a separate edge 3-4
    base = BaseTopology.from_edges(5, [(0, 1), (1, 2), (3, 4)])
    f, hubs = reward_f_from_hubs(base, 1, [10.0], 0.6)
    assert hubs == [1]
    assert f[1] == 10.0 and f[0] == pytest.approx(6.0) and f[2] == pytest.approx(6.0)
    assert f[3] == 0 and f[4] == 0


def test_hub_ties_by_index():
    base = BaseTopology.from_edges(4, [(0, 1), (2, 3)])
    assert reward_f_from_hubs(base, 2, [1.0, 1.0], 0.5)[1] == [0, 1]


@given(st.integers(0, 2**32 - 1))
def test_reward_monotone_in_psi(seed):
    rng = np.random.default_rng(seed)
    K = random_kernel(rng, 6, 0.05, 0.5)
    s = rng.dirichlet(np.ones(6))
    psi = rng.random(6)
    bigger = psi + rng.random(6) * (rng.random(6) < 0.5)
    assert reward_afc(K, s, psi) <= reward_afc(K, s, bigger) + 1e-12


def test_transition_psi_matches_kernel_formula():
    K = random_kernel(np.random.default_rng(3), 4)
    f = np.array([0.0, 1.0, 5.0, 2.0])
    psi = transition_psi(K, improvement_eta(f))
    want = [sum(K.Q[i, j] * max(f[j] - f[i], 0) for j in range(4)) for i in range(4)]
    assert np.allclose(psi, want)


def test_uniform_step_reward_representation(clique_law, clique_exact):
    """Length-biased uniform step: E[l at X_U] equals reward-AFC."""
    spec = RewardSpec.valued_topk(2, np.arange(9, dtype=float))
    step = tabulated_sampler(clique_law, spec)
    rng = substream(17, 0)
    n_traj = 40_000
    states = rng.choice(9, size=n_traj)
    alive = np.arange(n_traj)
    per_step = []  # (alive indices, rewards) per time index
    lengths = np.zeros(n_traj, dtype=int)
    while len(alive):
        nxt, r = step(states, rng)
        per_step.append(dict(zip(alive.tolist(), r.tolist())))
        lengths[alive] += 1
        keep = nxt != ABSORBED
        alive, states = alive[keep], nxt[keep]
    paths = rng.choice(n_traj, size=n_traj, p=lengths / lengths.sum())
    ts = (rng.random(n_traj) * lengths[paths]).astype(int)
    vals = np.array([per_step[t][p] for p, t in zip(paths, ts)])
    totals = np.zeros(n_traj)
    for step_rewards in per_step:
        for k, v in step_rewards.items():
            totals[k] += v
    _, ratio_err = ratio_se(totals, lengths.astype(float))
    # resampling noise on top of the trajectory noise
    se = np.sqrt(vals.var() / n_traj + ratio_err**2)
    target = reward_afc(clique_exact, None, exact_psi(spec, clique_law))
    assert abs(vals.mean() - target) < 4 * se
