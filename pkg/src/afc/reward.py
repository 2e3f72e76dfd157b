"""Reward-weighted AFC on an unchanged kernel.

Every reward enters only through its expected one-step value ``psi``, so the
fundamental matrix of the plain kernel is reused as is.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import afc, check_distribution, ratio_se, simulate_trajectories, uniform
from .graph import BaseTopology, GraphSummary
from .kernel import ABSORBED, AmcKernel, ExactLaw, RowSample, sample_rows
from .realization import RealizationModel, substream


class RewardKind(str, enum.Enum):
    NODE = "node"
    TRANSITION = "transition"
    VALUED_TOPK = "valued_topk"
    POOL_TOPK = "pool_topk"


Eta = Callable[[int, int], float]  # eta(i, j), j == ABSORBED for the absorbing state


@dataclass(frozen=True, eq=False)
class RewardSpec:
    kind: RewardKind
    f: np.ndarray | None = None
    eta: Eta | None = None
    k: int | None = None
    gamma: np.ndarray | None = None
    pool: frozenset | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", RewardKind(self.kind))
        for attr in ("f", "gamma"):
            v = getattr(self, attr)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if np.any(v < 0) or not np.all(np.isfinite(v)):
                    raise ValueError(f"{attr} must be finite and nonnegative")
                object.__setattr__(self, attr, v)
        if self.kind is RewardKind.NODE and self.f is None:
            raise ValueError("NODE reward needs f")
        if self.kind is RewardKind.TRANSITION and self.eta is None:
            raise ValueError("TRANSITION reward needs eta")
        if self.kind in (RewardKind.VALUED_TOPK, RewardKind.POOL_TOPK):
            if self.k is None or self.k < 1 or self.gamma is None:
                raise ValueError("Top-k rewards need k >= 1 and gamma")
        if self.kind is RewardKind.POOL_TOPK and self.pool is None:
            raise ValueError("POOL_TOPK reward needs a pool")

    @classmethod
    def node(cls, f, name="node"):
        return cls(RewardKind.NODE, f=f, name=name)

    @classmethod
    def transition(cls, eta: Eta, name="transition"):
        return cls(RewardKind.TRANSITION, eta=eta, name=name)

    @classmethod
    def valued_topk(cls, k, gamma, name="valued_topk"):
        return cls(RewardKind.VALUED_TOPK, k=k, gamma=gamma, name=name)

    @classmethod
    def pool_topk(cls, k, pool, gamma, name="pool_topk"):
        return cls(RewardKind.POOL_TOPK, k=k, gamma=gamma, pool=frozenset(int(v) for v in pool), name=name)

    def candidate_value(self, summary: GraphSummary, i: int, k_min: int) -> float:
        """Realized step reward of a Top-k spec: ``sum of gamma`` over the
        candidate set (intersected with the pool for POOL_TOPK)."""
        cands = summary.topk(i, self.k, k_min)
        if cands is None:
            return 0.0
        if self.pool is not None:
            cands = [v for v in cands if v in self.pool]
        return float(self.gamma[cands].sum()) if cands else 0.0


def switching_eta(i: int, j: int) -> float:
    """1 when the chain moves to a different transient node."""
    return float(j != ABSORBED and j != i)


def improvement_eta(f) -> Eta:
    """``max(f(j) - f(i), 0)``; moving to the absorbing state earns nothing."""
    f = np.asarray(f, dtype=float)

    def eta(i, j):
        return 0.0 if j == ABSORBED else max(float(f[j] - f[i]), 0.0)

    return eta


def transition_psi(kernel: AmcKernel, eta: Eta) -> np.ndarray:
    """``psi_i = sum_j Q_ij eta(i, j) + r_i eta(i, ABSORBED)``."""
    n = kernel.n
    psi = np.empty(n)
    for i in range(n):
        row = np.array([eta(i, j) for j in range(n)])
        psi[i] = kernel.Q[i] @ row + kernel.r[i] * eta(i, ABSORBED)
    return psi


def reward_afc(kernel: AmcKernel, s, psi) -> float:
    """Long-run reward per pre-absorption step, ``sN psi / sN1``."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (kernel.n,) or np.any(psi < 0):
        raise ValueError("psi must be a nonnegative vector of length n")
    prof = afc(kernel, s)
    return float(prof.b @ psi)


def topk_draw_values(spec: RewardSpec, row: RowSample, k_min: int) -> np.ndarray:
    """Per-draw rewards for one row; absorbed draws earn 0."""
    return row.per_draw(lambda s: spec.candidate_value(s, row.anchor, k_min), 0.0)


def estimate_psi(spec: RewardSpec, model: RealizationModel, base: BaseTopology, M: int = 1,
                 seed: int = 0, rows: list[RowSample] | None = None,
                 kernel: AmcKernel | None = None) -> np.ndarray:
    """Expected one-step reward vector.

    NODE returns ``f``.  TRANSITION is read off ``kernel`` (required).  The
    Top-k kinds average over simulator draws; pass ``rows`` to reuse the draws
    the kernel was estimated from.
    """
    if spec.kind is RewardKind.NODE:
        return spec.f.copy()
    if spec.kind is RewardKind.TRANSITION:
        if kernel is None:
            raise ValueError("TRANSITION rewards are computed from a kernel")
        return transition_psi(kernel, spec.eta)
    if rows is None:
        rows = sample_rows(model, base, M, seed)
    return np.array([topk_draw_values(spec, row, model.k_min).mean() for row in rows])


def psi_standard_error(spec: RewardSpec, rows: list[RowSample], k_min: int) -> np.ndarray:
    out = []
    for row in rows:
        v = topk_draw_values(spec, row, k_min)
        out.append(v.std(ddof=1) / np.sqrt(len(v)) if len(v) > 1 else np.inf)
    return np.array(out)


def exact_psi(spec: RewardSpec, law: ExactLaw, kernel: AmcKernel | None = None) -> np.ndarray:
    """``psi`` by enumerating edge subsets (small graphs only)."""
    if spec.kind is RewardKind.NODE:
        return spec.f.copy()
    if spec.kind is RewardKind.TRANSITION:
        if kernel is None:
            raise ValueError("TRANSITION rewards are computed from a kernel")
        return transition_psi(kernel, spec.eta)
    k_min = law.model.k_min
    return np.array([law.expect(i, lambda s, i=i: spec.candidate_value(s, i, k_min))
                     for i in range(law.base.n)])


def reward_f_from_hubs(base: BaseTopology, n_hubs: int = 3, levels=(10.0, 10.0, 10.0),
                       beta: float = 0.6) -> tuple[np.ndarray, list[int]]:
    """Node values decaying geometrically in hop distance from the top-degree
    hubs: ``f(v) = max_l R_l beta^d(v, h_l)``, 0 if no hub is reachable."""
    if n_hubs < 1 or len(levels) < n_hubs:
        raise ValueError("need n_hubs >= 1 and one level per hub")
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    deg = base.degrees()
    hubs = [int(v) for v in np.lexsort((np.arange(base.n), -deg))[:n_hubs]]
    d = base.hop_distances(hubs)
    f = np.zeros(base.n)
    for level, dist in zip(levels, d):
        reach = np.isfinite(dist)
        f[reach] = np.maximum(f[reach], level * beta ** dist[reach])
    return f, hubs


def tabulated_sampler(law: ExactLaw, spec: RewardSpec | None = None):
    """Simulator driven by the exact realization law.

    Each step tosses the stop coin, draws an edge subset with its exact
    probability, and reads off the next center and the realized reward.
    Used as an independent oracle for reward-AFC.
    """
    n = law.base.n
    k_min = law.model.k_min
    alpha = law.model.alpha
    nxt = np.vstack([law.tabulate(i, lambda s, i=i: s.center(i, k_min)) for i in range(n)])
    if spec is not None and spec.kind in (RewardKind.VALUED_TOPK, RewardKind.POOL_TOPK):
        vals = np.vstack([[spec.candidate_value(s, i, k_min) for s in law.summaries(i)] for i in range(n)])
    else:
        vals = None
    cdf = np.cumsum(law.probs)
    cdf[-1] = 1.0

    def step(states, rng):
        stop = rng.random(len(states)) < alpha
        idx = np.searchsorted(cdf, rng.random(len(states)), side="right")
        idx = np.minimum(idx, len(cdf) - 1)
        out = np.where(stop, ABSORBED, nxt[states, idx])
        if spec is None:
            return out
        if spec.kind is RewardKind.NODE:
            r = spec.f[states]
        elif spec.kind is RewardKind.TRANSITION:
            r = np.array([spec.eta(int(i), int(j)) for i, j in zip(states, out)])
        else:
            r = np.where(stop, 0.0, vals[states, idx])
        return out, r

    return step


def simulate_reward_rate(sampler, s, n: int, n_traj: int, seed: int = 0):
    """Simulated reward per step (total reward over total length) and its
    delta-method standard error."""
    s = uniform(n) if s is None else check_distribution(s, n)
    _, lengths, rewards = simulate_trajectories(sampler, s, n, n_traj, substream(seed, 0))
    est, se = ratio_se(rewards, lengths.astype(float))
    return float(est), float(se)


def reward_report(kernel: AmcKernel, s, f, hubs, psis: dict[str, np.ndarray]) -> dict:
    """JSON-ready summary: node reward ``b_f``, switching intensity and the
    improvement reward, plus the ``psi`` vectors used."""
    out = {
        "hubs": list(hubs),
        "f": np.asarray(f).tolist(),
        "improvement_convention": "eta(i,j) = max(f(j) - f(i), 0); eta(i, absorbed) = 0",
        "values": {},
        "psi": {},
    }
    for name, psi in psis.items():
        out["values"][name] = reward_afc(kernel, s, psi)
        out["psi"][name] = np.asarray(psi).tolist()
    return out
