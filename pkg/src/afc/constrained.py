"""Set-constrained Top-k selection: hard-filter and fallback kernels, pool
feasibility and mass, and triangle-based target pools."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import afc, check_distribution, uniform
from .graph import BaseTopology, GraphSummary
from .kernel import (ABSORBED, DEFAULT_FLOOR, AmcKernel, ExactLaw, KernelError, RowSample,
                     Stabilization, counts_to_kernel, sample_rows, stabilize)
from .realization import RealizationModel


class PoolMode(str, enum.Enum):
    HARD = "hard"
    FALLBACK = "fallback"


@dataclass(frozen=True)
class TargetPool:
    """Target pool ``W`` as a union of designated primitives.

    ``fallback_node`` receives valid steps whose candidate set misses ``W``.
    ``fallback_set`` (possibly empty) is the node set censored out of the
    profile; when nonempty it must contain ``fallback_node`` and avoid ``W``.
    """

    primitives: tuple[tuple[int, ...], ...]
    fallback_node: int | None = None
    fallback_set: frozenset = frozenset()
    truncated: bool = False  # fewer primitives found than requested
    W: frozenset = field(init=False)

    def __post_init__(self):
        prims = tuple(tuple(sorted(int(v) for v in p)) for p in self.primitives)
        if not prims:
            raise ValueError("a pool needs at least one primitive")
        object.__setattr__(self, "primitives", prims)
        object.__setattr__(self, "W", frozenset(v for p in prims for v in p))
        fb = frozenset(int(v) for v in self.fallback_set)
        object.__setattr__(self, "fallback_set", fb)
        if fb:
            if self.fallback_node is None or self.fallback_node not in fb:
                raise ValueError("fallback node must belong to the fallback set")
            if fb & self.W:
                raise ValueError("fallback set must be disjoint from the pool")

    def with_fallback(self, node: int, fallback_set=None) -> "TargetPool":
        return TargetPool(self.primitives, int(node),
                          frozenset(fallback_set) if fallback_set is not None else frozenset(),
                          self.truncated)

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[list(self.W)] = True
        return m


def triangles(base: BaseTopology) -> list[tuple[int, int, int]]:
    adj = [set(a) for a in base.adjacency_lists()]
    out = []
    for u in range(base.n):
        for v, w in combinations(sorted(x for x in adj[u] if x > u), 2):
            if w in adj[v]:
                out.append((u, v, w))
    return out


def enumerate_clique_pool(base: BaseTopology, S: int = 8, fallback: bool = False) -> TargetPool:
    """Top-``S`` triangles by degree sum, ties broken lexicographically.

    With ``fallback`` the fallback node is the smallest id of the first
    selected triangle and nothing is censored.
    """
    tris = triangles(base)
    if not tris:
        raise ValueError("base topology has no triangles")
    deg = base.degrees()
    tris.sort(key=lambda t: (-int(deg[list(t)].sum()), t))
    chosen = tris[:S]
    pool = TargetPool(tuple(chosen), truncated=len(tris) < S)
    return pool.with_fallback(chosen[0][0]) if fallback else pool


def constrained_select(summary: GraphSummary, i: int, k: int, k_min: int, pool: TargetPool,
                       mode: PoolMode):
    """Next state under the constrained selector, with a feasibility flag.

    Returns ``(state or None, feasible)``; ``None`` stands for absorption.
    """
    cands = summary.topk(i, k, k_min)
    if cands is None:
        return None, False
    for v in cands:
        if v in pool.W:
            return v, True
    if mode is PoolMode.FALLBACK:
        return pool.fallback_node, False
    return None, False


def _check_mode(pool, mode):
    mode = PoolMode(mode)
    if mode is PoolMode.FALLBACK and pool.fallback_node is None:
        raise ValueError("FALLBACK mode needs a fallback node")
    return mode


@dataclass
class ConstrainedEstimate:
    kernel: AmcKernel
    raw: AmcKernel
    mode: PoolMode
    xi: np.ndarray  # per-row fraction of draws whose candidate set meets W
    fallback_rate: np.ndarray  # per-row fraction of draws routed to the fallback node
    stabilization: Stabilization | None


def build_constrained_kernel(model: RealizationModel, base: BaseTopology, pool: TargetPool,
                             mode, k: int, M: int = 1, seed: int = 0,
                             rows: list[RowSample] | None = None,
                             stabilize_floor: float | None = DEFAULT_FLOOR) -> ConstrainedEstimate:
    """Row-wise Monte Carlo kernel with the constrained selector.

    Reusing ``rows`` (or the same ``seed``) makes HARD and FALLBACK kernels
    share every draw, so their feasibility estimates coincide.
    """
    mode = _check_mode(pool, mode)
    if rows is None:
        rows = sample_rows(model, base, M, seed)
    n = base.n
    states, xi, fb = [], np.empty(n), np.empty(n)
    for row in rows:
        i = row.anchor

        def pick(s, i=i):
            j, ok = constrained_select(s, i, k, model.k_min, pool, mode)
            return (ABSORBED if j is None else j, ok)

        picks = [pick(s) for s in row.summaries] + [(ABSORBED, False)]
        nxt = np.array([p[0] for p in picks], dtype=np.int64)[row.inverse]
        ok = np.array([p[1] for p in picks])[row.inverse]
        states.append(nxt)
        xi[i] = ok.mean()
        fb[i] = (~ok & (nxt != ABSORBED)).mean()
    raw = counts_to_kernel(np.vstack(states), n)
    if stabilize_floor is None:
        if np.all(raw.r <= 0):
            raise KernelError("constrained kernel never absorbs")
        return ConstrainedEstimate(raw, raw, mode, xi, fb, None)
    kern, record = stabilize(raw, stabilize_floor)
    return ConstrainedEstimate(kern, raw, mode, xi, fb, record)


def exact_constrained_kernel(law: ExactLaw, pool: TargetPool, mode, k: int) -> AmcKernel:
    mode = _check_mode(pool, mode)
    k_min = law.model.k_min
    return law.kernel(lambda i: (lambda s: constrained_select(s, i, k, k_min, pool, mode)[0]))


def exact_feasibility(law: ExactLaw, pool: TargetPool, k: int) -> np.ndarray:
    k_min = law.model.k_min
    return np.array([law.expect(i, lambda s, i=i: float(
        constrained_select(s, i, k, k_min, pool, PoolMode.HARD)[1])) for i in range(law.base.n)])


@dataclass(frozen=True)
class PoolStatistics:
    xi: np.ndarray
    m_W: float
    within_pool: dict  # node -> mass, empty when m_W = 0
    censored: np.ndarray  # b on V minus the fallback set, renormalized
    c_fb: float  # mass kept after censoring
    b: np.ndarray


def pool_statistics(kernel: AmcKernel, s, pool: TargetPool, xi=None) -> PoolStatistics:
    """Feasibility, pool mass and the within-pool and censored profiles.

    ``xi`` defaults to ``sum_{j in W} P_ij``, which is exact for HARD kernels
    and for FALLBACK kernels whose fallback node lies outside ``W``.
    """
    n = kernel.n
    s = uniform(n) if s is None else check_distribution(s, n)
    W = pool.mask(n)
    if xi is None:
        xi = kernel.Q[:, W].sum(axis=1)
    b = afc(kernel, s).b
    m_W = float(b[W].sum())
    within = {int(v): float(b[v] / m_W) for v in sorted(pool.W)} if m_W > 0 else {}
    keep = np.ones(n, dtype=bool)
    keep[list(pool.fallback_set)] = False
    c_fb = float(b[keep].sum())
    censored = np.where(keep, b, 0.0) / c_fb if c_fb > 0 else np.zeros(n)
    return PoolStatistics(np.asarray(xi, dtype=float), m_W, within, censored, c_fb, b)


def pool_report(est: ConstrainedEstimate, stats: PoolStatistics, pool: TargetPool, labels=None) -> dict:
    names = list(labels) if labels is not None else None

    def lab(v):
        return names[v] if names is not None else v

    return {
        "mode": est.mode.value,
        "W": [lab(v) for v in sorted(pool.W)],
        "primitives": [[lab(v) for v in p] for p in pool.primitives],
        "truncated": pool.truncated,
        "fallback_node": None if pool.fallback_node is None else lab(pool.fallback_node),
        "fallback_set": [lab(v) for v in sorted(pool.fallback_set)],
        "xi": est.xi.tolist(),
        "m_W": stats.m_W,
        "within_pool": {str(lab(v)): m for v, m in stats.within_pool.items()},
        "censored": stats.censored.tolist(),
        "c_fb": stats.c_fb,
        "fallback_activation_rate": float(est.fallback_rate.mean()),
        "kernel_sha256": est.kernel.digest(),
    }
