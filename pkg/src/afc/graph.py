"""Deterministic graph machinery: components, weighted geodesic counting,
betweenness, and tie-broken local centers / local Top-k sets.

Nodes are integers ``0..n-1``.  The global tie-breaker is the smallest node
index.  Betweenness is the non-normalized ordered-pair sum, so every
unordered pair is counted twice.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np

# relative tolerance for declaring two path lengths equal
DIST_RTOL = 1e-12
# relative tolerance for declaring two betweenness values tied
BC_RTOL = 1e-9


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BaseTopology:
    """Undirected weighted base graph G(V, E) with positive weights w0."""

    n: int
    edges: np.ndarray  # (m, 2) int, u < v
    weights: np.ndarray  # (m,) float, > 0
    labels: tuple | None = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.n < 1:
            raise GraphError("graph needs at least one node")
        if len(edges) != len(weights):
            raise GraphError("edges and weights differ in length")
        if len(edges):
            if edges.min() < 0 or edges.max() >= self.n:
                raise GraphError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise GraphError("self-loops are not allowed")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise GraphError("edge weights must be finite and strictly positive")
        edges = np.sort(edges, axis=1)
        keys = edges[:, 0] * self.n + edges[:, 1]
        if len(np.unique(keys)) != len(keys):
            raise GraphError("duplicate undirected edge")
        if self.labels is not None and len(self.labels) != self.n:
            raise GraphError("labels must have one entry per node")
        edges.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_edges(cls, n, edge_list, labels=None) -> "BaseTopology":
        """Build from ``(u, v)`` or ``(u, v, w)`` tuples."""
        uv, w = [], []
        for e in edge_list:
            uv.append((int(e[0]), int(e[1])))
            w.append(float(e[2]) if len(e) > 2 else 1.0)
        return cls(n, np.array(uv, dtype=np.int64).reshape(-1, 2), np.array(w), labels)

    @property
    def m(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def full(self) -> "WorkingGraph":
        """The realization in which every base edge is present at its base weight."""
        return WorkingGraph.from_arrays(self.n, self.edges, self.weights)

    def label(self, v: int):
        return self.labels[v] if self.labels is not None else v

    def hop_distances(self, sources) -> np.ndarray:
        """Unweighted BFS distances from each source (inf when unreachable)."""
        adj = self.adjacency_lists()
        out = np.full((len(sources), self.n), np.inf)
        for row, s in enumerate(sources):
            out[row, s] = 0
            frontier = [s]
            d = 0
            while frontier:
                d += 1
                nxt = []
                for u in frontier:
                    for v in adj[u]:
                        if out[row, v] == np.inf:
                            out[row, v] = d
                            nxt.append(v)
                frontier = nxt
        return out

    def adjacency_lists(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(int(v))
            adj[v].append(int(u))
        return adj


@dataclass(frozen=True, eq=False)
class WorkingGraph:
    """A realization H on the full node set V with its active edges."""

    n: int
    edges: np.ndarray
    weights: np.ndarray
    component: np.ndarray = field(repr=False)  # component id per node
    sizes: np.ndarray = field(repr=False)  # size of each component id

    @classmethod
    def from_arrays(cls, n, edges, weights) -> "WorkingGraph":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        labels = _components(n, edges)
        sizes = np.bincount(labels)
        return cls(n, edges, weights, labels, sizes)

    def component_of(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.component == self.component[i])

    def component_size(self, i: int) -> int:
        return int(self.sizes[self.component[i]])

    @cached_property
    def csr(self):
        return _csr(self.n, self.edges, self.weights)


@numba.njit(cache=True)
def _union_find(n, edges):
    parent = np.arange(n)
    for e in range(edges.shape[0]):
        a, b = edges[e, 0], edges[e, 1]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b:
            if a < b:
                parent[b] = a
            else:
                parent[a] = b
    # label components in order of their smallest node
    labels = np.empty(n, dtype=np.int64)
    nxt = 0
    for v in range(n):
        r = v
        while parent[r] != r:
            r = parent[r]
        if r == v:
            labels[v] = nxt
            nxt += 1
        else:
            labels[v] = labels[r]
    return labels


def _components(n, edges) -> np.ndarray:
    return _union_find(n, np.ascontiguousarray(edges, dtype=np.int64).reshape(-1, 2))


def _csr(n, edges, weights):
    m = len(edges)
    src = np.concatenate([edges[:, 0], edges[:, 1]]) if m else np.zeros(0, np.int64)
    dst = np.concatenate([edges[:, 1], edges[:, 0]]) if m else np.zeros(0, np.int64)
    ww = np.concatenate([weights, weights]) if m else np.zeros(0)
    order = np.argsort(src, kind="stable")
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst[order].astype(np.int64), ww[order].astype(float)


@numba.njit(cache=True, nogil=True)
def _sssp(n, indptr, indices, wts, s, dist, sigma, order):
    """Dijkstra from s with geodesic counting; returns #settled nodes."""
    for v in range(n):
        dist[v] = np.inf
        sigma[v] = 0.0
    dist[s] = 0.0
    heap = [(0.0, s)]
    settled = np.zeros(n, dtype=np.bool_)
    cnt = 0
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if settled[u] or d > dist[u]:
            continue
        settled[u] = True
        order[cnt] = u
        cnt += 1
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            nd = d + wts[e]
            if nd < dist[v] and abs(nd - dist[v]) > DIST_RTOL * nd:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    # geodesic counts in settle order (predecessors settle strictly earlier)
    sigma[s] = 1.0
    for k in range(1, cnt):
        w = order[k]
        acc = 0.0
        for e in range(indptr[w], indptr[w + 1]):
            v = indices[e]
            if settled[v] and abs(dist[v] + wts[e] - dist[w]) <= DIST_RTOL * dist[w]:
                acc += sigma[v]
        sigma[w] = acc
    return cnt


@numba.njit(cache=True, nogil=True)
def _bfs(n, indptr, indices, s, dist, sigma, order):
    """Unit-length geodesic counting; same contract as ``_sssp``."""
    for v in range(n):
        dist[v] = np.inf
        sigma[v] = 0.0
    dist[s] = 0.0
    sigma[s] = 1.0
    order[0] = s
    head = 0
    cnt = 1
    while head < cnt:
        u = order[head]
        head += 1
        du = dist[u] + 1.0
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if dist[v] == np.inf:
                dist[v] = du
                order[cnt] = v
                cnt += 1
            if dist[v] == du:
                sigma[v] += sigma[u]
    return cnt


@numba.njit(cache=True, nogil=True)
def _brandes(n, indptr, indices, wts, sources, unit):
    bc = np.zeros(n)
    dist = np.empty(n)
    sigma = np.empty(n)
    delta = np.empty(n)
    order = np.empty(n, dtype=np.int64)
    for s in sources:
        if unit:
            cnt = _bfs(n, indptr, indices, s, dist, sigma, order)
        else:
            cnt = _sssp(n, indptr, indices, wts, s, dist, sigma, order)
        for k in range(cnt):
            delta[order[k]] = 0.0
        for k in range(cnt - 1, 0, -1):
            w = order[k]
            coeff = (1.0 + delta[w]) / sigma[w]
            for e in range(indptr[w], indptr[w + 1]):
                v = indices[e]
                step = 1.0 if unit else wts[e]
                if dist[v] < np.inf and abs(dist[v] + step - dist[w]) <= DIST_RTOL * dist[w]:
                    delta[v] += sigma[v] * coeff
            bc[w] += delta[w]
    return bc


def shortest_path_counts(H: WorkingGraph, s: int):
    """Weighted distances from ``s`` and the number of geodesics to each node."""
    if not 0 <= s < H.n:
        raise GraphError(f"source {s} out of range")
    indptr, indices, wts = H.csr
    dist = np.empty(H.n)
    sigma = np.empty(H.n)
    order = np.empty(H.n, dtype=np.int64)
    _sssp(H.n, indptr, indices, wts, s, dist, sigma, order)
    return dist, sigma


def betweenness(H: WorkingGraph, sources=None) -> np.ndarray:
    """Non-normalized weighted betweenness B_v(H), ordered-pair convention.

    ``sources`` restricts the outer loop; passing a component's node set gives
    exact values for the nodes of that component.
    """
    indptr, indices, wts = H.csr
    src = np.arange(H.n) if sources is None else np.asarray(sources, dtype=np.int64)
    # equal weights give the same geodesics as unit weights; B is scale-free
    unit = len(wts) == 0 or bool(np.all(wts == wts[0]))
    return _brandes(H.n, indptr, indices, wts if not unit else np.ones_like(wts), src, unit)


def ranked(nodes, values) -> list[int]:
    """Nodes by decreasing value, ties (within BC_RTOL) to the smaller index."""
    nodes = sorted(int(v) for v in nodes)
    out: list[int] = []
    remaining = nodes
    while remaining:
        vals = values[remaining]
        top = vals.max()
        tol = BC_RTOL * max(1.0, abs(top))
        tied = [v for v, x in zip(remaining, vals) if x >= top - tol]
        out.extend(tied)
        tied_set = set(tied)
        remaining = [v for v in remaining if v not in tied_set]
    return out


def argmax_tiebroken(nodes, values) -> int:
    nodes = np.asarray(sorted(int(v) for v in nodes))
    vals = values[nodes]
    top = vals.max()
    return int(nodes[np.argmax(vals >= top - BC_RTOL * max(1.0, abs(top)))])


class GraphSummary:
    """Components and betweenness of one realization, with lazy per-component
    rankings.  Shared by every anchor that observes the same realization."""

    __slots__ = ("component", "sizes", "bc", "_rank")

    def __init__(self, H: WorkingGraph):
        self.component = H.component
        self.sizes = H.sizes
        self.bc = betweenness(H, sources=np.flatnonzero(self.sizes[self.component] > 1))
        self._rank: dict[int, list[int]] = {}

    def ranking(self, i: int) -> list[int]:
        c = int(self.component[i])
        r = self._rank.get(c)
        if r is None:
            r = ranked(np.flatnonzero(self.component == c), self.bc)
            self._rank[c] = r
        return r

    def center(self, i: int, k_min: int = 1):
        if self.sizes[self.component[i]] < k_min:
            return None
        return self.ranking(i)[0]

    def topk(self, i: int, k: int, k_min: int = 1):
        if self.sizes[self.component[i]] < k_min:
            return None
        return self.ranking(i)[:k]


def global_center(H: WorkingGraph) -> int:
    """c(H): tie-broken argmax of betweenness over all of V."""
    return argmax_tiebroken(range(H.n), betweenness(H))


def local_center(i: int, H: WorkingGraph, k_min: int = 1):
    """Tie-broken betweenness maximizer of the component containing ``i``;
    ``None`` when that component has fewer than ``k_min`` nodes."""
    if H.component_size(i) < k_min:
        return None
    comp = H.component_of(i)
    return argmax_tiebroken(comp, betweenness(H, sources=comp))


def local_topk(i: int, H: WorkingGraph, k: int, k_min: int = 1):
    """First ``min(k, |K(i;H)|)`` nodes of the component ranking, or ``None``."""
    if k < 1:
        raise GraphError("k must be >= 1")
    if H.component_size(i) < k_min:
        return None
    comp = H.component_of(i)
    return ranked(comp, betweenness(H, sources=comp))[:k]


def random_walk_stationary(base: BaseTopology) -> np.ndarray:
    """Stationary law of the simple random walk, by solving pi P = pi."""
    A = np.zeros((base.n, base.n))
    A[base.edges[:, 0], base.edges[:, 1]] = 1
    A[base.edges[:, 1], base.edges[:, 0]] = 1
    P = A / A.sum(axis=1, keepdims=True)
    M = P.T - np.eye(base.n)
    M[-1, :] = 1.0
    rhs = np.zeros(base.n)
    rhs[-1] = 1.0
    return np.linalg.solve(M, rhs)


def two_clique_fixture() -> BaseTopology:
    """Two 4-cliques {1,2,3,4}, {6,7,8,9} joined by the bridge 1-5-6.

    Stored 0-based; ``labels`` carries the 1-based names.
    """
    c1, c2 = [1, 2, 3, 4], [6, 7, 8, 9]
    edges = [(a, b) for c in (c1, c2) for x, a in enumerate(c) for b in c[x + 1:]]
    edges += [(1, 5), (5, 6)]
    return BaseTopology.from_edges(9, [(u - 1, v - 1) for u, v in edges],
                                   labels=tuple(range(1, 10)))
