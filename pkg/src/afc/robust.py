"""Row-wise perturbation analysis of an AMC kernel.

Uncertainty sets are boxes around the nominal transient entries with a
per-row leak floor.  Everything here is sampling based or closed form; no
robust optimization over the full set is attempted.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .core import afc, check_distribution, fundamental_matrix, survival_laws, uniform
from .graph import BaseTopology
from .kernel import AmcKernel, KernelError
from .realization import substream

KL_PSEUDOCOUNT = 1e-12


class InfeasibleRow(KernelError):
    def __init__(self, row: int, msg: str):
        super().__init__(f"row {row}: {msg}")
        self.row = row


@dataclass(frozen=True, eq=False)
class UncertaintySet:
    """Box ``[lower, upper]`` on each transient entry plus leak floors.

    Built with :meth:`additive` (radii ``eps``) or :meth:`relative`
    (``Q0 * [1 - delta, 1 + delta]`` clipped to [0, 1]).
    """

    nominal: AmcKernel
    lower: np.ndarray
    upper: np.ndarray
    leak_floor: np.ndarray
    delta_rel: float | None = None

    def __post_init__(self):
        cap = 1.0 - self.leak_floor
        slack = cap - self.lower.sum(axis=1)
        bad = np.flatnonzero(slack < -1e-12)
        if len(bad):
            raise InfeasibleRow(int(bad[0]), "lower bounds exceed 1 - leak floor")
        if np.any(self.leak_floor <= 0) or np.any(self.leak_floor > 1):
            raise ValueError("leak floors must lie in (0, 1]")

    @classmethod
    def additive(cls, nominal: AmcKernel, eps, leak_floor) -> "UncertaintySet":
        eps = np.broadcast_to(np.asarray(eps, dtype=float), nominal.Q.shape)
        if np.any(eps < 0):
            raise ValueError("radii must be nonnegative")
        Q0 = nominal.Q
        floor = np.broadcast_to(np.asarray(leak_floor, dtype=float), (nominal.n,)).copy()
        return cls(nominal, np.clip(Q0 - eps, 0.0, None), np.minimum(Q0 + eps, 1.0), floor)

    @classmethod
    def relative(cls, nominal: AmcKernel, delta_rel: float, leak_floor) -> "UncertaintySet":
        if not 0 <= delta_rel <= 1:
            raise ValueError("delta_rel must lie in [0, 1]")
        Q0 = nominal.Q
        floor = np.broadcast_to(np.asarray(leak_floor, dtype=float), (nominal.n,)).copy()
        return cls(nominal, np.clip(Q0 * (1 - delta_rel), 0.0, 1.0),
                   np.clip(Q0 * (1 + delta_rel), 0.0, 1.0), floor, delta_rel)

    @property
    def eps(self) -> np.ndarray:
        Q0 = self.nominal.Q
        return np.maximum(Q0 - self.lower, self.upper - Q0)

    @property
    def eps_bar(self) -> float:
        """``max_i sum_j eps_ij``, an upper bound on ``||Q - Q0||_inf``."""
        return float(self.eps.sum(axis=1).max())

    @property
    def r_min(self) -> float:
        return float(self.leak_floor.min())

    def contains_nominal(self) -> bool:
        return bool(np.all(self.nominal.r >= self.leak_floor - 1e-15))


def _shrink_to_cap(q, lower, cap):
    """Pull rows with ``sum q > cap`` toward ``lower`` until they hit ``cap``.

    Stays inside the box, unlike plain proportional rescaling.
    """
    tot = q.sum(axis=1)
    over = tot > cap
    if not over.any():
        return q
    q = q.copy()
    lo = lower[over]
    lam = (cap[over] - lo.sum(axis=1)) / (tot[over] - lo.sum(axis=1))
    q[over] = lo + (q[over] - lo) * lam[:, None]
    return q


def sample_admissible(uset: UncertaintySet, rng: np.random.Generator) -> AmcKernel:
    """One kernel from the uncertainty set with every leak ``>= leak_floor``."""
    Q0 = uset.nominal.Q
    if uset.delta_rel is not None:
        factor = rng.uniform(1 - uset.delta_rel, 1 + uset.delta_rel, size=Q0.shape)
        q = np.clip(Q0 * factor, 0.0, 1.0)
    else:
        q = uset.lower + (uset.upper - uset.lower) * rng.random(Q0.shape)
    cap = 1.0 - uset.leak_floor
    q = _shrink_to_cap(q, uset.lower, cap)
    same = np.all(q == Q0, axis=1)
    r = np.where(same, uset.nominal.r, np.maximum(1.0 - q.sum(axis=1), uset.leak_floor))
    return AmcKernel(q, r)


@dataclass(frozen=True, eq=False)
class GroundMetric:
    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("ground metric must be square")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("ground metric entries must be finite and nonnegative")
        if not np.allclose(d, d.T) or np.any(np.diag(d) != 0):
            raise ValueError("ground metric must be symmetric with zero diagonal")
        # d[i,k] <= d[i,j] + d[j,k] for all triples
        viol = (d[:, None, :] > d[:, :, None] + d[None, :, :] + 1e-9).any()
        if viol:
            raise ValueError("ground metric violates the triangle inequality")
        object.__setattr__(self, "d", d)

    @classmethod
    def from_graph(cls, base: BaseTopology, weighted: bool = True) -> "GroundMetric":
        """Shortest-path distances on the base topology.

        Pairs in different components get ``max finite distance + 1``, which
        keeps the triangle inequality.
        """
        w = base.weights if weighted else np.ones(base.m)
        A = coo_matrix((w, (base.edges[:, 0], base.edges[:, 1])), shape=(base.n, base.n)).tocsr()
        d = shortest_path(A, directed=False)
        finite = d[np.isfinite(d)]
        d[~np.isfinite(d)] = (finite.max() if finite.size else 0.0) + 1.0
        return cls(d)

    @property
    def diameter(self) -> float:
        return float(self.d.max())


class Metric(str, enum.Enum):
    KL = "kl"
    W1 = "w1"
    TV = "tv"
    L1 = "l1"


def kl_divergence(p, q, pseudocount: float = KL_PSEUDOCOUNT) -> float:
    """``KL(p || q)`` after adding ``pseudocount`` to both and renormalizing."""
    p = np.asarray(p, dtype=float) + pseudocount
    q = np.asarray(q, dtype=float) + pseudocount
    p /= p.sum()
    q /= q.sum()
    return float(np.sum(p * np.log(p / q)))


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def wasserstein1(x, y, ground: GroundMetric) -> float:
    """Exact W1 between two distributions, as a transportation LP.

    Only the surplus ``(x - y)_+`` has to move to the deficit ``(y - x)_+``,
    which keeps the LP small.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    src = np.flatnonzero(diff > 0)
    dst = np.flatnonzero(diff < 0)
    if len(src) == 0 or len(dst) == 0:
        return 0.0
    supply = diff[src]
    demand = -diff[dst]
    demand *= supply.sum() / demand.sum()
    ns, nd = len(src), len(dst)
    cost = ground.d[np.ix_(src, dst)].ravel()
    rows = np.concatenate([np.repeat(np.arange(ns), nd), ns + np.tile(np.arange(nd), ns)])
    cols = np.concatenate([np.arange(ns * nd), np.arange(ns * nd)])
    A = coo_matrix((np.ones(2 * ns * nd), (rows, cols)), shape=(ns + nd, ns * nd)).tocsr()
    res = linprog(cost, A_eq=A, b_eq=np.concatenate([supply, demand]), bounds=(0, None), method="highs")
    if res.status != 0:
        raise ArithmeticError(f"transport LP failed: {res.message}")
    return float(res.fun)


def discrepancy(metric, b, b0, ground: GroundMetric | None = None) -> float:
    metric = Metric(metric)
    if metric is Metric.KL:
        return kl_divergence(b, b0)
    if metric is Metric.W1:
        if ground is None:
            raise ValueError("W1 needs a ground metric")
        return wasserstein1(b, b0, ground)
    if metric is Metric.TV:
        return total_variation(b, b0)
    return float(np.abs(np.asarray(b) - np.asarray(b0)).sum())


@dataclass(frozen=True, eq=False)
class AdversarialResult:
    metric: Metric
    worst_kernel: AmcKernel
    worst_b: np.ndarray
    discrepancy: float
    index: int
    discrepancies: np.ndarray
    b_min: np.ndarray  # sampled envelope
    b_max: np.ndarray
    n_samples: int


def adversarial_search(uset: UncertaintySet, s=None, metric="kl", n_samples: int = 100,
                       seed: int = 0, ground: GroundMetric | None = None) -> AdversarialResult:
    """Sample admissible kernels and keep the one whose AFC is farthest from
    the nominal AFC (``KL(b || b0)`` or ``W1(b, b0)``).  Ties go to the
    earliest sample."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    metric = Metric(metric)
    n = uset.nominal.n
    s = uniform(n) if s is None else check_distribution(s, n)
    b0 = afc(uset.nominal, s).b
    best = None
    scores = np.empty(n_samples)
    lo = np.full(n, np.inf)
    hi = np.full(n, -np.inf)
    for k in range(n_samples):
        P = sample_admissible(uset, substream(seed, k))
        b = afc(P, s).b
        lo = np.minimum(lo, b)
        hi = np.maximum(hi, b)
        scores[k] = discrepancy(metric, b, b0, ground)
        if best is None or scores[k] > scores[best[0]]:
            best = (k, P, b)
    k, P, b = best
    return AdversarialResult(metric, P, b, float(scores[k]), k, scores, lo, hi, n_samples)


class Certificate(str, enum.Enum):
    ROBUST_U = "robust_u"
    ROBUST_V = "robust_v"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class VisitGap:
    gap: float
    certificate: Certificate
    bound: float


def visit_gap(kernel_or_uset, s, u: int, v: int) -> VisitGap:
    """Nominal visit gap ``mu_u - mu_v`` and the ordering certificate.

    With an uncertainty set the bound is ``2 eps_bar / r_min^2``; with a bare
    kernel there is no uncertainty and the bound is 0.
    """
    if u == v:
        raise ValueError("u and v must differ")
    if isinstance(kernel_or_uset, UncertaintySet):
        kernel = kernel_or_uset.nominal
        bound = 2.0 * kernel_or_uset.eps_bar / kernel_or_uset.r_min**2
    else:
        kernel = kernel_or_uset
        bound = 0.0
    s = uniform(kernel.n) if s is None else s
    mu = afc(kernel, s).mu
    gap = float(mu[u] - mu[v])
    if gap > bound:
        cert = Certificate.ROBUST_U
    elif gap < -bound:
        cert = Certificate.ROBUST_V
    else:
        cert = Certificate.INCONCLUSIVE
    return VisitGap(gap, cert, bound)


def first_order_sensitivity(nominal: AmcKernel, E, s=None):
    """First-order change of AFC under ``Q -> Q + E`` next to the exact change.

    Returns ``(delta_b_approx, delta_b_exact)``.
    """
    E = np.asarray(E, dtype=float)
    n = nominal.n
    s = uniform(n) if s is None else check_distribution(s, n)
    Q = nominal.Q + E
    if np.any(Q < -1e-15) or np.any(Q.sum(axis=1) > 1 + 1e-12):
        raise KernelError("perturbed kernel leaves the admissible region")
    N0 = fundamental_matrix(nominal)
    if np.abs(N0 @ E).sum(axis=1).max() >= 1:
        raise ValueError("perturbation too large: ||N0 E||_inf >= 1")
    mu0 = s @ N0
    T0 = mu0.sum()
    b0 = mu0 / T0
    dmu = s @ N0 @ E @ N0
    approx = dmu / T0 - b0 * dmu.sum() / T0
    perturbed = AmcKernel(np.clip(Q, 0.0, None), np.clip(1.0 - np.clip(Q, 0.0, None).sum(axis=1), 0.0, None))
    exact = afc(perturbed, s).b - b0
    return approx, exact


def _metric_value(metric, p, q, ground):
    if isinstance(metric, GroundMetric):
        return wasserstein1(p, q, metric)
    return discrepancy(metric, p, q, ground)


def mixture_proxy_deviation(kernel: AmcKernel, s, p_bar, metric="tv", ground: GroundMetric | None = None):
    """Distance between AFC and the proxy ``w0 s + (1 - w0) p_bar`` and the
    survival-weighted bound ``sum_{t>=1} w_t metric(pi_t, p_bar)``.

    ``metric`` is ``"tv"``, ``"l1"``, ``"w1"`` (with ``ground``) or a
    :class:`GroundMetric`.  The series is truncated once the remaining
    survival weight is below 1e-10; that remainder times the metric's range is
    added so the bound stays valid.
    """
    if not isinstance(metric, GroundMetric) and Metric(metric) is Metric.KL:
        raise ValueError("KL is not an integral probability metric")
    s = uniform(kernel.n) if s is None else check_distribution(s, kernel.n)
    p_bar = check_distribution(p_bar, kernel.n)
    prof = afc(kernel, s)
    w0 = 1.0 / prof.expected_T
    proxy = w0 * s + (1 - w0) * p_bar
    dev = _metric_value(metric, prof.b, proxy, ground)
    weights, laws = survival_laws(kernel, s)
    bound = sum(w * _metric_value(metric, pi, p_bar, ground) for w, pi in zip(weights[1:], laws[1:]))
    if isinstance(metric, GroundMetric):
        spread = metric.diameter
    elif Metric(metric) is Metric.W1:
        spread = ground.diameter
    else:
        spread = 2.0 if Metric(metric) is Metric.L1 else 1.0
    bound += max(0.0, 1.0 - weights.sum()) * spread
    return proxy, float(dev), float(bound)
