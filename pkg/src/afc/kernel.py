"""Absorbing Markov chain kernels on V ∪ {⊥}: the one-step sampler, row-wise
Monte Carlo estimation, exact enumeration over edge subsets, stabilization and
serialization."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graph import BaseTopology, GraphSummary, WorkingGraph, local_center
from .realization import Mode, RealizationModel, draw_batch, hop_ball_edges, realize, substream

ABSORBED = -1
ROW_ATOL = 1e-12
DEFAULT_FLOOR = 1e-6
MAX_ENUM_EDGES = 20


class KernelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AmcKernel:
    """Transient block ``Q`` (n x n) and leak vector ``r`` with ``Q1 + r = 1``."""

    Q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        r = np.array(self.r, dtype=float).reshape(-1)
        n = len(r)
        if Q.shape != (n, n):
            raise KernelError(f"Q has shape {Q.shape}, expected {(n, n)}")
        if np.any(Q < -ROW_ATOL) or np.any(Q > 1 + ROW_ATOL) or np.any(r < -ROW_ATOL) or np.any(r > 1 + ROW_ATOL):
            raise KernelError("kernel entries must lie in [0, 1]")
        dev = np.abs(Q.sum(axis=1) + r - 1.0)
        if np.any(dev > ROW_ATOL):
            bad = np.flatnonzero(dev > ROW_ATOL)
            raise KernelError(f"rows {bad.tolist()} do not sum to 1 (max deviation {dev.max():.3e})")
        Q.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "r", r)

    @classmethod
    def from_transient(cls, Q) -> "AmcKernel":
        Q = np.asarray(Q, dtype=float)
        return cls(Q, 1.0 - Q.sum(axis=1))

    @classmethod
    def from_matrix(cls, P) -> "AmcKernel":
        """From the ``n x (n+1)`` block ``[Q | r]`` (the ⊥ row is implicit)."""
        P = np.asarray(P, dtype=float)
        return cls(P[:, :-1], P[:, -1])

    @property
    def n(self) -> int:
        return len(self.r)

    @property
    def P(self) -> np.ndarray:
        return np.hstack([self.Q, self.r[:, None]])

    def full_matrix(self) -> np.ndarray:
        """The ``(n+1) x (n+1)`` matrix including the absorbing row."""
        out = np.zeros((self.n + 1, self.n + 1))
        out[:-1] = self.P
        out[-1, -1] = 1.0
        return out

    def conditional_rows(self) -> np.ndarray:
        """Rows ``Q_i. / (1 - r_i)``; NaN rows where ``r_i = 1``."""
        surv = 1.0 - self.r
        out = np.full_like(self.Q, np.nan)
        ok = surv > 0
        out[ok] = self.Q[ok] / surv[ok, None]
        return out

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.P).tobytes()).hexdigest()

    def to_csv(self, path=None, labels=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(labels) if labels is not None else list(range(self.n))
        w.writerow(["node", *names, "absorbed"])
        for i, row in enumerate(self.P):
            w.writerow([names[i], *(repr(float(x)) for x in row)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "AmcKernel":
        with open(path) as fh:
            rows = list(csv.reader(fh))
        return cls.from_matrix(np.array([[float(x) for x in row[1:]] for row in rows[1:]]))


@dataclass(frozen=True)
class Stabilization:
    floor: float
    rows: tuple[int, ...]  # rows whose zero leak was raised to ``floor``


def stabilize(kernel: AmcKernel, floor: float = DEFAULT_FLOOR) -> tuple[AmcKernel, Stabilization]:
    """Raise zero leaks to ``floor`` and shrink those transient rows by ``1 - floor``."""
    Q = kernel.Q.copy()
    r = kernel.r.copy()
    rows = np.flatnonzero(r <= 0.0)
    Q[rows] *= 1.0 - floor
    r[rows] = 1.0 - Q[rows].sum(axis=1)
    return AmcKernel(Q, r), Stabilization(floor, tuple(int(i) for i in rows))


def sample_next(i: int, model: RealizationModel, base: BaseTopology, rng: np.random.Generator) -> int:
    """One AMC step from anchor ``i``: the local center, or ``ABSORBED``."""
    H, stopped = realize(model, base, i, rng)
    if stopped:
        return ABSORBED
    c = local_center(i, H, model.k_min)
    return ABSORBED if c is None else c


class SummaryCache:
    """Memo of :class:`GraphSummary` keyed by the realized edge set/weights.

    Realizations are deterministic functions of their key, so sharing the
    cache across rows or threads never changes results.
    """

    def __init__(self, base: BaseTopology):
        self.base = base
        self._store: dict = {}

    def __len__(self):
        return len(self._store)

    def get(self, key, build: Callable[[], WorkingGraph]) -> GraphSummary:
        s = self._store.get(key)
        if s is None:
            s = GraphSummary(build())
            self._store[key] = s
        return s


@dataclass
class RowSample:
    """The ``M`` simulator draws for one anchor, grouped by distinct realization."""

    anchor: int
    stopped: np.ndarray  # (M,) bool
    inverse: np.ndarray  # (M,) index into ``summaries``; -1 where stopped
    summaries: list[GraphSummary]

    @property
    def M(self) -> int:
        return len(self.stopped)

    def per_draw(self, fn: Callable[[GraphSummary], object], stopped_value, dtype=float) -> np.ndarray:
        """Evaluate ``fn`` once per distinct realization and broadcast to draws."""
        vals = np.array([fn(s) for s in self.summaries] + [stopped_value], dtype=dtype)
        return vals[self.inverse]

    def next_states(self, k_min: int) -> np.ndarray:
        i = self.anchor

        def nxt(s):
            c = s.center(i, k_min)
            return ABSORBED if c is None else c

        return self.per_draw(nxt, ABSORBED, dtype=np.int64)


def _draw_keys(batch, m):
    if batch.weights is None and m <= 62:
        return batch.active.astype(np.int64) @ (np.int64(1) << np.arange(m, dtype=np.int64))
    packed = np.packbits(batch.active, axis=1)
    if batch.weights is not None:
        packed = np.hstack([packed, np.ascontiguousarray(batch.weights).view(np.uint8)])
    return [row.tobytes() for row in packed]


def sample_row(model: RealizationModel, base: BaseTopology, i: int, M: int,
               rng: np.random.Generator, cache: SummaryCache | None = None) -> RowSample:
    cache = cache if cache is not None else SummaryCache(base)
    batch = draw_batch(model, base, i, M, rng)
    keys = _draw_keys(batch, base.m)
    live = np.flatnonzero(~batch.stopped)
    inverse = np.full(M, -1, dtype=np.int64)
    summaries: list[GraphSummary] = []
    slot: dict = {}
    for k in live:
        key = keys[k] if not isinstance(keys, np.ndarray) else int(keys[k])
        j = slot.get(key)
        if j is None:
            j = len(summaries)
            slot[key] = j
            summaries.append(cache.get(key, lambda k=k: batch.graph(base, k)))
        inverse[k] = j
    return RowSample(i, batch.stopped, inverse, summaries)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("AFC_THREADS", "1")))
    except ValueError:
        return 1


def sample_rows(model: RealizationModel, base: BaseTopology, M: int, seed: int,
                replicate: int = 0, cache: SummaryCache | None = None) -> list[RowSample]:
    """``M`` draws for every anchor; row ``i`` uses substream ``(i, replicate)``."""
    if M < 1:
        raise KernelError("M must be >= 1")
    cache = cache if cache is not None else SummaryCache(base)

    def one(i):
        return sample_row(model, base, i, M, substream(seed, i, replicate), cache)

    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, range(base.n)))
    return [one(i) for i in range(base.n)]


def counts_to_kernel(states: np.ndarray, n: int) -> AmcKernel:
    """Empirical row law from an ``(n, M)`` array of next states."""
    M = states.shape[1]
    P = np.zeros((n, n + 1))
    for i, row in enumerate(states):
        P[i] = np.bincount(np.where(row == ABSORBED, n, row), minlength=n + 1) / M
    P[:, -1] = 1.0 - P[:, :-1].sum(axis=1)
    return AmcKernel.from_matrix(P)


@dataclass
class KernelEstimate:
    kernel: AmcKernel
    raw: AmcKernel
    M: int
    seed: int
    replicate: int
    stabilization: Stabilization | None
    rows: list[RowSample] = field(repr=False, default_factory=list)


def estimate_kernel(model: RealizationModel, base: BaseTopology, M: int, seed: int,
                    stabilize_floor: float | None = DEFAULT_FLOOR, replicate: int = 0,
                    rows: list[RowSample] | None = None) -> KernelEstimate:
    """Row-wise Monte Carlo estimate of the AMC kernel.

    Pass ``stabilize_floor=None`` to keep the raw empirical kernel.  The row
    draws are kept on the result so rewards and constrained selectors can be
    evaluated on the same samples.
    """
    if rows is None:
        rows = sample_rows(model, base, M, seed, replicate)
    states = np.vstack([row.next_states(model.k_min) for row in rows])
    raw = counts_to_kernel(states, base.n)
    if stabilize_floor is None:
        return KernelEstimate(raw, raw, M, seed, replicate, None, rows)
    kern, record = stabilize(raw, stabilize_floor)
    return KernelEstimate(kern, raw, M, seed, replicate, record, rows)


class ExactLaw:
    """Exact realized-graph law under independent edge retention, by
    enumerating all ``2^|E|`` edge subsets."""

    def __init__(self, model: RealizationModel, base: BaseTopology):
        if model.mode is not Mode.EDGE_BERNOULLI:
            raise KernelError("exact enumeration needs the edge-Bernoulli model")
        if base.m > MAX_ENUM_EDGES:
            raise KernelError(f"{base.m} edges exceed the enumeration cap of {MAX_ENUM_EDGES}")
        self.model = model
        self.base = base
        m = base.m
        subsets = np.arange(2**m, dtype=np.int64)
        self.active = ((subsets[:, None] >> np.arange(m)) & 1).astype(bool)
        size = self.active.sum(axis=1)
        p = model.p_on
        self.probs = p**size * (1.0 - p) ** (m - size)
        self._cache = SummaryCache(base)
        self._rows: dict[int, list[GraphSummary]] = {}

    def summaries(self, i: int) -> list[GraphSummary]:
        """Realization summaries seen from anchor ``i``, aligned with ``probs``."""
        got = self._rows.get(i)
        if got is not None:
            return got
        base = self.base
        active = self.active
        if self.model.r_hop is not None:
            active = active & hop_ball_edges(base, i, self.model.r_hop)
        keys = active.astype(np.int64) @ (np.int64(1) << np.arange(base.m, dtype=np.int64)) if base.m else np.zeros(len(active), np.int64)
        out = []
        for mask, key in zip(active, keys):
            out.append(self._cache.get(int(key), lambda mask=mask: WorkingGraph.from_arrays(
                base.n, base.edges[mask], base.weights[mask])))
        self._rows[i] = out
        return out

    def expect(self, i: int, fn: Callable[[GraphSummary], float]) -> float:
        """``E_i[fn(H) ; not stopped]``: the stop coin contributes zero."""
        vals = np.array([fn(s) for s in self.summaries(i)], dtype=float)
        return (1.0 - self.model.alpha) * float(self.probs @ vals)

    def row_law(self, i: int, select: Callable[[GraphSummary], int | None]) -> np.ndarray:
        """Exact law of ``select`` over V ∪ {⊥}; ``None`` means ⊥."""
        n = self.base.n
        row = np.zeros(n + 1)
        for prob, s in zip(self.probs, self.summaries(i)):
            j = select(s)
            if j is not None:
                row[j] += prob
        row[:n] *= 1.0 - self.model.alpha
        row[n] = 1.0 - row[:n].sum()
        return row

    def kernel(self, select_for: Callable[[int], Callable[[GraphSummary], int | None]]) -> AmcKernel:
        return AmcKernel.from_matrix(np.vstack([self.row_law(i, select_for(i)) for i in range(self.base.n)]))

    def tabulate(self, i: int, select: Callable[[GraphSummary], int | None]) -> np.ndarray:
        """Outcome of ``select`` for every edge subset (``ABSORBED`` for ⊥)."""
        return np.array([ABSORBED if (c := select(s)) is None else c for s in self.summaries(i)], dtype=np.int64)


def exact_kernel(model: RealizationModel, base: BaseTopology, law: ExactLaw | None = None) -> AmcKernel:
    """Exact AMC kernel by edge-subset enumeration (``|E| <= 20``)."""
    law = law if law is not None else ExactLaw(model, base)
    k_min = model.k_min
    return law.kernel(lambda i: (lambda s: s.center(i, k_min)))


def kernel_envelope(est: KernelEstimate, model: RealizationModel, extra: dict | None = None) -> dict:
    """JSON-ready metadata accompanying ``kernel.csv``."""
    env = {
        "n": est.kernel.n,
        "columns": "n transient targets followed by the absorbing state",
        "model": {k: (v.value if isinstance(v, Mode) else v) for k, v in model.__dict__.items()},
        "seed": est.seed,
        "replicate": est.replicate,
        "M": est.M,
        "stabilization": None if est.stabilization is None else {
            "floor": est.stabilization.floor, "rows": list(est.stabilization.rows)},
        "sha256": est.kernel.digest(),
    }
    if extra:
        env.update(extra)
    return env


def write_kernel(est: KernelEstimate, model: RealizationModel, directory, labels=None, extra=None):
    os.makedirs(directory, exist_ok=True)
    est.kernel.to_csv(os.path.join(directory, "kernel.csv"), labels)
    with open(os.path.join(directory, "kernel.json"), "w") as fh:
        json.dump(kernel_envelope(est, model, extra), fh, indent=2, sort_keys=True)
