"""One-step stochastic simulator: draws a realized working graph from the base
topology for a given anchor, together with the exogenous stop coin."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .graph import BaseTopology, GraphError, WorkingGraph


class Mode(str, enum.Enum):
    EDGE_BERNOULLI = "edge_bernoulli"
    WEIGHT_RESAMPLE = "weight_resample"
    COMPOSITE = "composite"


@dataclass(frozen=True)
class RealizationModel:
    """Recipe for one random working graph.

    ``rho_mu``/``rho_sigma`` only matter in the weight modes; their defaults are
    placeholders, not calibrated values.
    """

    mode: Mode = Mode.EDGE_BERNOULLI
    p_on: float = 0.85
    alpha: float = 0.15
    k_min: int = 5
    rho_mu: float = 0.2
    rho_sigma: float = 0.1
    w_max: float | None = None
    r_hop: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not 0.0 <= self.p_on <= 1.0:
            raise ValueError(f"p_on={self.p_on} outside [0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha={self.alpha} outside [0, 1]")
        if self.k_min < 1:
            raise ValueError("k_min must be >= 1")
        if self.rho_mu < 0 or self.rho_sigma < 0:
            raise ValueError("rho_mu and rho_sigma must be nonnegative")
        if self.r_hop is not None and self.r_hop < 0:
            raise ValueError("r_hop must be nonnegative")

    @property
    def drops_edges(self) -> bool:
        return self.mode in (Mode.EDGE_BERNOULLI, Mode.COMPOSITE)

    @property
    def resamples_weights(self) -> bool:
        return self.mode in (Mode.WEIGHT_RESAMPLE, Mode.COMPOSITE)

    def weight_cap(self, base: BaseTopology) -> float:
        top = float(base.weights.max()) if base.m else 1.0
        if self.w_max is None:
            return top
        if self.w_max < top:
            raise ValueError(f"w_max={self.w_max} below the largest base weight {top}")
        return float(self.w_max)


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent, reproducible generator for e.g. ``(row, replicate)``."""
    ss = np.random.SeedSequence(int(master_seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def hop_ball_edges(base: BaseTopology, anchor: int, radius: int) -> np.ndarray:
    """Mask of base edges with both endpoints within ``radius`` hops of ``anchor``."""
    d = base.hop_distances([anchor])[0]
    inside = d <= radius
    return inside[base.edges[:, 0]] & inside[base.edges[:, 1]]


@dataclass
class DrawBatch:
    """``M`` draws from one anchor: stop coins, active-edge masks, weights."""

    stopped: np.ndarray  # (M,) bool
    active: np.ndarray  # (M, m) bool
    weights: np.ndarray | None  # (M, m) float, None when weights are fixed

    def graph(self, base: BaseTopology, k: int) -> WorkingGraph:
        mask = self.active[k]
        w = base.weights if self.weights is None else self.weights[k]
        return WorkingGraph.from_arrays(base.n, base.edges[mask], w[mask])


def _resample_weights(model, base, rng, size):
    w0 = base.weights
    w_max = model.weight_cap(base)
    mu = w0 + model.rho_mu * (w_max - w0)
    sd = model.rho_sigma * (w_max - w0)
    x = rng.normal(mu, sd, size=size + (base.m,))
    return np.clip(np.round(x), w0, w_max)


def draw_batch(model: RealizationModel, base: BaseTopology, anchor: int, M: int,
               rng: np.random.Generator, ball: np.ndarray | None = None) -> DrawBatch:
    """Vectorized equivalent of ``M`` calls to :func:`realize`.

    The realized-graph law matches :func:`realize`; only the order in which
    random numbers are consumed differs.
    """
    if not 0 <= anchor < base.n:
        raise GraphError(f"anchor {anchor} out of range")
    stopped = rng.random(M) < model.alpha
    if model.drops_edges:
        active = rng.random((M, base.m)) < model.p_on
    else:
        active = np.ones((M, base.m), dtype=bool)
    if model.r_hop is not None:
        if ball is None:
            ball = hop_ball_edges(base, anchor, model.r_hop)
        active &= ball
    weights = _resample_weights(model, base, rng, (M,)) if model.resamples_weights else None
    return DrawBatch(stopped, active, weights)


def realize(model: RealizationModel, base: BaseTopology, anchor: int,
            rng: np.random.Generator) -> tuple[WorkingGraph | None, bool]:
    """One realization anchored at ``anchor``.

    The stop coin is tossed first; when it lands the graph is not built and
    ``(None, True)`` is returned.  The small-component rule is left to the
    caller.
    """
    if not 0 <= anchor < base.n:
        raise GraphError(f"anchor {anchor} out of range")
    if rng.random() < model.alpha:
        return None, True
    mask = np.ones(base.m, dtype=bool)
    if model.drops_edges:
        # edges revealed one by one
        for e in range(base.m):
            mask[e] = rng.random() < model.p_on
    if model.r_hop is not None:
        mask &= hop_ball_edges(base, anchor, model.r_hop)
    w = _resample_weights(model, base, rng, ()) if model.resamples_weights else base.weights
    return WorkingGraph.from_arrays(base.n, base.edges[mask], w[mask]), False
