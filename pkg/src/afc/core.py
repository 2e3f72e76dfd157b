"""Absorbing-frequency centrality from a kernel: fundamental-matrix solves,
post-initial profiles, the trajectory oracle, and mixture diagnostics."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernel import ABSORBED, AmcKernel
from .realization import substream

SPECTRAL_MARGIN = 1e-12
RESIDUAL_TOL = 1e-9
MIXTURE_TOL = 1e-9
TRAJECTORY_CAP = 10**6


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class AfcProfile:
    b: np.ndarray
    mu: np.ndarray
    expected_T: float

    def top(self, k: int) -> list[int]:
        """Indices of the ``k`` largest entries, ties to the smaller index."""
        return [int(v) for v in np.lexsort((np.arange(len(self.b)), -self.b))[:k]]

    def to_json(self, labels=None, **extra) -> str:
        names = list(labels) if labels is not None else list(range(len(self.b)))
        doc = {"nodes": names, "b": self.b.tolist(), "mu": self.mu.tolist(),
               "expected_T": self.expected_T, **extra}
        return json.dumps(doc, indent=2, sort_keys=True)

    def to_csv(self, labels=None) -> str:
        names = list(labels) if labels is not None else list(range(len(self.b)))
        lines = ["node,b,mu"]
        lines += [f"{names[v]},{self.b[v]!r},{self.mu[v]!r}" for v in range(len(self.b))]
        return "\n".join(lines) + "\n"


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def point_mass(n: int, v: int) -> np.ndarray:
    s = np.zeros(n)
    s[v] = 1.0
    return s


def check_distribution(s, n: int) -> np.ndarray:
    s = np.asarray(s, dtype=float).reshape(-1)
    if len(s) != n:
        raise ValueError(f"initial distribution has length {len(s)}, expected {n}")
    if np.any(s < 0) or abs(s.sum() - 1.0) > 1e-12:
        raise ValueError("initial distribution must be nonnegative and sum to 1")
    return s


def ensure_transient(kernel: AmcKernel) -> None:
    """Raise unless ρ(Q) < 1 - margin."""
    if kernel.r.min() > 0:
        return
    rho = np.abs(np.linalg.eigvals(kernel.Q)).max() if kernel.n else 0.0
    if rho >= 1.0 - SPECTRAL_MARGIN:
        zero = np.flatnonzero(kernel.r <= 0).tolist()
        raise NumericalError(f"I - Q is singular (spectral radius {rho:.12f}); rows with zero leak: {zero}")


def visits(kernel: AmcKernel, s) -> np.ndarray:
    """Expected pre-absorption visits ``mu = s (I - Q)^{-1}`` by a direct solve."""
    s = check_distribution(s, kernel.n)
    ensure_transient(kernel)
    A = np.eye(kernel.n) - kernel.Q.T
    mu = np.linalg.solve(A, s)
    resid = np.abs(A @ mu - s).max()
    if resid > RESIDUAL_TOL:
        raise NumericalError(f"visit solve residual {resid:.3e}")
    return mu


def fundamental_matrix(kernel: AmcKernel) -> np.ndarray:
    ensure_transient(kernel)
    A = np.eye(kernel.n) - kernel.Q
    N = np.linalg.solve(A, np.eye(kernel.n))
    resid = np.abs(A @ N - np.eye(kernel.n)).max()
    if resid > RESIDUAL_TOL:
        raise NumericalError(f"fundamental-matrix residual {resid:.3e}")
    return N


def afc(kernel: AmcKernel, s=None) -> AfcProfile:
    """Absorbing-frequency centrality ``b = sN / sN1`` with visits and E[T]."""
    s = uniform(kernel.n) if s is None else s
    mu = np.clip(visits(kernel, s), 0.0, None)
    total = float(mu.sum())
    return AfcProfile(mu / total, mu, total)


def post_initial_afc(kernel: AmcKernel, s=None) -> np.ndarray:
    """AFC with the initial step excluded: ``(mu - s) / (E[T] - 1)``."""
    s = uniform(kernel.n) if s is None else check_distribution(s, kernel.n)
    prof = afc(kernel, s)
    if prof.expected_T <= 1.0 + 1e-12:
        raise NumericalError("no post-initial steps: E[T] = 1")
    out = (prof.mu - s) / (prof.expected_T - 1.0)
    out[np.abs(out) < 1e-14] = 0.0
    out = np.clip(out, 0.0, None)
    return out / out.sum()


def canonical_kernel(p, alpha: float) -> AmcKernel:
    """Absorb w.p. ``alpha``, else jump to a fresh draw from ``p``."""
    p = np.asarray(p, dtype=float)
    return AmcKernel((1.0 - alpha) * np.outer(np.ones(len(p)), p), np.full(len(p), alpha))


@dataclass(frozen=True)
class MixtureCheck:
    b_mixture: np.ndarray
    p_hat: np.ndarray
    max_row_divergence: float
    applicable: bool


def mixture_check(kernel: AmcKernel, s=None) -> MixtureCheck:
    """Compare the kernel against the two-point mixture ``w0 s + (1-w0) p``.

    ``p_hat`` is the first post-initial survival law ``sQ / sQ1``; under a
    common continuation row it equals that row.  Rows with ``r_i = 1`` have no
    continuation law and are left out of the divergence.
    """
    s = uniform(kernel.n) if s is None else check_distribution(s, kernel.n)
    cond = kernel.conditional_rows()
    live = ~np.isnan(cond[:, 0])
    if not live.any():
        raise NumericalError("every row absorbs with probability 1")
    sq = s @ kernel.Q
    if sq.sum() > 0:
        p_hat = sq / sq.sum()
    else:
        p_hat = cond[live][0]
    div = float(np.abs(cond[live] - p_hat).sum(axis=1).max())
    ET = afc(kernel, s).expected_T
    w0 = 1.0 / ET
    return MixtureCheck(w0 * s + (1 - w0) * p_hat, p_hat, div, div <= MIXTURE_TOL)


def survival_laws(kernel: AmcKernel, s, tail: float = 1e-10, max_steps: int = 100_000):
    """Survival weights ``w_t`` and conditional laws ``pi_t`` (t = 0, 1, ...)
    until the remaining weight ``1 - sum w_t`` falls below ``tail``."""
    s = check_distribution(s, kernel.n)
    ET = afc(kernel, s).expected_T
    weights, laws = [], []
    x = s.copy()
    acc = 0.0
    for _ in range(max_steps):
        mass = x.sum()
        if mass <= 0:
            break
        weights.append(mass / ET)
        laws.append(x / mass)
        acc += mass / ET
        if 1.0 - acc < tail:
            break
        x = x @ kernel.Q
    return np.array(weights), np.array(laws)


Sampler = Callable[[np.ndarray, np.random.Generator], np.ndarray]


def kernel_sampler(kernel: AmcKernel) -> Sampler:
    """Vectorized next-state sampler drawing from the kernel rows."""
    cdf = np.cumsum(kernel.P, axis=1)
    cdf[:, -1] = 1.0
    n = kernel.n

    def step(states, rng):
        u = rng.random(len(states))
        nxt = (u[:, None] >= cdf[states]).sum(axis=1)
        return np.where(nxt >= n, ABSORBED, nxt)

    return step


@dataclass(frozen=True)
class TrajectoryEstimate:
    profile: AfcProfile  # visit-ratio estimate
    profile_se: np.ndarray  # delta-method standard error of profile.b
    uniform_step: np.ndarray  # length-biased uniform-step node law
    uniform_step_se: np.ndarray
    within_path: np.ndarray  # per-path average of visit fractions (biased)
    within_path_se: np.ndarray
    n_traj: int


def simulate_trajectories(sampler: Sampler, s, n: int, n_traj: int, rng: np.random.Generator,
                          reward: Callable | None = None, cap: int = TRAJECTORY_CAP):
    """Run ``n_traj`` absorbed trajectories.

    Returns per-trajectory visit counts ``(n_traj, n)``, lengths, and (when
    ``reward(states, next_states) -> values`` is given) accumulated rewards.
    ``sampler`` may return ``(next_states, step_rewards)`` for simulator-level
    rewards.
    """
    states = rng.choice(n, size=n_traj, p=s)
    counts = np.zeros((n_traj, n))
    lengths = np.zeros(n_traj, dtype=np.int64)
    rewards = np.zeros(n_traj)
    alive = np.arange(n_traj)
    cur = states
    steps = 0
    while len(alive):
        np.add.at(counts, (alive, cur), 1.0)
        lengths[alive] += 1
        out = sampler(cur, rng)
        if isinstance(out, tuple):
            nxt, r = out
            rewards[alive] += r
        else:
            nxt = out
        if reward is not None:
            rewards[alive] += reward(cur, nxt)
        keep = nxt != ABSORBED
        alive = alive[keep]
        cur = nxt[keep]
        steps += 1
        if steps > cap:
            raise NumericalError(f"trajectory exceeded {cap} steps; spectral radius of Q is near 1")
    return counts, lengths, rewards


def ratio_se(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ratio-of-means estimate with delta-method standard error.

    ``num`` is ``(N,)`` or ``(N, d)`` per-trajectory totals, ``den`` is ``(N,)``.
    """
    N = len(den)
    mden = den.mean()
    est = num.sum(axis=0) / den.sum()
    resid = num - (est * den[:, None] if num.ndim == 2 else est * den)
    se = resid.std(axis=0, ddof=1) / (mden * np.sqrt(N)) if N > 1 else np.full_like(est, np.inf)
    return est, se


def simulate_afc(kernel_or_sampler, s=None, n_traj: int = 100_000, seed: int = 0,
                 n: int | None = None, cap: int = TRAJECTORY_CAP) -> TrajectoryEstimate:
    """Monte Carlo AFC from absorbed trajectories.

    Two estimators are returned: total visits over total length, and the node
    at a length-biased uniformly chosen pre-absorption step.  ``within_path``
    is the per-trajectory average ``E[(1/T) sum 1{X_t = v}]``, which is not
    AFC in general and is kept for comparison.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if isinstance(kernel_or_sampler, AmcKernel):
        n = kernel_or_sampler.n
        sampler = kernel_sampler(kernel_or_sampler)
    else:
        if n is None:
            raise ValueError("pass n together with a sampler callable")
        sampler = kernel_or_sampler
    s = uniform(n) if s is None else check_distribution(s, n)
    rng = substream(seed, 0)
    counts, lengths, _ = simulate_trajectories(sampler, s, n, n_traj, rng, cap=cap)
    T = lengths.astype(float)
    b, b_se = ratio_se(counts, T)
    profile = AfcProfile(b, counts.mean(axis=0), float(T.mean()))

    # length-biased path choice, then a uniform step inside the path
    pick_rng = substream(seed, 1)
    paths = pick_rng.choice(n_traj, size=n_traj, p=T / T.sum())
    u = pick_rng.random(n_traj) * T[paths]
    cum = np.cumsum(counts[paths], axis=1)
    nodes = (u[:, None] >= cum).sum(axis=1)
    ustep = np.bincount(nodes, minlength=n) / n_traj
    # path-resampling noise on top of the visit-ratio noise
    ustep_se = np.sqrt(b_se**2 + ustep * (1 - ustep) / n_traj)

    frac = counts / T[:, None]
    within = frac.mean(axis=0)
    within_se = frac.std(axis=0, ddof=1) / np.sqrt(n_traj) if n_traj > 1 else np.full(n, np.inf)
    return TrajectoryEstimate(profile, b_se, ustep, ustep_se, within, within_se, n_traj)
