"""Hoeffding sample-size planning and error propagation from the kernel to
AFC.  Natural logarithms; ceilings only at the end."""
from __future__ import annotations

import math


def _check_unit(name, x, closed=False):
    ok = 0 < x <= 1 if closed else 0 < x < 1
    if not ok:
        raise ValueError(f"{name}={x} out of range")


def sample_size_oneshot(eps: float, delta: float, n: int) -> int:
    """Draws so that the one-shot law is within ``eps`` in sup norm w.p. ``1 - delta``."""
    _check_unit("eps", eps, closed=True)
    _check_unit("delta", delta, closed=True)
    return math.ceil(math.log(2 * n / delta) / (2 * eps**2))


def kernel_eps_for_afc(eps_b: float, n: int, r_min: float) -> float:
    """Kernel accuracy ``||Q_hat - Q||_inf`` that guarantees ``||b_hat - b||_1 <= eps_b``."""
    _check_unit("r_min", r_min, closed=True)
    if eps_b <= 0:
        raise ValueError("eps_b must be positive")
    return min(r_min / 2, r_min**2 / (8 * n), eps_b * r_min**2 / (8 * n))


def sample_size_kernel_for_afc(eps_b: float, delta: float, n: int, r_min: float) -> tuple[int, float]:
    """Per-row draws ``M`` and the kernel accuracy ``eps_Q`` they buy."""
    _check_unit("delta", delta, closed=True)
    eps_Q = kernel_eps_for_afc(eps_b, n, r_min)
    M = math.ceil(n**2 / (2 * eps_Q**2) * math.log(2 * n * (n + 1) / delta))
    return M, eps_Q


def hoeffding_eps(M: int, delta: float, n: int) -> float:
    """Entrywise accuracy of an ``M``-draw kernel estimate, union-bounded over
    all ``n(n+1)`` entries."""
    return math.sqrt(math.log(2 * n * (n + 1) / delta) / (2 * M))


def n_perturb_bound(q_err: float, r_min: float) -> float:
    """``||N_hat - N||_inf <= (2 / r_min^2) ||Q_hat - Q||_inf``; needs ``q_err <= r_min / 2``."""
    if q_err > r_min / 2:
        raise ValueError("resolvent bound needs ||Q_hat - Q||_inf <= r_min / 2")
    return 2 * q_err / r_min**2


def b_perturb_bound(q_err: float, n: int, r_min: float) -> float:
    """``||b_hat - b||_1 <= (8n / r_min^2) ||Q_hat - Q||_inf``."""
    return 8 * n * q_err / r_min**2


def planning_table(eps_values, delta_values, n_values, r_values) -> list[dict]:
    rows = []
    for n in n_values:
        for eps in eps_values:
            for delta in delta_values:
                row = {"n": n, "eps": eps, "delta": delta, "M_oneshot": sample_size_oneshot(eps, delta, n)}
                for r in r_values:
                    M, eq = sample_size_kernel_for_afc(eps, delta, n, r)
                    rows.append({**row, "r_min": r, "eps_Q": eq, "M_kernel": M})
    return rows


def format_table(rows: list[dict]) -> str:
    cols = ["n", "eps", "delta", "r_min", "M_oneshot", "eps_Q", "M_kernel"]
    out = ["\t".join(cols)]
    for r in rows:
        out.append("\t".join(f"{r[c]:.6g}" if isinstance(r[c], float) else str(r[c]) for c in cols))
    return "\n".join(out)
