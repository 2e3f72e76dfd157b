"""Max-entry error of the Monte Carlo kernel against exact enumeration, as a
function of M, next to the Hoeffding radius.  Writes a CSV to stdout."""
import argparse

import numpy as np

from afc.bounds import hoeffding_eps
from afc.graph import two_clique_fixture
from afc.kernel import SummaryCache, estimate_kernel, exact_kernel, sample_rows
from afc.realization import RealizationModel


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--delta", type=float, default=0.01)
    args = ap.parse_args()
    base = two_clique_fixture()
    model = RealizationModel(p_on=0.85, alpha=0.15, k_min=1)
    P = exact_kernel(model, base).P
    cache = SummaryCache(base)
    print("M,mean_err,max_err,hoeffding_eps")
    for M in (30, 60, 100, 300, 1000, 3000, 10000):
        errs = []
        for rep in range(args.reps):
            rows = sample_rows(model, base, M, seed=1, replicate=rep, cache=cache)
            est = estimate_kernel(model, base, M, 1, stabilize_floor=None, replicate=rep, rows=rows)
            errs.append(np.abs(est.kernel.P - P).max())
        print(f"{M},{np.mean(errs):.5f},{np.max(errs):.5f},{hoeffding_eps(M, args.delta, base.n):.5f}")


if __name__ == "__main__":
    main()
