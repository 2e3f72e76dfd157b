"""Run the four built-in reference experiments and print their checks.

    python3 scripts/reproduce_all.py --out results
"""
import argparse
import json
import os
import time

from afc.experiment import reproduce_config, run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--fixtures", default="two_clique,er,ws,lesmis")
    ap.add_argument("--svg", action="store_true")
    args = ap.parse_args()
    for name in args.fixtures.split(","):
        cfg = reproduce_config(name)
        cfg.svg = args.svg
        t0 = time.perf_counter()
        res = run_experiment(cfg, os.path.join(args.out, name))
        print(f"{name:7s} {time.perf_counter() - t0:6.1f}s  {json.dumps(res.checks, sort_keys=True)}")


if __name__ == "__main__":
    main()
