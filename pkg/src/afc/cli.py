"""Command-line entry point: ``afc <subcommand>``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .bounds import format_table, planning_table
from .core import NumericalError, afc, check_distribution, uniform
from .experiment import ConfigError, ExperimentConfig, load_config, reproduce_config, run_experiment
from .graph import GraphError
from .io import GraphParseError, erdos_renyi, ingest_graph, watts_strogatz, write_edge_list
from .kernel import AmcKernel, KernelError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _floats(text):
    return [float(x) for x in text.split(",")]


def _ints(text):
    return [int(x) for x in text.split(",")]


def cmd_generate(a):
    if a.kind == "er":
        g = erdos_renyi(a.n, a.p, a.seed)
    else:
        g = watts_strogatz(a.n, a.ring_degree, a.rewire_p, a.seed)
    write_edge_list(g, a.out)
    print(json.dumps({"n": g.n, "m": g.m, "out": a.out}))


def cmd_ingest(a):
    g = ingest_graph(a.path, a.format)
    info = {"n": g.n, "m": g.m,
            "w_min": float(g.weights.min()) if g.m else None,
            "w_max": float(g.weights.max()) if g.m else None}
    if a.out:
        write_edge_list(g, a.out)
        info["out"] = a.out
    print(json.dumps(info))


def _run_analysis(a, analyses):
    cfg = load_config(a.config)
    if analyses is not None:
        cfg.analyses = analyses
    res = run_experiment(cfg, a.out)
    print(json.dumps({"out": res.outdir, "kernel_sha256": res.kernel_sha256, "checks": res.checks},
                     sort_keys=True))


def cmd_afc(a):
    if a.kernel:
        K = AmcKernel.from_csv(a.kernel)
        s = uniform(K.n) if a.initial is None else check_distribution(_floats(a.initial), K.n)
        prof = afc(K, s)
        os.makedirs(a.out, exist_ok=True)
        with open(os.path.join(a.out, "afc.json"), "w") as fh:
            fh.write(prof.to_json(kernel_sha256=K.digest()) + "\n")
        with open(os.path.join(a.out, "afc.csv"), "w") as fh:
            fh.write(prof.to_csv())
        print(json.dumps({"top": prof.top(min(10, K.n)), "expected_T": prof.expected_T}))
    elif a.config:
        _run_analysis(a, ["baseline"])
    else:
        raise ConfigError("afc needs --kernel or --config")


def cmd_bounds(a):
    rows = planning_table(_floats(a.eps), _floats(a.delta), _ints(a.n), _floats(a.r_min))
    print(format_table(rows))


def cmd_reproduce(a):
    cfg = reproduce_config(a.fixture)
    if a.seed is not None:
        cfg.seed = a.seed
        cfg.graph.seed = a.seed
    cfg.svg = a.svg
    res = run_experiment(cfg, a.out)
    print(json.dumps({"out": res.outdir, "kernel_sha256": res.kernel_sha256, "checks": res.checks},
                     sort_keys=True))


def cmd_run(a):
    _run_analysis(a, None)


def cmd_init(a):
    """Write a config file with every default spelled out."""
    import dataclasses

    cfg = ExperimentConfig()
    lines = []

    def emit(obj, section):
        scalars = {k: v for k, v in dataclasses.asdict(obj).items()
                   if not dataclasses.is_dataclass(getattr(obj, k))}
        if section:
            lines.append(f"\n[{section}]")
        for k, v in scalars.items():
            if v is None:
                lines.append(f"# {k} = (unset)")
            else:
                lines.append(f"{k} = {json.dumps(v)}")

    emit(cfg, "")
    for sec in ("graph", "model", "robust", "reward", "constrained"):
        emit(getattr(cfg, sec), sec)
    text = "\n".join(lines) + "\n"
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="afc", description="Absorbing-frequency centrality on stochastic networks")
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", help="write a random graph as an edge list")
    g.add_argument("kind", choices=["er", "ws"])
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--p", type=float, default=0.08)
    g.add_argument("--ring-degree", type=int, default=6)
    g.add_argument("--rewire-p", type=float, default=0.10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--out", required=True)
    g.set_defaults(fn=cmd_generate)

    g = sub.add_parser("ingest", help="parse an edge list or GML file and report its shape")
    g.add_argument("path")
    g.add_argument("--format", choices=["edge_list", "gml"])
    g.add_argument("-o", "--out", help="also write it as an edge list")
    g.set_defaults(fn=cmd_ingest)

    for name, analyses, text in (("kernel", [], "estimate the kernel only"),
                                 ("robust", ["robust"], "adversarial kernel search"),
                                 ("reward", ["reward"], "reward-weighted AFC"),
                                 ("constrained", ["constrained"], "pool-constrained kernels")):
        g = sub.add_parser(name, help=text)
        g.add_argument("--config", required=True)
        g.add_argument("-o", "--out", required=True)
        g.set_defaults(fn=lambda a, an=analyses: _run_analysis(a, an))

    g = sub.add_parser("afc", help="AFC from a kernel.csv or a config")
    g.add_argument("--kernel")
    g.add_argument("--config")
    g.add_argument("--initial", help="comma-separated initial distribution (default uniform)")
    g.add_argument("-o", "--out", required=True)
    g.set_defaults(fn=cmd_afc)

    g = sub.add_parser("bounds", help="sample-size planning table")
    g.add_argument("--eps", default="0.05,0.1")
    g.add_argument("--delta", default="0.05")
    g.add_argument("--n", default="100")
    g.add_argument("--r-min", default="0.15")
    g.set_defaults(fn=cmd_bounds)

    g = sub.add_parser("reproduce", help="run a built-in reference experiment")
    g.add_argument("fixture", choices=["fig1", "two_clique", "er", "ws", "lesmis"])
    g.add_argument("--seed", type=int)
    g.add_argument("--svg", action="store_true")
    g.add_argument("-o", "--out", required=True)
    g.set_defaults(fn=cmd_reproduce)

    g = sub.add_parser("run", help="run a TOML config or re-run a manifest.json")
    g.add_argument("config")
    g.add_argument("-o", "--out", required=True)
    g.set_defaults(fn=cmd_run)

    g = sub.add_parser("init", help="print a config with all defaults")
    g.add_argument("-o", "--out")
    g.set_defaults(fn=cmd_init)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, GraphParseError, GraphError, KernelError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
