"""Experiment configuration and the end-to-end runner.

The kernel is estimated once per run; every analysis reads the same kernel
(and the same row draws) and records its sha256.
"""
from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np
import tomli

from .bounds import hoeffding_eps
from .constrained import (PoolMode, build_constrained_kernel, enumerate_clique_pool, pool_report,
                          pool_statistics)
from .core import afc, check_distribution, post_initial_afc, uniform
from .graph import BaseTopology, betweenness, random_walk_stationary, two_clique_fixture
from .io import erdos_renyi, ingest_graph, les_miserables, watts_strogatz
from .kernel import estimate_kernel, kernel_envelope
from .realization import Mode, RealizationModel
from .reward import (RewardSpec, estimate_psi, improvement_eta, reward_f_from_hubs, reward_report,
                     switching_eta, transition_psi)
from .robust import GroundMetric, UncertaintySet, adversarial_search, visit_gap

ANALYSES = ("baseline", "robust", "reward", "constrained")


class ConfigError(ValueError):
    pass


@dataclass
class GraphConfig:
    kind: str = "er"  # er | ws | file | two_clique | lesmis
    n: int = 100
    p: float = 0.08
    ring_degree: int = 6
    rewire_p: float = 0.10
    path: str | None = None
    format: str | None = None
    seed: int = 0


@dataclass
class ModelConfig:
    mode: str = "edge_bernoulli"
    p_on: float = 0.85
    alpha: float = 0.15
    k_min: int = 5
    rho_mu: float = 0.2
    rho_sigma: float = 0.1
    w_max: float | None = None
    r_hop: int | None = None

    def build(self) -> RealizationModel:
        return RealizationModel(Mode(self.mode), self.p_on, self.alpha, self.k_min, self.rho_mu,
                                self.rho_sigma, self.w_max, self.r_hop)


@dataclass
class RobustConfig:
    delta_rel: float = 0.5
    r_min: float = 0.05
    n_samples: int = 100
    metrics: list = field(default_factory=lambda: ["kl", "w1"])
    seed: int = 0
    pairs: list = field(default_factory=list)  # node pairs for visit-gap certificates
    top: int = 5


@dataclass
class RewardConfig:
    n_hubs: int = 3
    levels: list = field(default_factory=lambda: [10.0, 10.0, 10.0])
    beta: float = 0.6
    k: int = 5


@dataclass
class ConstrainedConfig:
    S: int = 8
    mode: str = "fallback"
    k: int = 5


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    graph: GraphConfig = field(default_factory=GraphConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    M: int = 60
    seed: int = 0
    initial: object = "uniform"  # "uniform" or a list of probabilities
    stabilize_floor: float | None = 1e-6
    analyses: list = field(default_factory=lambda: ["baseline"])
    robust: RobustConfig = field(default_factory=RobustConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    constrained: ConstrainedConfig = field(default_factory=ConstrainedConfig)
    top: int = 10
    svg: bool = False

    def validate(self) -> "ExperimentConfig":
        bad = [a for a in self.analyses if a not in ANALYSES]
        if bad:
            raise ConfigError(f"unknown analyses {bad}; choose from {list(ANALYSES)}")
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        g = self.graph
        if g.kind not in ("er", "ws", "file", "two_clique", "lesmis"):
            raise ConfigError(f"unknown graph kind {g.kind!r}")
        if g.kind in ("er", "ws") and g.n < 2:
            raise ConfigError("n must be >= 2")
        for name, x in (("graph.p", g.p), ("graph.rewire_p", g.rewire_p), ("robust.delta_rel", self.robust.delta_rel)):
            if not 0 <= x <= 1:
                raise ConfigError(f"{name}={x} outside [0, 1]")
        if g.kind == "file" and not g.path:
            raise ConfigError("graph.path is required for kind 'file'")
        try:
            self.model.build()
            PoolMode(self.constrained.mode)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return _build(cls, d, "").validate()

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                return cls.from_dict(tomli.load(fh))
        except tomli.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None


def _build(kind, d, prefix):
    if not isinstance(d, dict):
        raise ConfigError(f"section {prefix or '<root>'} must be a table")
    fields = {f.name: f for f in dataclasses.fields(kind)}
    unknown = set(d) - set(fields)
    if unknown:
        raise ConfigError(f"unknown keys in {prefix or '<root>'}: {sorted(unknown)}")
    kw = {}
    for k, v in d.items():
        sub = _SECTIONS.get((kind, k))
        kw[k] = _build(sub, v, f"{prefix}{k}.") if sub else v
    try:
        return kind(**kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


_SECTIONS = {
    (ExperimentConfig, "graph"): GraphConfig,
    (ExperimentConfig, "model"): ModelConfig,
    (ExperimentConfig, "robust"): RobustConfig,
    (ExperimentConfig, "reward"): RewardConfig,
    (ExperimentConfig, "constrained"): ConstrainedConfig,
}


def load_config(path) -> ExperimentConfig:
    """A TOML config, or a ``manifest.json`` from an earlier run."""
    if str(path).endswith(".json"):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"{path}: {e}") from None
        return ExperimentConfig.from_dict(doc.get("config", doc))
    try:
        return ExperimentConfig.from_toml(path)
    except OSError as e:
        raise ConfigError(str(e)) from None


def build_graph(g: GraphConfig) -> BaseTopology:
    if g.kind == "er":
        return erdos_renyi(g.n, g.p, g.seed)
    if g.kind == "ws":
        return watts_strogatz(g.n, g.ring_degree, g.rewire_p, g.seed)
    if g.kind == "two_clique":
        return two_clique_fixture()
    if g.kind == "lesmis":
        return les_miserables()
    return ingest_graph(g.path, g.format)


def reproduce_config(fixture: str) -> ExperimentConfig:
    """Built-in configs for the reference experiments."""
    if fixture in ("fig1", "two_clique"):
        return ExperimentConfig("two_clique", GraphConfig(kind="two_clique"), ModelConfig(k_min=1), M=2000)
    if fixture in ("er", "ws"):
        return ExperimentConfig(fixture, GraphConfig(kind=fixture), ModelConfig(), M=60,
                                analyses=list(ANALYSES))
    if fixture == "lesmis":
        return ExperimentConfig("lesmis", GraphConfig(kind="lesmis"), ModelConfig(), M=60,
                                analyses=["baseline", "robust"])
    raise ConfigError(f"unknown fixture {fixture!r}; choose two_clique, er, ws or lesmis")


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _top_csv(path, labels, values, top):
    order = np.lexsort((np.arange(len(values)), -np.asarray(values)))[:top]
    with open(path, "w") as fh:
        fh.write("rank,node,value\n")
        for r, v in enumerate(order, 1):
            fh.write(f"{r},{labels[v]},{float(values[v])!r}\n")
    return [int(v) for v in order]


def _svg(path, labels, values, order, title):
    w, h, pad = 480, 260, 30
    bw = (w - 2 * pad) / max(len(order), 1)
    vmax = max(float(values[order[0]]), 1e-300) if order else 1.0
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
             f'<text x="{pad}" y="18" font-size="13">{title}</text>']
    for k, v in enumerate(order):
        bh = (h - 2 * pad - 20) * float(values[v]) / vmax
        x = pad + k * bw
        parts.append(f'<rect x="{x:.1f}" y="{h - pad - bh:.1f}" width="{bw * 0.8:.1f}" height="{bh:.1f}" fill="#4a74a8"/>')
        parts.append(f'<text x="{x:.1f}" y="{h - pad + 14}" font-size="9">{labels[v]}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


@dataclass
class RunResult:
    outdir: str
    base: BaseTopology
    kernel_sha256: str
    b: np.ndarray
    reports: dict
    checks: dict


def _initial(cfg, n):
    if cfg.initial == "uniform":
        return uniform(n)
    try:
        return check_distribution(cfg.initial, n)
    except ValueError as e:
        raise ConfigError(f"initial: {e}") from None


def _overlap(a, b):
    return len(set(a) & set(b))


def run_experiment(cfg: ExperimentConfig, outdir) -> RunResult:
    """Run every requested analysis and write the results directory.

    On failure a manifest with ``status = "failed"`` is still written next to
    whatever was produced before the error.
    """
    cfg.validate()
    os.makedirs(os.path.join(outdir, "plotdata"), exist_ok=True)
    times: dict[str, float] = {}
    manifest = {
        "config": cfg.to_dict(),
        "version": _version(),
        "seeds": {"graph": cfg.graph.seed, "kernel": cfg.seed, "robust": cfg.robust.seed},
        "status": "running",
        "wall_times": times,
    }
    try:
        result = _run(cfg, outdir, times, manifest)
        manifest["status"] = "ok"
        return result
    except Exception as e:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(e).__name__}: {e}"
        raise
    finally:
        _dump(os.path.join(outdir, "manifest.json"), manifest)


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _run(cfg, outdir, times, manifest):
    t0 = time.perf_counter()
    base = build_graph(cfg.graph)
    labels = list(base.labels) if base.labels is not None else list(range(base.n))
    model = cfg.model.build()
    s = _initial(cfg, base.n)
    times["graph"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    est = estimate_kernel(model, base, cfg.M, cfg.seed, stabilize_floor=cfg.stabilize_floor)
    sha = est.kernel.digest()
    manifest["kernel_sha256"] = sha
    manifest["graph"] = {"n": base.n, "m": base.m, "w_min": float(base.weights.min()) if base.m else None,
                         "w_max": float(base.weights.max()) if base.m else None}
    est.kernel.to_csv(os.path.join(outdir, "kernel.csv"), labels)
    _dump(os.path.join(outdir, "kernel.json"), kernel_envelope(est, model, {
        "hoeffding_eps_delta_0.01": hoeffding_eps(cfg.M, 0.01, base.n)}))
    times["kernel"] = time.perf_counter() - t0

    reports, checks = {}, {}
    prof = afc(est.kernel, s)
    plot = os.path.join(outdir, "plotdata")

    if "baseline" in cfg.analyses:
        t0 = time.perf_counter()
        doc = json.loads(prof.to_json(labels, kernel_sha256=sha))
        try:
            doc["b_post_initial"] = post_initial_afc(est.kernel, s).tolist()
        except ArithmeticError:
            doc["b_post_initial"] = None
        _dump(os.path.join(outdir, "afc.json"), doc)
        with open(os.path.join(outdir, "afc.csv"), "w") as fh:
            fh.write(prof.to_csv(labels))
        order = _top_csv(os.path.join(outdir, "topk.csv"), labels, prof.b, cfg.top)
        _top_csv(os.path.join(plot, "top10_baseline.csv"), labels, prof.b, 10)
        if cfg.svg:
            _svg(os.path.join(plot, "top10_baseline.svg"), labels, prof.b, order[:10], "AFC baseline")
        top5 = prof.top(5)
        checks["b_sums_to_one"] = bool(abs(prof.b.sum() - 1) <= 1e-10)
        checks["top5_mass_ratio"] = float(prof.b[top5].mean() * base.n)
        reports["baseline"] = doc
        times["baseline"] = time.perf_counter() - t0

    if "robust" in cfg.analyses:
        t0 = time.perf_counter()
        rc = cfg.robust
        uset = UncertaintySet.relative(est.kernel, rc.delta_rel, rc.r_min)
        ground = GroundMetric.from_graph(base)
        base_top = prof.top(rc.top)
        doc = {"kernel_sha256": sha, "delta_rel": rc.delta_rel, "r_min": rc.r_min,
               "n_samples": rc.n_samples, "nominal_b": prof.b.tolist(),
               "nominal_top": [labels[v] for v in base_top], "metrics": {}}
        for metric in rc.metrics:
            res = adversarial_search(uset, s, metric, rc.n_samples, rc.seed, ground)
            worst_top = [int(v) for v in np.lexsort((np.arange(base.n), -res.worst_b))[:rc.top]]
            doc["metrics"][metric] = {
                "discrepancy": res.discrepancy,
                "sample_index": res.index,
                "worst_b": res.worst_b.tolist(),
                "worst_top": [labels[v] for v in worst_top],
                "overlap_with_nominal": _overlap(worst_top, base_top),
                "min_leak": float(res.worst_kernel.r.min()),
                "envelope_min": res.b_min.tolist(),
                "envelope_max": res.b_max.tolist(),
            }
            _top_csv(os.path.join(plot, f"top10_robust_{metric}.csv"), labels, res.worst_b, 10)
            checks[f"robust_{metric}_min_leak_ok"] = bool(res.worst_kernel.r.min() >= rc.r_min - 1e-12)
            checks[f"robust_{metric}_overlap"] = _overlap(worst_top, base_top)
        pairs = rc.pairs or ([prof.top(2)] if base.n >= 2 else [])
        doc["certificates"] = []
        for u, v in pairs:
            g = visit_gap(uset, s, int(u), int(v))
            doc["certificates"].append({"u": labels[u], "v": labels[v], "gap": g.gap,
                                        "bound": g.bound, "certificate": g.certificate.value})
        _dump(os.path.join(outdir, "robust.json"), doc)
        reports["robust"] = doc
        times["robust"] = time.perf_counter() - t0

    if "reward" in cfg.analyses:
        t0 = time.perf_counter()
        rw = cfg.reward
        f, hubs = reward_f_from_hubs(base, rw.n_hubs, rw.levels, rw.beta)
        valued = RewardSpec.valued_topk(rw.k, f)
        psis = {
            "node_f": f,
            "switching": transition_psi(est.kernel, switching_eta),
            "improvement": transition_psi(est.kernel, improvement_eta(f)),
            f"valued_top{rw.k}": estimate_psi(valued, model, base, rows=est.rows),
            f"top{rw.k}_size": estimate_psi(RewardSpec.valued_topk(rw.k, np.ones(base.n)), model, base, rows=est.rows),
        }
        doc = reward_report(est.kernel, s, f, [labels[h] for h in hubs], psis)
        doc["kernel_sha256"] = sha
        _dump(os.path.join(outdir, "reward.json"), doc)
        reports["reward"] = doc
        times["reward"] = time.perf_counter() - t0

    if "constrained" in cfg.analyses:
        t0 = time.perf_counter()
        cc = cfg.constrained
        mode = PoolMode(cc.mode)
        pool = enumerate_clique_pool(base, cc.S, fallback=mode is PoolMode.FALLBACK)
        con = build_constrained_kernel(model, base, pool, mode, cc.k, rows=est.rows,
                                       stabilize_floor=cfg.stabilize_floor)
        stats = pool_statistics(con.kernel, s, pool, xi=con.xi)
        doc = pool_report(con, stats, pool, labels)
        doc["base_kernel_sha256"] = sha
        doc["b"] = stats.b.tolist()
        _dump(os.path.join(outdir, "constrained.json"), doc)
        _top_csv(os.path.join(plot, "top10_constrained.csv"), labels, stats.b, 10)
        reports["constrained"] = doc
        times["constrained"] = time.perf_counter() - t0

    if cfg.graph.kind == "two_clique":
        bc = betweenness(base.full())
        checks["bc_argmax_label"] = labels[int(np.argmax(bc))]
        pi = random_walk_stationary(base)
        checks["stationary_bridge"] = float(pi[4])
        checks["stationary_clique_gate"] = float(pi[0])
    if cfg.graph.kind == "lesmis":
        checks["lesmis_shape"] = [base.n, base.m, float(base.weights.min()), float(base.weights.max())]
    _dump(os.path.join(outdir, "checks.json"), checks)
    return RunResult(outdir, base, sha, prof.b, reports, checks)
