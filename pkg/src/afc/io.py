"""Graph generators and readers (whitespace edge lists and a subset of GML)."""
from __future__ import annotations

import enum
import os
import re
from importlib import resources

import numpy as np

from .graph import BaseTopology, GraphError
from .realization import substream


class GraphParseError(GraphError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


class GraphFormat(str, enum.Enum):
    EDGE_LIST = "edge_list"
    GML_SUBSET = "gml"


def erdos_renyi(n: int, p: float, seed: int) -> BaseTopology:
    """G(n, p) with unit weights; pairs are visited in lexicographic order."""
    if n < 2 or not 0 <= p <= 1:
        raise ValueError("ER needs n >= 2 and p in [0, 1]")
    rng = substream(seed, 0)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    return BaseTopology(n, np.column_stack([iu[keep], ju[keep]]), np.ones(int(keep.sum())))


def watts_strogatz(n: int, ring_degree: int, rewire_p: float, seed: int) -> BaseTopology:
    """Ring lattice (each node linked to ``ring_degree`` nearest neighbours),
    then each lattice edge ``(u, u+j)`` has its far end rewired with
    probability ``rewire_p`` to a uniform node, avoiding self-loops and
    duplicates."""
    if ring_degree % 2 or not 0 < ring_degree < n or not 0 <= rewire_p <= 1:
        raise ValueError("WS needs an even ring_degree in (0, n) and rewire_p in [0, 1]")
    rng = substream(seed, 0)
    adj = [set() for _ in range(n)]
    for u in range(n):
        for j in range(1, ring_degree // 2 + 1):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)
    for j in range(1, ring_degree // 2 + 1):
        for u in range(n):
            v = (u + j) % n
            if v not in adj[u] or rng.random() >= rewire_p:
                continue
            if len(adj[u]) >= n - 1:
                continue
            w = int(rng.integers(n))
            while w == u or w in adj[u]:
                w = int(rng.integers(n))
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
    edges = sorted((u, v) for u in range(n) for v in adj[u] if u < v)
    return BaseTopology(n, np.array(edges, dtype=np.int64).reshape(-1, 2), np.ones(len(edges)))


def read_edge_list(path, weighted: bool = True) -> BaseTopology:
    """``u v w`` per line (``u v`` when unweighted), ``#`` comments.

    Ids are shifted to 0-based when the smallest id is 1.  The original ids
    are kept as labels.
    """
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            want = 3 if weighted else 2
            if len(parts) != want and not (not weighted and len(parts) == 3):
                raise GraphParseError(f"expected {want} fields, got {len(parts)}", lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise GraphParseError(f"cannot parse {line!r}", lineno) from None
            if w <= 0 or not np.isfinite(w):
                raise GraphParseError(f"nonpositive weight {w}", lineno)
            if u == v:
                raise GraphParseError("self-loop", lineno)
            rows.append((u, v, w, lineno))
    if not rows:
        raise GraphParseError("no edges")
    lo = min(min(u, v) for u, v, _, _ in rows)
    if lo not in (0, 1):
        raise GraphParseError(f"node ids must start at 0 or 1, smallest is {lo}")
    n = max(max(u, v) for u, v, _, _ in rows) + 1 - lo
    seen = {}
    for u, v, _, lineno in rows:
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphParseError(f"duplicate edge {key} (first on line {seen[key]})", lineno)
        seen[key] = lineno
    labels = tuple(range(lo, lo + n))
    return BaseTopology.from_edges(n, [(u - lo, v - lo, w) for u, v, w, _ in rows], labels)


_TOKEN = re.compile(r'"[^"]*"|\[|\]|[^\s\[\]]+')


def _tokenize(text):
    for lineno, line in enumerate(text.splitlines(), 1):
        for m in _TOKEN.finditer(line):
            yield m.group(0), lineno


def _parse_list(tokens, opening_line):
    """Key/value pairs up to the matching ``]``; nested lists become lists of pairs."""
    out = []
    for tok, line in tokens:
        if tok == "]":
            return out
        if tok == "[":
            raise GraphParseError("unexpected '['", line)
        try:
            val, vline = next(tokens)
        except StopIteration:
            raise GraphParseError(f"key {tok!r} has no value", line) from None
        if val == "[":
            out.append((tok, _parse_list(tokens, vline), line))
        elif val == "]":
            raise GraphParseError(f"key {tok!r} has no value", line)
        else:
            out.append((tok, val.strip('"') if val.startswith('"') else val, line))
    if opening_line is not None:
        raise GraphParseError("unterminated '['", opening_line)
    return out


def _num(val, line, what):
    try:
        x = float(val)
    except (TypeError, ValueError):
        raise GraphParseError(f"{what} must be numeric, got {val!r}", line) from None
    return x


def read_gml(path) -> BaseTopology:
    """``graph [ node [ id label ] edge [ source target value ] ]``; other keys
    are ignored.  Nodes are indexed in file order; a missing ``value`` means 1."""
    with open(path) as fh:
        top = _parse_list(_tokenize(fh.read()), None)
    graphs = [(v, line) for k, v, line in top if k == "graph"]
    if len(graphs) != 1 or not isinstance(graphs[0][0], list):
        raise GraphParseError("expected exactly one 'graph [ ... ]' block")
    ids, labels, edges = {}, [], []
    for key, val, line in graphs[0][0]:
        if key == "node":
            fields = {k: (v, ln) for k, v, ln in val}
            if "id" not in fields:
                raise GraphParseError("node without id", line)
            nid = int(_num(*fields["id"], "node id"))
            if nid in ids:
                raise GraphParseError(f"duplicate node id {nid}", line)
            ids[nid] = len(ids)
            labels.append(fields["label"][0] if "label" in fields else nid)
        elif key == "edge":
            fields = {k: (v, ln) for k, v, ln in val}
            for req in ("source", "target"):
                if req not in fields:
                    raise GraphParseError(f"edge without {req}", line)
            u = int(_num(*fields["source"], "source"))
            v = int(_num(*fields["target"], "target"))
            w = _num(*fields["value"], "value") if "value" in fields else 1.0
            edges.append((u, v, w, line))
    seen = {}
    out = []
    for u, v, w, line in edges:
        if u not in ids or v not in ids:
            raise GraphParseError(f"edge references unknown node {u if u not in ids else v}", line)
        if u == v:
            raise GraphParseError("self-loop", line)
        if w <= 0:
            raise GraphParseError(f"nonpositive weight {w}", line)
        key = (min(ids[u], ids[v]), max(ids[u], ids[v]))
        if key in seen:
            raise GraphParseError(f"duplicate edge {u}-{v}", line)
        seen[key] = line
        out.append((ids[u], ids[v], w))
    if not ids:
        raise GraphParseError("graph has no nodes")
    return BaseTopology.from_edges(len(ids), out, tuple(labels))


def ingest_graph(path, fmt=None) -> BaseTopology:
    if fmt is None:
        fmt = GraphFormat.GML_SUBSET if str(path).endswith(".gml") else GraphFormat.EDGE_LIST
    fmt = GraphFormat(fmt)
    if not os.path.exists(path):
        raise GraphParseError(f"no such file: {path}")
    return read_gml(path) if fmt is GraphFormat.GML_SUBSET else read_edge_list(path)


def write_edge_list(base: BaseTopology, path) -> None:
    with open(path, "w") as fh:
        for (u, v), w in zip(base.edges, base.weights):
            fh.write(f"{u} {v} {w:g}\n")


def lesmis_path() -> str:
    return str(resources.files("afc") / "data" / "lesmis.gml")


def les_miserables() -> BaseTopology:
    """Bundled character co-occurrence network (77 nodes, 254 weighted edges)."""
    return read_gml(lesmis_path())
