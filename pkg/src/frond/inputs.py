"""Graph and feature ingestion, plus seeded synthetic graphs."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, InputParseError, OutputError
from .graph_dynamics import Graph


def load_graph(path) -> Graph:
    """Read a whitespace-separated edge list ``i j w``, one undirected edge per line.

    Lines starting with ``#`` are comments, except a ``#nodes N`` header,
    which sets a minimum node count.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OutputError(f"cannot read graph file {path}: {exc}") from exc
    declared = 0
    edges = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "nodes":
                if len(parts) != 2 or not parts[1].isdigit():
                    raise InputParseError(f"bad header {line!r}, expected '#nodes N'", path=path, line=lineno)
                declared = max(declared, int(parts[1]))
            continue
        parts = line.split()
        if len(parts) != 3:
            raise InputParseError(f"expected 'i j w', got {len(parts)} fields", path=path, line=lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            w = float(parts[2])
        except ValueError:
            raise InputParseError(f"non-numeric field in {line!r}", path=path, line=lineno) from None
        if i < 0 or j < 0:
            raise InputParseError(f"negative node id in {line!r}", path=path, line=lineno)
        if i == j:
            raise InputParseError(f"self-loop on node {i}", path=path, line=lineno)
        if not math.isfinite(w):
            raise InputParseError(f"non-finite weight {parts[2]!r}", path=path, line=lineno)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise InputParseError(f"duplicate edge {key}, first given on line {seen[key]}", path=path, line=lineno)
        seen[key] = lineno
        edges.append((i, j, w))
    max_id = max((max(i, j) for i, j, _ in edges), default=-1)
    n_nodes = max(declared, max_id + 1)
    if n_nodes < 1:
        raise InputParseError("graph file has no edges and no '#nodes' header", path=path)
    return Graph.from_edges(n_nodes, edges)


def save_graph(graph: Graph, path) -> None:
    lines = [f"#nodes {graph.n_nodes}"] + [f"{i} {j} {w!r}" for i, j, w in graph.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def load_features(path, n_nodes: int) -> np.ndarray:
    """Read an ``n_nodes x d`` CSV of finite numbers."""
    path = Path(path)
    rows = []
    try:
        with path.open(newline="") as fh:
            for lineno, rec in enumerate(csv.reader(fh), start=1):
                if not rec or all(not c.strip() for c in rec):
                    continue
                try:
                    vals = [float(c) for c in rec]
                except ValueError:
                    raise InputParseError(f"non-numeric cell in row {rec!r}", path=path, line=lineno) from None
                if rows and len(vals) != len(rows[0]):
                    raise InputParseError(
                        f"ragged row: {len(vals)} columns, expected {len(rows[0])}", path=path, line=lineno
                    )
                if not all(math.isfinite(v) for v in vals):
                    raise InputParseError("non-finite cell", path=path, line=lineno)
                rows.append(vals)
    except OSError as exc:
        raise OutputError(f"cannot read feature file {path}: {exc}") from exc
    if len(rows) != n_nodes:
        raise InputParseError(f"feature file has {len(rows)} rows but the graph has {n_nodes} nodes", path=path)
    if not rows or not rows[0]:
        raise InputParseError("feature file has no columns", path=path)
    return np.array(rows, dtype=float)


def save_features(x, path) -> None:
    x = np.asarray(x, dtype=float)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        for row in x:
            w.writerow([repr(float(v)) for v in row])


def _largest_component(n: int, edges: list[tuple[int, int, float]]) -> Graph:
    g = Graph.from_edges(n, edges)
    n_comp, labels = connected_components(g.adjacency, directed=False)
    if n_comp == 1:
        return g
    sizes = np.bincount(labels)
    keep = int(np.argmax(sizes))  # argmax takes the lowest label on ties
    nodes = np.flatnonzero(labels == keep)
    remap = {int(old): new for new, old in enumerate(nodes)}
    kept = [(remap[i], remap[j], w) for i, j, w in g.edges if i in remap and j in remap]
    if len(nodes) < 2:
        raise ConfigError("synth_graph: generated graph has no edges")
    return Graph.from_edges(len(nodes), kept)


def synth_graph(kind: str, n: int, params: Optional[dict] = None, seed: int = 0) -> Graph:
    """Seeded synthetic graph, reduced to its largest connected component.

    kinds: ``ring``; ``er`` with ``p``; ``sbm`` with ``blocks`` (equal sizes,
    remainder to the first blocks) or ``sizes``, plus ``p_in`` and ``p_out``.
    Random kinds draw one uniform per node pair of the upper triangle in
    row-major order.
    """
    params = dict(params or {})
    if int(n) != n or n < 2:
        raise ConfigError(f"synth_graph: n must be an integer >= 2, got {n!r}")
    n = int(n)
    if kind == "ring":
        edges = [(i, (i + 1) % n, 1.0) for i in range(n if n > 2 else 1)]
        return Graph.from_edges(n, edges)
    if kind == "er":
        p = float(params.get("p", 0.1))
        if not 0 < p <= 1:
            raise ConfigError(f"synth_graph: er needs p in (0, 1], got {p!r}")
        prob = np.full((n, n), p)
    elif kind == "sbm":
        if "sizes" in params:
            sizes = [int(s) for s in params["sizes"]]
            if sum(sizes) != n or min(sizes) < 1:
                raise ConfigError(f"synth_graph: sbm sizes {sizes} must be positive and sum to n = {n}")
        else:
            k = int(params.get("blocks", 2))
            if not 1 <= k <= n:
                raise ConfigError(f"synth_graph: sbm blocks must be in [1, n], got {k}")
            sizes = [n // k + (1 if b < n % k else 0) for b in range(k)]
        p_in = float(params.get("p_in", 0.2))
        p_out = float(params.get("p_out", 0.02))
        if not (0 <= p_in <= 1 and 0 <= p_out <= 1) or p_in + p_out == 0:
            raise ConfigError(f"synth_graph: sbm probabilities out of range (p_in={p_in}, p_out={p_out})")
        block = np.repeat(np.arange(len(sizes)), sizes)
        prob = np.where(block[:, None] == block[None, :], p_in, p_out)
    else:
        raise ConfigError(f"synth_graph: unknown kind {kind!r} (ring, er, sbm)")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    hits = rng.random(len(iu)) < prob[iu, ju]
    edges = [(int(i), int(j), 1.0) for i, j in zip(iu[hits], ju[hits])]
    return _largest_component(n, edges)
