"""Graphs and the GRAND / GraphBel / GraphCON right-hand sides.

Node features are an ``(n_nodes, d)`` array.  GraphCON runs on the stacked
state ``[Y; X]`` of shape ``(2 n_nodes, d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DegenerateSamplesError, ShapeError

_NORM_FLOOR = 1e-12
_POWER_MAX_ITER = 200
_POWER_RTOL = 1e-10

KINDS = ("grand", "graphbel", "graphcon")


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph without self-loops.

    ``edges`` lists each undirected edge once as ``(i, j, w)`` with ``i < j``,
    sorted.  Use :meth:`from_edges` to build one from arbitrary input.
    """

    n_nodes: int
    edges: tuple[tuple[int, int, float], ...] = ()

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[Sequence], *, allow_duplicates: bool = False) -> "Graph":
        if int(n_nodes) != n_nodes or n_nodes < 1:
            raise ConfigError(f"Graph: n_nodes must be a positive integer, got {n_nodes!r}")
        n_nodes = int(n_nodes)
        table: dict[tuple[int, int], float] = {}
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if i == j:
                raise ConfigError(f"Graph: self-loop on node {i}")
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise ConfigError(f"Graph: edge ({i}, {j}) outside node range [0, {n_nodes})")
            if not math.isfinite(w):
                raise ConfigError(f"Graph: non-finite weight on edge ({i}, {j})")
            key = (min(i, j), max(i, j))
            if key in table and not allow_duplicates:
                raise ConfigError(f"Graph: duplicate edge {key}")
            table[key] = w
        kept = tuple((i, j, w) for (i, j), w in sorted(table.items()) if w != 0.0)
        return cls(n_nodes=n_nodes, edges=kept)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric weighted adjacency W as CSR with sorted indices."""
        n = self.n_nodes
        if not self.edges:
            return sp.csr_matrix((n, n))
        i, j, w = (np.array(c) for c in zip(*self.edges))
        rows = np.concatenate([i, j]).astype(np.int64)
        cols = np.concatenate([j, i]).astype(np.int64)
        vals = np.concatenate([w, w]).astype(float)
        mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        mat.sort_indices()
        return mat

    def dense_adjacency(self) -> np.ndarray:
        return self.adjacency.toarray()

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def with_edits(self, edits: Iterable[Sequence]) -> "Graph":
        """Copy with each (i, j) weight set to new_weight; 0 deletes the edge."""
        table = {(i, j): w for i, j, w in self.edges}
        for e in edits:
            i, j, w = int(e[0]), int(e[1]), float(e[2])
            if i == j:
                raise ConfigError(f"Graph.with_edits: edit on the diagonal ({i}, {j})")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ConfigError(f"Graph.with_edits: edit ({i}, {j}) outside node range [0, {self.n_nodes})")
            if not math.isfinite(w):
                raise ConfigError(f"Graph.with_edits: non-finite weight for ({i}, {j})")
            table[(min(i, j), max(i, j))] = w
        return Graph.from_edges(self.n_nodes, [(i, j, w) for (i, j), w in table.items()])


@dataclass(frozen=True, eq=False)
class AttentionParams:
    w_key: np.ndarray
    w_query: np.ndarray

    def __post_init__(self):
        wk = np.asarray(self.w_key, dtype=float)
        wq = np.asarray(self.w_query, dtype=float)
        if wk.ndim != 2 or wq.shape != wk.shape:
            raise ConfigError(f"AttentionParams: key/query must be equal-shape matrices, got {wk.shape}, {wq.shape}")
        if not (np.all(np.isfinite(wk)) and np.all(np.isfinite(wq))):
            raise ConfigError("AttentionParams: non-finite weights")
        object.__setattr__(self, "w_key", wk)
        object.__setattr__(self, "w_query", wq)

    @property
    def d_in(self) -> int:
        return self.w_key.shape[0]

    @property
    def d_k(self) -> int:
        return self.w_key.shape[1]


@dataclass(frozen=True, eq=False)
class DynamicsSpec:
    """Frozen parameters of one of the three dynamics.

    ``attention_mode="static"`` freezes the attention at a reference state
    (the clean initial features); ``"dynamic"`` recomputes it on every call.
    ``lipschitz_target``, when set, rescales a static linear operator so its
    spectral norm equals the target.
    """

    kind: str
    attention: Optional[AttentionParams] = None
    coupling_weight: Optional[np.ndarray] = None
    gamma: float = 1.0
    alpha: float = 1.0
    activation: str = "tanh"
    attention_mode: str = "static"
    aggregation: str = "normalized_adjacency"
    lipschitz_target: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"DynamicsSpec: kind must be one of {KINDS}, got {self.kind!r}")
        if self.attention_mode not in ("static", "dynamic"):
            raise ConfigError(f"DynamicsSpec: attention_mode must be static or dynamic, got {self.attention_mode!r}")
        if self.kind in ("grand", "graphbel") and self.attention is None:
            raise ConfigError(f"DynamicsSpec: {self.kind} requires attention parameters")
        if self.kind == "graphcon":
            if self.coupling_weight is None:
                raise ConfigError("DynamicsSpec: graphcon requires coupling_weight")
            m = np.asarray(self.coupling_weight, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.all(np.isfinite(m)):
                raise ConfigError(f"DynamicsSpec: coupling_weight must be a finite square matrix, got shape {m.shape}")
            object.__setattr__(self, "coupling_weight", m)
            if self.activation not in _ACTIVATIONS:
                raise ConfigError(f"DynamicsSpec: activation must be one of {tuple(_ACTIVATIONS)}")
            if self.aggregation not in ("normalized_adjacency", "attention"):
                raise ConfigError(f"DynamicsSpec: unknown aggregation {self.aggregation!r}")
            if self.aggregation == "attention" and self.attention is None:
                raise ConfigError("DynamicsSpec: attention aggregation requires attention parameters")
            for name in ("gamma", "alpha"):
                v = getattr(self, name)
                if not (math.isfinite(v) and v >= 0):
                    raise ConfigError(f"DynamicsSpec: {name} must be finite and >= 0, got {v!r}")
        if self.lipschitz_target is not None and not self.lipschitz_target > 0:
            raise ConfigError(f"DynamicsSpec: lipschitz_target must be > 0, got {self.lipschitz_target!r}")


_ACTIVATIONS = {"tanh": np.tanh, "relu": lambda a: np.maximum(a, 0.0)}


def uniform_init(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    s = fan_in**-0.5
    return rng.uniform(-s, s, size=shape)


def init_dynamics(kind: str, d: int, seed: int, *, d_k: Optional[int] = None, **kwargs) -> DynamicsSpec:
    """Seeded DynamicsSpec with weights uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].

    Draw order is fixed: key, query, then (graphcon) coupling weight.
    """
    rng = np.random.default_rng(seed)
    d_k = d if d_k is None else d_k
    attention = AttentionParams(uniform_init(rng, d, (d, d_k)), uniform_init(rng, d, (d, d_k)))
    coupling = uniform_init(rng, d, (d, d)) if kind == "graphcon" else None
    return DynamicsSpec(kind=kind, attention=attention, coupling_weight=coupling, **kwargs)


def _check_features(graph: Graph, x: np.ndarray, d_in: Optional[int] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != graph.n_nodes:
        raise ShapeError(f"features must have shape ({graph.n_nodes}, d), got {x.shape}")
    if d_in is not None and x.shape[1] != d_in:
        raise ShapeError(f"feature dimension {x.shape[1]} does not match parameter dimension {d_in}")
    return x


def attention_matrix(graph: Graph, x, params: AttentionParams) -> sp.csr_matrix:
    """Neighbourhood softmax of (W_K x_i)^T (W_Q x_j) / d_k.

    Rows of isolated nodes are all zero.
    """
    x = _check_features(graph, x, params.d_in)
    adj = graph.adjacency
    n = graph.n_nodes
    if adj.nnz == 0:
        return sp.csr_matrix((n, n))
    keys = x @ params.w_key
    queries = x @ params.w_query
    rows = np.repeat(np.arange(n), np.diff(adj.indptr))
    cols = adj.indices
    logits = np.einsum("ij,ij->i", keys[rows], queries[cols]) / params.d_k
    starts = adj.indptr[:-1][np.diff(adj.indptr) > 0]
    row_max = np.maximum.reduceat(logits, starts)
    counts = np.diff(np.append(starts, adj.nnz))
    ex = np.exp(logits - np.repeat(row_max, counts))
    denom = np.add.reduceat(ex, starts)
    vals = ex / np.repeat(denom, counts)
    return sp.csr_matrix((vals, cols.copy(), adj.indptr.copy()), shape=(n, n))


def cosine_similarity_map(graph: Graph, x) -> sp.csr_matrix:
    """B_S on the edge pattern: cosine of feature rows, 0 where a norm is below 1e-12."""
    x = _check_features(graph, x)
    adj = graph.adjacency
    n = graph.n_nodes
    norms = np.linalg.norm(x, axis=1)
    rows = np.repeat(np.arange(n), np.diff(adj.indptr))
    cols = adj.indices
    dots = np.einsum("ij,ij->i", x[rows], x[cols])
    denom = norms[rows] * norms[cols]
    ok = (norms[rows] >= _NORM_FLOOR) & (norms[cols] >= _NORM_FLOOR)
    vals = np.zeros(len(cols))
    vals[ok] = dots[ok] / denom[ok]
    return sp.csr_matrix((vals, cols.copy(), adj.indptr.copy()), shape=(n, n))


def grand_operator(graph: Graph, x, params: AttentionParams) -> sp.csr_matrix:
    """A(x) - I."""
    a = attention_matrix(graph, x, params)
    return (a - sp.identity(graph.n_nodes, format="csr")).tocsr()


def graphbel_operator(graph: Graph, x, params: AttentionParams) -> sp.csr_matrix:
    """A_S ⊙ B_S - Psi with Psi = diag(row sums of A_S ⊙ B_S)."""
    a = attention_matrix(graph, x, params)
    b = cosine_similarity_map(graph, x)
    # same sparsity pattern by construction, so the Hadamard product is elementwise on data
    ab = sp.csr_matrix((a.data * b.data, a.indices, a.indptr), shape=a.shape)
    psi = np.asarray(ab.sum(axis=1)).ravel()
    return (ab - sp.diags(psi, format="csr")).tocsr()


def normalized_adjacency(graph: Graph) -> sp.csr_matrix:
    """D^{-1/2} W D^{-1/2} with weighted degrees; isolated nodes give zero rows."""
    w = graph.adjacency
    deg = np.asarray(w.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    pos = deg > 0
    inv[pos] = deg[pos] ** -0.5
    d = sp.diags(inv)
    return (d @ w @ d).tocsr()


class LinearRhs:
    """Right-hand side X -> operator @ X with a frozen sparse operator."""

    def __init__(self, operator: sp.spmatrix):
        self.operator = sp.csr_matrix(operator)
        self.operator.data.flags.writeable = False

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] != self.operator.shape[1]:
            raise ShapeError(f"state must have {self.operator.shape[1]} rows, got shape {x.shape}")
        return np.asarray(self.operator @ x)

    def scaled(self, factor: float) -> "LinearRhs":
        return LinearRhs(self.operator * factor)


class AttentionRhs:
    """Right-hand side X -> op(X) @ X with the operator rebuilt every call."""

    def __init__(self, graph: Graph, params: AttentionParams, builder):
        self.graph = graph
        self.params = params
        self._builder = builder

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        x = _check_features(self.graph, x, self.params.d_in)
        return np.asarray(self._builder(self.graph, x, self.params) @ x)


class GraphConRhs:
    """Coupled oscillator on the stacked state [Y; X] (Y on top)."""

    def __init__(self, graph: Graph, spec: DynamicsSpec, aggregator: Optional[sp.csr_matrix]):
        self.graph = graph
        self.spec = spec
        self._aggregator = aggregator
        self._sigma = _ACTIVATIONS[spec.activation]

    def aggregator_at(self, x: np.ndarray) -> sp.csr_matrix:
        if self._aggregator is not None:
            return self._aggregator
        return attention_matrix(self.graph, x, self.spec.attention)

    def __call__(self, t: float, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        n = self.graph.n_nodes
        m = self.spec.coupling_weight
        if state.ndim != 2 or state.shape != (2 * n, m.shape[0]):
            raise ShapeError(f"graphcon state must have shape ({2 * n}, {m.shape[0]}), got {state.shape}")
        y, x = state[:n], state[n:]
        coupling = np.asarray(self.aggregator_at(x) @ x) @ m
        top = self._sigma(coupling) - self.spec.gamma * x - self.spec.alpha * y
        return np.vstack([top, y])


def stack_graphcon_state(x0, y0=None) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    y0 = np.zeros_like(x0) if y0 is None else np.asarray(y0, dtype=float)
    if y0.shape != x0.shape:
        raise ShapeError(f"velocity block shape {y0.shape} differs from feature block {x0.shape}")
    return np.vstack([y0, x0])


def _static_linear(graph, spec, x_ref, builder):
    if x_ref is None:
        raise ConfigError(f"{spec.kind}: static attention needs the reference state x_ref to freeze at")
    x_ref = _check_features(graph, x_ref, spec.attention.d_in)
    rhs = LinearRhs(builder(graph, x_ref, spec.attention))
    if spec.lipschitz_target is not None:
        norm = spectral_norm(rhs.operator)
        if norm == 0:
            raise ConfigError(f"{spec.kind}: cannot rescale a zero operator to lipschitz_target")
        rhs = rhs.scaled(spec.lipschitz_target / norm)
    return rhs


def _require_kind(spec: DynamicsSpec, kind: str) -> None:
    if spec.kind != kind:
        raise ConfigError(f"expected a {kind} DynamicsSpec, got {spec.kind!r}")


def grand_rhs(graph: Graph, spec: DynamicsSpec, x_ref=None):
    """(t, X) -> (A - I) X; static mode freezes A at ``x_ref``."""
    _require_kind(spec, "grand")
    if spec.attention_mode == "static":
        return _static_linear(graph, spec, x_ref, grand_operator)
    if spec.lipschitz_target is not None:
        raise ConfigError("grand: lipschitz_target needs static attention")
    return AttentionRhs(graph, spec.attention, grand_operator)


def graphbel_rhs(graph: Graph, spec: DynamicsSpec, x_ref=None):
    """(t, X) -> (A_S ⊙ B_S - Psi) X; static mode freezes both maps at ``x_ref``."""
    _require_kind(spec, "graphbel")
    if spec.attention_mode == "static":
        return _static_linear(graph, spec, x_ref, graphbel_operator)
    if spec.lipschitz_target is not None:
        raise ConfigError("graphbel: lipschitz_target needs static attention")
    return AttentionRhs(graph, spec.attention, graphbel_operator)


def graphcon_rhs(graph: Graph, spec: DynamicsSpec, x_ref=None):
    """Stacked-state right-hand side; ``x_ref`` is the feature block used for static attention."""
    _require_kind(spec, "graphcon")
    if spec.lipschitz_target is not None:
        raise ConfigError("graphcon: lipschitz_target is only defined for linear dynamics")
    if spec.aggregation == "normalized_adjacency":
        return GraphConRhs(graph, spec, normalized_adjacency(graph))
    if spec.attention_mode == "static":
        if x_ref is None:
            raise ConfigError("graphcon: static attention needs the reference state x_ref")
        return GraphConRhs(graph, spec, attention_matrix(graph, x_ref, spec.attention))
    return GraphConRhs(graph, spec, None)


def build_rhs(graph: Graph, spec: DynamicsSpec, x_ref=None):
    return {"grand": grand_rhs, "graphbel": graphbel_rhs, "graphcon": graphcon_rhs}[spec.kind](graph, spec, x_ref)


def spectral_norm(op, *, max_iter: int = _POWER_MAX_ITER, rtol: float = _POWER_RTOL, seed: int = 0) -> float:
    """Largest singular value by power iteration on op^T op."""
    op = sp.csr_matrix(op)
    if op.nnz == 0 or not np.any(op.data):
        return 0.0
    v = np.random.default_rng(seed).standard_normal(op.shape[1])
    v /= np.linalg.norm(v)
    opt = op.T.tocsr()
    sigma = 0.0
    for _ in range(max_iter):
        u = op @ v
        new_sigma = float(np.linalg.norm(u))
        if new_sigma == 0.0:
            return 0.0
        w = opt @ u
        v = w / np.linalg.norm(w)
        if abs(new_sigma - sigma) <= rtol * new_sigma:
            return new_sigma
        sigma = new_sigma
    return sigma


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    exact: bool
    n_pairs: int = 0

    def __float__(self) -> float:
        return self.value


def lipschitz_of_rhs(rhs, x_samples: Sequence[np.ndarray] = (), t: float = 0.0) -> LipschitzEstimate:
    """Exact spectral norm for a :class:`LinearRhs`, else a sampled lower bound."""
    if isinstance(rhs, LinearRhs):
        return LipschitzEstimate(spectral_norm(rhs.operator), exact=True)
    samples = [np.asarray(x, dtype=float) for x in x_samples]
    if len(samples) < 2:
        raise DegenerateSamplesError("lipschitz estimate needs at least 2 sample states")
    values = [np.asarray(rhs(t, x)) for x in samples]
    best = 0.0
    pairs = 0
    for a in range(len(samples)):
        for b in range(a + 1, len(samples)):
            dx = np.linalg.norm(samples[a] - samples[b])
            if dx < _NORM_FLOOR:
                continue
            pairs += 1
            best = max(best, float(np.linalg.norm(values[a] - values[b]) / dx))
    if pairs == 0:
        raise DegenerateSamplesError("all sample pairs are closer than 1e-12; no Lipschitz ratio available")
    return LipschitzEstimate(best, exact=False, n_pairs=pairs)


def lipschitz_estimate(graph: Graph, spec: DynamicsSpec, x_samples: Sequence[np.ndarray], x_ref=None) -> LipschitzEstimate:
    """Lipschitz constant of the dynamics built from (graph, spec).

    Static GRAND and GraphBel are linear, so their constant is the exact
    spectral norm of the frozen operator (``x_ref`` defaults to the first
    sample).  Everything else returns the largest difference quotient over
    sample pairs, flagged ``exact=False``.
    """
    if not len(x_samples):
        raise DegenerateSamplesError("lipschitz_estimate: no sample states given")
    if x_ref is None:
        x_ref = x_samples[0]
        if spec.kind == "graphcon":
            x_ref = np.asarray(x_ref)[graph.n_nodes :]
    return lipschitz_of_rhs(build_rhs(graph, spec, x_ref), x_samples)
