"""Clean/perturbed twin runs and their comparison with E_beta(L T^beta).

Deviations are Frobenius norms over the node-feature block, maximised over
the solver grid.  For GraphCON the velocity block is integrated but left out
of both the perturbation and the deviation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import FrondError, NonFiniteError, PerturbationError
from .fde_solver import FdeConfig, Trajectory, solve_fde_pair
from .graph_dynamics import (
    DynamicsSpec,
    Graph,
    LinearRhs,
    build_rhs,
    lipschitz_of_rhs,
    spectral_norm,
    stack_graphcon_state,
)
from .special_fn import mlf_bound

log = logging.getLogger(__name__)

_MAX_SAMPLES = 64


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    epsilon: float = 0.0
    edits: tuple[tuple[int, int, float], ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind == "feature":
            if not (math.isfinite(self.epsilon) and self.epsilon > 0):
                raise PerturbationError(f"feature perturbation needs epsilon > 0, got {self.epsilon!r}")
        elif self.kind == "topology":
            if not self.edits:
                raise PerturbationError("topology perturbation needs at least one edit")
            edits = tuple((int(i), int(j), float(w)) for i, j, w in self.edits)
            for i, j, _ in edits:
                if i == j:
                    raise PerturbationError(f"topology edit on the diagonal ({i}, {j})")
            object.__setattr__(self, "edits", edits)
        else:
            raise PerturbationError(f"perturbation kind must be feature or topology, got {self.kind!r}")

    def with_seed(self, seed: int) -> "PerturbationSpec":
        return PerturbationSpec(kind=self.kind, epsilon=self.epsilon, edits=self.edits, seed=seed)


@dataclass(frozen=True)
class DeviationReport:
    beta: float
    sup_deviation: float
    terminal_deviation: float
    epsilon_effective: float
    lipschitz: float
    lipschitz_exact: bool
    bound_factor: float
    fitted_c: float
    seed: int
    perturbation: str

    def to_dict(self) -> dict:
        return asdict(self)


def perturb_features(x0, spec: PerturbationSpec) -> np.ndarray:
    """x0 plus a seeded Gaussian direction rescaled to Frobenius norm epsilon."""
    if spec.kind != "feature":
        raise PerturbationError(f"perturb_features needs a feature spec, got {spec.kind!r}")
    x0 = np.asarray(x0, dtype=float)
    if x0.size == 0:
        raise PerturbationError("perturb_features: empty feature matrix")
    direction = np.random.default_rng(spec.seed).standard_normal(x0.shape)
    return x0 + direction * (spec.epsilon / np.linalg.norm(direction))


def perturb_topology(graph: Graph, spec: PerturbationSpec) -> Graph:
    if spec.kind != "topology":
        raise PerturbationError(f"perturb_topology needs a topology spec, got {spec.kind!r}")
    try:
        edited = graph.with_edits(spec.edits)
    except FrondError as exc:
        raise PerturbationError(str(exc)) from exc
    if edited == graph:
        log.warning("perturb_topology: edits %s leave the graph unchanged", list(spec.edits))
    return edited


def functional_epsilon(rhs, rhs_tilde, sample_states: Sequence[np.ndarray], times: Optional[Sequence[float]] = None) -> float:
    """max over samples of ||rhs(X) - rhs_tilde(X)||_F.

    This only sees the sampled states, so it under-estimates the supremum over
    any set containing them.
    """
    if not len(sample_states):
        raise PerturbationError("functional_epsilon: no sample states")
    times = [0.0] * len(sample_states) if times is None else list(times)
    best = 0.0
    for k, (t, x) in enumerate(zip(times, sample_states)):
        diff = np.asarray(rhs(t, x)) - np.asarray(rhs_tilde(t, x))
        if not np.all(np.isfinite(diff)):
            raise NonFiniteError("functional_epsilon: right-hand side is not finite", step=k)
        best = max(best, float(np.linalg.norm(diff)))
    return best


def _subsample(n: int) -> np.ndarray:
    if n <= _MAX_SAMPLES:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, _MAX_SAMPLES).round().astype(int))


def _twin_rhs(graph: Graph, graph_tilde: Graph, spec: DynamicsSpec, x_ref: np.ndarray):
    """Build both right-hand sides; a lipschitz_target rescale uses the clean operator's factor for both."""
    target = spec.lipschitz_target
    if target is None:
        rhs = build_rhs(graph, spec, x_ref)
        return rhs, rhs if graph_tilde is graph else build_rhs(graph_tilde, spec, x_ref)
    raw = replace(spec, lipschitz_target=None)
    rhs = build_rhs(graph, raw, x_ref)
    rhs_tilde = rhs if graph_tilde is graph else build_rhs(graph_tilde, raw, x_ref)
    factor = target / spectral_norm(rhs.operator)
    scaled = rhs.scaled(factor)
    return scaled, scaled if rhs_tilde is rhs else rhs_tilde.scaled(factor)


def deviation_experiment(
    graph: Graph,
    spec: DynamicsSpec,
    x0,
    pert: PerturbationSpec,
    cfg: FdeConfig,
) -> DeviationReport:
    """Integrate a clean and a perturbed system and compare their gap with the bound."""
    x0 = np.asarray(x0, dtype=float)
    stacked = spec.kind == "graphcon"
    n = graph.n_nodes

    def state_of(x):
        return stack_graphcon_state(x) if stacked else x

    def features(traj: Trajectory) -> np.ndarray:
        return traj.states[:, n:] if stacked else traj.states

    if pert.kind == "feature":
        x0_tilde = perturb_features(x0, pert)
        rhs, rhs_tilde = _twin_rhs(graph, graph, spec, x0)
        clean, dirty = solve_fde_pair(rhs, rhs_tilde, state_of(x0), state_of(x0_tilde), cfg)
        eps = float(np.linalg.norm(x0_tilde - x0))
        idx_c, idx_d = _subsample(len(clean.states)), _subsample(len(dirty.states))
        samples = list(clean.states[idx_c]) + list(dirty.states[idx_d])
    else:
        graph_tilde = perturb_topology(graph, pert)
        rhs, rhs_tilde = _twin_rhs(graph, graph_tilde, spec, x0)
        s0 = state_of(x0)
        clean, dirty = solve_fde_pair(rhs, rhs_tilde, s0, s0, cfg)
        # x0 is states[0], so the clean trajectory already covers the sample set
        idx = _subsample(len(clean.states))
        eps = functional_epsilon(rhs, rhs_tilde, list(clean.states[idx]), clean.times[idx])
        samples = list(clean.states[idx])

    gap = np.linalg.norm((features(clean) - features(dirty)).reshape(len(clean.times), -1), axis=1)
    sup_dev = float(gap.max())
    terminal = float(gap[-1])
    lip = lipschitz_of_rhs(rhs, samples) if not isinstance(rhs, LinearRhs) else lipschitz_of_rhs(rhs)
    bound = mlf_bound(cfg.beta, lip.value, cfg.horizon_T) if lip.value > 0 else 1.0
    fitted = sup_dev / (eps * bound) if eps > 0 else 0.0
    return DeviationReport(
        beta=cfg.beta,
        sup_deviation=sup_dev,
        terminal_deviation=terminal,
        epsilon_effective=eps,
        lipschitz=lip.value,
        lipschitz_exact=lip.exact,
        bound_factor=bound,
        fitted_c=fitted,
        seed=pert.seed,
        perturbation=pert.kind,
    )


@dataclass(frozen=True)
class SweepRow:
    beta: float
    median_sup_deviation: float
    median_terminal_deviation: float
    bound_factor: float
    n_ok: int
    error: Optional[str] = None


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    spearman: Optional[float]
    complete: bool
    reports: tuple[DeviationReport, ...] = field(default=(), repr=False)

    @property
    def spearman_defined(self) -> bool:
        return self.spearman is not None

    def column(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.rows]


def spearman_or_none(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Spearman rank correlation, or None when it is undefined (fewer than 2 points or a constant column)."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2 or np.all(x == x[0]) or np.all(y == y[0]):
        return None
    return float(stats.spearmanr(x, y).statistic)


def beta_sweep(
    graph: Graph,
    spec: DynamicsSpec,
    x0,
    pert_template: PerturbationSpec,
    cfg_template: FdeConfig,
    betas: Sequence[float],
    n_seeds: int,
) -> SweepResult:
    """Run ``n_seeds`` deviation experiments per beta and aggregate medians.

    Seed i uses ``pert_template.seed + i`` for the perturbation direction.
    A beta whose runs fail is kept as a row with ``error`` set and NaN
    medians, and the result is marked incomplete.
    """
    betas = [float(b) for b in betas]
    if not betas:
        raise PerturbationError("beta_sweep: empty beta list")
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise PerturbationError("beta_sweep: betas must be strictly ascending")
    if n_seeds < 1:
        raise PerturbationError(f"beta_sweep: n_seeds must be >= 1, got {n_seeds}")
    rows = []
    reports = []
    for beta in betas:
        cfg = cfg_template.with_beta(beta)
        try:
            cell = [
                deviation_experiment(graph, spec, x0, pert_template.with_seed(pert_template.seed + i), cfg)
                for i in range(n_seeds)
            ]
        except FrondError as exc:
            log.warning("beta_sweep: beta=%g failed: %s", beta, exc)
            nan = float("nan")
            rows.append(SweepRow(beta, nan, nan, nan, 0, f"{exc.code}: {exc}"))
            continue
        reports.extend(cell)
        rows.append(
            SweepRow(
                beta=beta,
                median_sup_deviation=float(np.median([r.sup_deviation for r in cell])),
                median_terminal_deviation=float(np.median([r.terminal_deviation for r in cell])),
                bound_factor=float(np.median([r.bound_factor for r in cell])),
                n_ok=len(cell),
            )
        )
    ok = [r for r in rows if r.error is None]
    rho = spearman_or_none([r.beta for r in ok], [r.median_sup_deviation for r in ok])
    return SweepResult(rows=tuple(rows), spearman=rho, complete=len(ok) == len(rows), reports=tuple(reports))
