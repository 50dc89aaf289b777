"""Command line front door: ``frond {mlf,solve,deviation,sweep}``.

A run is described by one flat JSON config; every key can be overridden by
the flag of the same name (underscores become dashes).  Results go to a JSON
document written atomically, optionally with a CSV table.

Seeds: the root ``seed`` spawns graph (seed + 1), features (seed + 2),
dynamics weights (seed + 3) and perturbation directions
(seed + 100 + i for the i-th repetition).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, FrondError, OutputError
from .fde_solver import FdeConfig, solve_fde, write_trajectory
from .graph_dynamics import Graph, build_rhs, init_dynamics, lipschitz_of_rhs, stack_graphcon_state
from .inputs import load_features, load_graph, synth_graph
from .robustness_lab import PerturbationSpec, beta_sweep, deviation_experiment
from .special_fn import MlfParams, bound_monotonicity_scan, mlf

log = logging.getLogger("frond")

SUBCOMMANDS = ("mlf", "solve", "deviation", "sweep")
SEED_OFFSETS = {"graph": 1, "features": 2, "dynamics": 3, "perturbation": 100}
LOG_ENV = "FROND_LOG_LEVEL"


@dataclass
class RunConfig:
    subcommand: str = "sweep"
    seed: int = 0
    # graph: a file, or a synthetic generator when graph_path is null
    graph_path: Optional[str] = None
    graph_kind: str = "sbm"
    graph_n: int = 50
    er_p: float = 0.1
    sbm_blocks: int = 2
    sbm_p_in: float = 0.2
    sbm_p_out: float = 0.02
    # features: a CSV, or seeded standard normal of width feature_dim
    features_path: Optional[str] = None
    feature_dim: int = 4
    # dynamics
    dynamics_kind: str = "grand"
    attention_mode: str = "static"
    d_k: Optional[int] = None
    gamma: float = 1.0
    alpha: float = 1.0
    activation: str = "tanh"
    aggregation: str = "normalized_adjacency"
    lipschitz_target: Optional[float] = None
    # solver
    beta: float = 1.0
    step_h: float = 0.1
    horizon_T: float = 10.0
    # perturbation
    perturbation_kind: str = "feature"
    epsilon: float = 0.1
    edits: list = field(default_factory=list)
    # sweep
    betas: list = field(default_factory=lambda: [0.2, 0.4, 0.6, 0.8, 1.0])
    n_seeds: int = 20
    # mlf
    z: Optional[float] = None
    mlf_alpha: float = 1.0
    bound_L: list = field(default_factory=list)
    # outputs
    output_path: Optional[str] = None
    csv_path: Optional[str] = None
    trajectory_path: Optional[str] = None
    log_level: Optional[str] = None

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"subcommand must be one of {SUBCOMMANDS}, got {self.subcommand!r}")
        for b in [self.beta] + list(self.betas):
            if not (isinstance(b, (int, float)) and 0 < b <= 1):
                raise ConfigError(f"beta values must lie in (0, 1], got {b!r}")
        if self.subcommand != "mlf" and self.n_seeds < 1:
            raise ConfigError(f"n_seeds must be >= 1, got {self.n_seeds}")
        for name in ("graph_path", "features_path"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{name}: no such file {p!r}")
        if self.subcommand == "mlf" and self.z is None and not self.bound_L:
            raise ConfigError("mlf needs z or bound_L")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _derived_seed(cfg: RunConfig, what: str) -> int:
    return cfg.seed + SEED_OFFSETS[what]


def _graph(cfg: RunConfig) -> Graph:
    if cfg.graph_path is not None:
        return load_graph(cfg.graph_path)
    params = {"p": cfg.er_p, "blocks": cfg.sbm_blocks, "p_in": cfg.sbm_p_in, "p_out": cfg.sbm_p_out}
    return synth_graph(cfg.graph_kind, cfg.graph_n, params, seed=_derived_seed(cfg, "graph"))


def _features(cfg: RunConfig, graph: Graph) -> np.ndarray:
    if cfg.features_path is not None:
        return load_features(cfg.features_path, graph.n_nodes)
    rng = np.random.default_rng(_derived_seed(cfg, "features"))
    return rng.standard_normal((graph.n_nodes, cfg.feature_dim))


def _dynamics(cfg: RunConfig, d: int):
    return init_dynamics(
        cfg.dynamics_kind,
        d,
        _derived_seed(cfg, "dynamics"),
        d_k=cfg.d_k,
        gamma=cfg.gamma,
        alpha=cfg.alpha,
        activation=cfg.activation,
        attention_mode=cfg.attention_mode,
        aggregation=cfg.aggregation,
        lipschitz_target=cfg.lipschitz_target,
    )


def _perturbation(cfg: RunConfig) -> PerturbationSpec:
    return PerturbationSpec(
        kind=cfg.perturbation_kind,
        epsilon=cfg.epsilon,
        edits=tuple(tuple(e) for e in cfg.edits),
        seed=_derived_seed(cfg, "perturbation"),
    )


def _finite_or_none(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return _finite_or_none(obj)


def _cmd_mlf(cfg: RunConfig) -> tuple[dict, Optional[list]]:
    out: dict[str, Any] = {}
    table = None
    if cfg.z is not None:
        out["value"] = mlf(cfg.z, MlfParams(beta=cfg.beta, alpha=cfg.mlf_alpha))
    if cfg.bound_L:
        scans = []
        table = [["L", "T", "beta", "bound"]]
        for L in cfg.bound_L:
            s = bound_monotonicity_scan(L, cfg.horizon_T, cfg.betas)
            scans.append(
                {"L": s.L, "T": s.T, "betas": list(s.betas), "bounds": list(s.bounds),
                 "strictly_increasing": s.strictly_increasing}
            )
            table.extend([s.L, s.T, b, v] for b, v in s.rows())
        out["bound_scans"] = scans
    return out, table


def _cmd_solve(cfg: RunConfig) -> tuple[dict, Optional[list]]:
    graph = _graph(cfg)
    x0 = _features(cfg, graph)
    spec = _dynamics(cfg, x0.shape[1])
    rhs = build_rhs(graph, spec, x0)
    s0 = stack_graphcon_state(x0) if spec.kind == "graphcon" else x0
    traj = solve_fde(rhs, s0, FdeConfig(cfg.beta, cfg.step_h, cfg.horizon_T))
    if cfg.trajectory_path is not None:
        _atomic_write(cfg.trajectory_path, lambda p: write_trajectory(traj, p))
    feats = traj.states[:, graph.n_nodes :] if spec.kind == "graphcon" else traj.states
    norms = np.linalg.norm(feats.reshape(len(traj.times), -1), axis=1)
    out = {
        "n_nodes": graph.n_nodes,
        "n_edges": graph.n_edges,
        "n_steps": traj.n_steps,
        "final_time": float(traj.times[-1]),
        "feature_norm_initial": float(norms[0]),
        "feature_norm_final": float(norms[-1]),
        "trajectory_path": cfg.trajectory_path,
    }
    if spec.kind != "graphcon" and spec.attention_mode == "static":
        out["lipschitz"] = lipschitz_of_rhs(rhs).value
    table = [["t", "feature_norm"]] + [[float(t), float(v)] for t, v in zip(traj.times, norms)]
    return out, table


def _cmd_deviation(cfg: RunConfig) -> tuple[dict, Optional[list]]:
    graph = _graph(cfg)
    x0 = _features(cfg, graph)
    spec = _dynamics(cfg, x0.shape[1])
    rep = deviation_experiment(graph, spec, x0, _perturbation(cfg), FdeConfig(cfg.beta, cfg.step_h, cfg.horizon_T))
    d = rep.to_dict()
    d.update(n_nodes=graph.n_nodes, n_edges=graph.n_edges)
    return d, [list(d.keys()), list(d.values())]


def _cmd_sweep(cfg: RunConfig) -> tuple[dict, Optional[list]]:
    graph = _graph(cfg)
    x0 = _features(cfg, graph)
    spec = _dynamics(cfg, x0.shape[1])
    res = beta_sweep(
        graph, spec, x0, _perturbation(cfg), FdeConfig(cfg.betas[0], cfg.step_h, cfg.horizon_T), cfg.betas, cfg.n_seeds
    )
    rows = [dataclasses.asdict(r) for r in res.rows]
    bounds = [r.bound_factor for r in res.rows]
    out = {
        "n_nodes": graph.n_nodes,
        "n_edges": graph.n_edges,
        "rows": rows,
        "spearman_beta_vs_median_sup": res.spearman,
        "spearman_defined": res.spearman_defined,
        "bound_factor_strictly_increasing": all(b2 > b1 for b1, b2 in zip(bounds, bounds[1:])),
        "complete": res.complete,
    }
    header = ["beta", "median_sup_deviation", "median_terminal_deviation", "bound_factor", "n_ok"]
    table = [header] + [[r[k] for k in header] for r in rows]
    return out, table


_COMMANDS = {"mlf": _cmd_mlf, "solve": _cmd_solve, "deviation": _cmd_deviation, "sweep": _cmd_sweep}


def _atomic_write(path, writer) -> None:
    """Hand ``writer`` a temporary path in the target directory, then rename over ``path``."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        os.close(fd)
    except OSError as exc:
        raise OutputError(f"cannot create output in {path.parent}: {exc}") from exc
    try:
        writer(tmp)
        os.replace(tmp, path)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_text(path, text: str) -> None:
    _atomic_write(path, lambda p: Path(p).write_text(text))


def result_payload(doc: dict) -> dict:
    """The result document without its timing fields."""
    return {k: v for k, v in doc.items() if k != "timing"}


def execute(cfg: RunConfig) -> dict:
    """Run one subcommand and return the result document (nothing written)."""
    cfg.validate()
    start = time.perf_counter()
    results, table = _COMMANDS[cfg.subcommand](cfg)
    doc = {
        "artifact": "frond",
        "version": __version__,
        "subcommand": cfg.subcommand,
        "config": cfg.to_dict(),
        "results": results,
        "timing": {"wall_clock_s": time.perf_counter() - start},
    }
    doc = _clean(doc)
    if table is not None:
        doc["_table"] = table
    return doc


def _table_csv(table: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in table:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def run(cfg: RunConfig) -> int:
    """Execute and persist; returns the process exit status."""
    _configure_logging(cfg.log_level)
    try:
        doc = execute(cfg)
        table = doc.pop("_table", None)
        text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
        if cfg.csv_path is not None and table is not None:
            _write_text(cfg.csv_path, _table_csv(table))
        if cfg.output_path is not None:
            _write_text(cfg.output_path, text)
        else:
            sys.stdout.write(text)
    except FrondError as exc:
        sys.stderr.write(json.dumps({"error": exc.to_record()}) + "\n")
        return exc.exit_status
    return 0


def _configure_logging(level: Optional[str]) -> None:
    name = (level or os.environ.get(LOG_ENV) or "WARNING").upper()
    logging.basicConfig(level=getattr(logging, name, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _parse_list(text: str) -> list:
    text = text.strip()
    if text.startswith("["):
        return json.loads(text)
    return [float(v) for v in text.split(",") if v.strip()]


def _flag_type(f: dataclasses.Field):
    default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
    if isinstance(default, list):
        return _parse_list
    if isinstance(default, bool):
        return lambda s: s.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    if f.name in ("z", "lipschitz_target"):
        return float
    if f.name == "d_k":
        return int
    return str


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"usage: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="frond", description="Fractional graph dynamics experiments.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="JSON config; flags override its keys")
    for f in dataclasses.fields(RunConfig):
        if f.name == "subcommand":
            continue
        parser.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=_flag_type(f), default=None)
    return parser


def config_from_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    data: dict[str, Any] = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise OutputError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {args.config} must hold a JSON object")
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            data[f.name] = v
    data["subcommand"] = args.subcommand
    return RunConfig.from_dict(data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = config_from_args(argv)
    except FrondError as exc:
        sys.stderr.write(json.dumps({"error": exc.to_record()}) + "\n")
        return exc.exit_status
    except (TypeError, ValueError) as exc:
        err = ConfigError(str(exc))
        sys.stderr.write(json.dumps({"error": err.to_record()}) + "\n")
        return err.exit_status
    return run(cfg)
