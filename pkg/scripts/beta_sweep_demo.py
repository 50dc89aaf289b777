"""Deviation versus fractional order on the frozen SBM fixture, next to an expanding control.

The fixture (static GRAND rescaled to a contractive operator) shows what the
acceptance sweep sees: every sup-deviation equals epsilon, reached at t = 0,
while terminal deviations shrink as beta grows.  The control integrates
dX/dt^beta = +L X on the same graph, where the gap grows like
epsilon * E_beta(L t^beta) and the medians do order by beta.

    python3 scripts/beta_sweep_demo.py --config configs/acceptance_sweep.json
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from frond.cli_runner import RunConfig, execute
from frond.fde_solver import FdeConfig, solve_fde_pair
from frond.graph_dynamics import LinearRhs
from frond.robustness_lab import PerturbationSpec, perturb_features, spearman_or_none
from frond.special_fn import mlf_bound


def expanding_control(n_nodes, d, cfg: RunConfig, L: float):
    rhs = LinearRhs(sp.identity(n_nodes, format="csr") * L)
    x0 = np.random.default_rng(cfg.seed + 2).standard_normal((n_nodes, d))
    rows = []
    for beta in cfg.betas:
        fde = FdeConfig(beta, cfg.step_h, cfg.horizon_T)
        sups = []
        for i in range(cfg.n_seeds):
            pert = PerturbationSpec("feature", cfg.epsilon, seed=cfg.seed + 100 + i)
            a, b = solve_fde_pair(rhs, rhs, x0, perturb_features(x0, pert), fde)
            gap = np.linalg.norm((a.states - b.states).reshape(len(a.times), -1), axis=1)
            sups.append(gap.max())
        rows.append((beta, float(np.median(sups)), cfg.epsilon * mlf_bound(beta, L, cfg.horizon_T)))
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(Path(__file__).resolve().parents[1] / "configs" / "acceptance_sweep.json"))
    ap.add_argument("--control-L", type=float, default=0.5)
    args = ap.parse_args(argv)

    data = json.loads(Path(args.config).read_text())
    cfg = RunConfig.from_dict({**data, "subcommand": "sweep"})
    doc = execute(cfg)
    res = doc["results"]

    print(f"fixture: {res['n_nodes']} nodes, {res['n_edges']} edges, {cfg.n_seeds} seeds per beta")
    print(f"{'beta':>5} {'median sup':>12} {'median term':>12} {'E_beta(LT^b)':>14}")
    for r in res["rows"]:
        print(f"{r['beta']:5.2f} {r['median_sup_deviation']:12.6g} {r['median_terminal_deviation']:12.6g} {r['bound_factor']:14.6g}")
    rho = res["spearman_beta_vs_median_sup"]
    print(f"spearman(beta, median sup) = {'undefined' if rho is None else f'{rho:.3f}'}")
    terms = [r["median_terminal_deviation"] for r in res["rows"]]
    print(f"spearman(beta, median terminal) = {spearman_or_none(cfg.betas, terms)}")

    print(f"\ncontrol: dX = +{args.control_L:g} X, same sizes")
    ctrl = expanding_control(res["n_nodes"], cfg.feature_dim, cfg, args.control_L)
    print(f"{'beta':>5} {'median sup':>12} {'eps*E_b':>12}")
    for beta, med, ref in ctrl:
        print(f"{beta:5.2f} {med:12.6g} {ref:12.6g}")
    print(f"spearman(beta, median sup) = {spearman_or_none(cfg.betas, [m for _, m, _ in ctrl])}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
