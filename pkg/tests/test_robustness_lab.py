import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from frond.errors import PerturbationError
from frond.fde_solver import FdeConfig, solve_fde_pair
from frond.graph_dynamics import Graph, LinearRhs, build_rhs, init_dynamics
from frond.inputs import synth_graph
from frond.robustness_lab import (
    PerturbationSpec,
    beta_sweep,
    deviation_experiment,
    functional_epsilon,
    perturb_features,
    perturb_topology,
    spearman_or_none,
)
from frond.special_fn import mlf, mlf_bound

TRIANGLE = Graph.from_edges(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)])


def grand_spec(d=1, seed=0, **kw):
    return init_dynamics("grand", d, seed, **kw)


class TestPerturbationSpec:
    @pytest.mark.parametrize("eps", [0.0, -0.1, float("nan"), float("inf")])
    def test_feature_needs_positive_finite_epsilon(self, eps):
        with pytest.raises(PerturbationError):
            PerturbationSpec("feature", epsilon=eps)

    def test_topology_needs_edits(self):
        with pytest.raises(PerturbationError):
            PerturbationSpec("topology")
        with pytest.raises(PerturbationError):
            PerturbationSpec("topology", edits=((1, 1, 1.0),))

    def test_unknown_kind(self):
        with pytest.raises(PerturbationError):
            PerturbationSpec("noise", epsilon=1.0)


class TestPerturbFeatures:
    @settings(max_examples=40, deadline=None)
    @given(st.floats(1e-8, 1e3), st.integers(0, 2**31), st.integers(1, 20), st.integers(1, 6))
    def test_norm_is_epsilon(self, eps, seed, n, d):
        x0 = np.zeros((n, d))
        x = perturb_features(x0, PerturbationSpec("feature", epsilon=eps, seed=seed))
        assert np.linalg.norm(x - x0) == pytest.approx(eps, rel=1e-12)

    def test_deterministic_and_seed_sensitive(self):
        x0 = np.ones((5, 3))
        a = perturb_features(x0, PerturbationSpec("feature", epsilon=0.1, seed=4))
        b = perturb_features(x0, PerturbationSpec("feature", epsilon=0.1, seed=4))
        c = perturb_features(x0, PerturbationSpec("feature", epsilon=0.1, seed=5))
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_wrong_kind(self):
        with pytest.raises(PerturbationError):
            perturb_features(np.ones((2, 2)), PerturbationSpec("topology", edits=((0, 1, 1.0),)))


class TestPerturbTopology:
    def test_add_to_empty(self):
        g = perturb_topology(Graph.from_edges(3, []), PerturbationSpec("topology", edits=((2, 0, 0.5),)))
        assert g.edges == ((0, 2, 0.5),)

    def test_delete(self):
        g = perturb_topology(TRIANGLE, PerturbationSpec("topology", edits=((1, 0, 0.0),)))
        assert g.edges == ((0, 2, 1.0), (1, 2, 1.0))

    def test_modify(self):
        g = perturb_topology(TRIANGLE, PerturbationSpec("topology", edits=((1, 2, 3.0),)))
        assert g.edges == ((0, 1, 1.0), (0, 2, 1.0), (1, 2, 3.0))
        assert TRIANGLE.edges[-1] == (1, 2, 1.0)

    def test_out_of_range(self):
        with pytest.raises(PerturbationError):
            perturb_topology(TRIANGLE, PerturbationSpec("topology", edits=((0, 9, 1.0),)))


class TestFunctionalEpsilon:
    def test_triangle_edge_deletion_by_hand(self):
        # uniform attention from identical reference features; rows 0 and 1 lose a neighbour
        spec = grand_spec()
        x_ref = np.ones((3, 1))
        cut = TRIANGLE.with_edits([(0, 1, 0.0)])
        rhs, rhs_cut = build_rhs(TRIANGLE, spec, x_ref), build_rhs(cut, spec, x_ref)
        x = np.array([[1.0], [2.0], [3.0]])
        assert functional_epsilon(rhs, rhs_cut, [x]) == pytest.approx(math.sqrt(1.25), rel=1e-14)
        assert functional_epsilon(rhs, rhs_cut, [x, np.zeros((3, 1))]) == pytest.approx(math.sqrt(1.25), rel=1e-14)

    def test_identical_systems(self):
        rhs = build_rhs(TRIANGLE, grand_spec(), np.ones((3, 1)))
        assert functional_epsilon(rhs, rhs, [np.arange(3.0).reshape(3, 1)]) == 0.0

    def test_needs_samples(self):
        rhs = build_rhs(TRIANGLE, grand_spec(), np.ones((3, 1)))
        with pytest.raises(PerturbationError):
            functional_epsilon(rhs, rhs, [])


class TestDeviationExperiment:
    def test_single_node_decay(self):
        # dx = -x: the gap is eps * E_beta(-t^beta), largest at t = 0
        g = Graph.from_edges(1, [])
        cfg = FdeConfig(0.6, 0.05, 5.0)
        rep = deviation_experiment(g, grand_spec(), np.ones((1, 1)), PerturbationSpec("feature", 0.01, seed=3), cfg)
        assert rep.sup_deviation == pytest.approx(0.01, rel=1e-14)
        assert rep.terminal_deviation == pytest.approx(0.01 * mlf(-(5.0**0.6), beta=0.6), rel=2e-2)
        assert rep.lipschitz == pytest.approx(1.0, rel=1e-12) and rep.lipschitz_exact
        assert rep.bound_factor == pytest.approx(mlf_bound(0.6, 1.0, 5.0), rel=1e-14)
        assert rep.fitted_c == pytest.approx(1.0 / rep.bound_factor, rel=1e-12)

    @pytest.mark.parametrize("beta", [0.3, 0.7, 1.0])
    def test_linear_gap_within_bound(self, beta):
        g = synth_graph("er", 15, {"p": 0.3}, seed=2)
        x0 = np.random.default_rng(0).standard_normal((g.n_nodes, 2))
        rep = deviation_experiment(g, grand_spec(2, 1), x0, PerturbationSpec("feature", 1e-6, seed=9), FdeConfig(beta, 0.05, 5.0))
        assert rep.sup_deviation <= rep.epsilon_effective * rep.bound_factor
        assert rep.terminal_deviation <= rep.sup_deviation

    def test_scale_covariance(self):
        g = synth_graph("er", 12, {"p": 0.4}, seed=1)
        x0 = np.random.default_rng(3).standard_normal((g.n_nodes, 3))
        cfg = FdeConfig(0.5, 0.1, 3.0)
        a = deviation_experiment(g, grand_spec(3, 2), x0, PerturbationSpec("feature", 1e-3, seed=1), cfg)
        b = deviation_experiment(g, grand_spec(3, 2), x0, PerturbationSpec("feature", 2e-3, seed=1), cfg)
        assert b.sup_deviation == pytest.approx(2 * a.sup_deviation, rel=1e-10)
        assert b.fitted_c == pytest.approx(a.fitted_c, rel=1e-10)

    def test_no_op_edit_is_null(self):
        spec = PerturbationSpec("topology", edits=((0, 1, 1.0),))
        rep = deviation_experiment(TRIANGLE, grand_spec(), np.array([[1.0], [2.0], [3.0]]), spec, FdeConfig(0.5, 0.1, 2.0))
        assert rep.sup_deviation == 0.0 and rep.epsilon_effective == 0.0 and rep.fitted_c == 0.0

    def test_topology_deletion(self):
        spec = PerturbationSpec("topology", edits=((0, 1, 0.0),))
        x0 = np.array([[1.0], [2.0], [3.0]])
        rep = deviation_experiment(TRIANGLE, grand_spec(), x0, spec, FdeConfig(0.8, 0.1, 2.0))
        cut = TRIANGLE.with_edits(spec.edits)
        at_x0 = functional_epsilon(build_rhs(TRIANGLE, grand_spec(), x0), build_rhs(cut, grand_spec(), x0), [x0])
        assert rep.epsilon_effective >= at_x0 > 0  # x0 is one of the samples
        assert 0 < rep.sup_deviation <= rep.epsilon_effective * rep.bound_factor * 2.0
        assert rep.perturbation == "topology"

    def test_graphcon_uses_feature_block(self):
        g = synth_graph("ring", 6)
        spec = init_dynamics("graphcon", 2, 0)
        x0 = np.random.default_rng(1).standard_normal((6, 2))
        rep = deviation_experiment(g, spec, x0, PerturbationSpec("feature", 0.05, seed=2), FdeConfig(1.0, 0.05, 1.0))
        # the velocity block starts equal, so at t = 0 the gap is exactly eps
        assert rep.sup_deviation >= 0.05 * (1 - 1e-12)
        assert not rep.lipschitz_exact

    def test_lipschitz_target_shared_by_topology_twins(self):
        g = synth_graph("er", 10, {"p": 0.5}, seed=4)
        spec = grand_spec(2, 3, lipschitz_target=0.5)
        x0 = np.random.default_rng(5).standard_normal((g.n_nodes, 2))
        pert = PerturbationSpec("topology", edits=((0, 1, 0.0), (2, 3, 2.0)))
        rep = deviation_experiment(g, spec, x0, pert, FdeConfig(0.7, 0.1, 2.0))
        assert rep.lipschitz == pytest.approx(0.5, rel=1e-6)


def test_spearman_or_none():
    assert spearman_or_none([1, 2, 3], [2, 4, 9]) == pytest.approx(1.0)
    assert spearman_or_none([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert spearman_or_none([1], [1]) is None
    assert spearman_or_none([1, 2, 3], [5, 5, 5]) is None


class TestSweep:
    def setup_method(self):
        self.graph = synth_graph("er", 15, {"p": 0.3}, seed=2)
        self.x0 = np.random.default_rng(0).standard_normal((self.graph.n_nodes, 2))
        self.spec = grand_spec(2, 1, lipschitz_target=0.8)
        self.cfg = FdeConfig(1.0, 0.1, 5.0)

    def test_single_beta_has_no_correlation(self):
        res = beta_sweep(self.graph, self.spec, self.x0, PerturbationSpec("feature", 0.1), self.cfg, [0.5], 3)
        assert res.spearman is None and not res.spearman_defined and res.complete
        assert res.rows[0].n_ok == 3 and len(res.reports) == 3

    def test_bound_column_increases(self):
        res = beta_sweep(self.graph, self.spec, self.x0, PerturbationSpec("feature", 0.1), self.cfg, [0.2, 0.6, 1.0], 2)
        b = res.column("bound_factor")
        assert b[0] < b[1] < b[2]
        assert [r.seed for r in res.reports[:2]] == [0, 1]

    def test_failed_beta_is_recorded(self):
        pert = PerturbationSpec("topology", edits=((0, 99, 1.0),))
        res = beta_sweep(self.graph, self.spec, self.x0, pert, self.cfg, [0.5, 1.0], 1)
        assert not res.complete and res.spearman is None
        assert all(r.error and r.error.startswith("robustness_lab.invalid_perturbation") for r in res.rows)
        assert all(math.isnan(r.median_sup_deviation) for r in res.rows)

    @pytest.mark.parametrize("betas,n", [([], 1), ([0.5, 0.5], 1), ([0.5], 0)])
    def test_invalid(self, betas, n):
        with pytest.raises(PerturbationError):
            beta_sweep(self.graph, self.spec, self.x0, PerturbationSpec("feature", 0.1), self.cfg, betas, n)


def test_expanding_dynamics_order_deviations_by_beta():
    # dx = +0.5 x on one node: the gap is eps * E_beta(0.5 t^beta), increasing in beta at T = 10
    rhs = LinearRhs(sp.identity(1, format="csr") * 0.5)
    eps, sups = 1e-3, []
    for beta in (0.2, 0.4, 0.6, 0.8, 1.0):
        a, b = solve_fde_pair(rhs, rhs, np.ones((1, 1)), np.full((1, 1), 1 + eps), FdeConfig(beta, 0.01, 10.0))
        sups.append(float(np.abs(b.states - a.states).max()))
        assert sups[-1] == pytest.approx(eps * mlf_bound(beta, 0.5, 10.0), rel=5e-2)
    assert spearman_or_none([0.2, 0.4, 0.6, 0.8, 1.0], sups) == pytest.approx(1.0)
