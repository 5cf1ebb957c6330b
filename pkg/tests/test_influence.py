import math

import numpy as np
import pytest

from glassy.distributions import CouplingDistribution, sample_couplings_array
from glassy.inference import GibbsInstance, tv_leaf_conditional_exact
from glassy.influence import (
    down_coupling_simulate,
    gradient_sup_check,
    influences,
    tv_upper_bound,
)
from glassy.model import CouplingAssignment, RootedTree, path_edges
from glassy.treegen import TreeSpec, build_tree

LN3 = math.log(3.0)


def path_instance(betaj_per_edge: list[float]) -> GibbsInstance:
    n = len(betaj_per_edge) + 1
    return GibbsInstance(
        RootedTree([-1] + list(range(n - 1))), 1.0, CouplingAssignment(betaj_per_edge)
    )


class TestInfluences:
    def test_ferromagnetic_half(self):
        inst = path_instance([LN3])
        inf = influences(inst)
        assert inf.gamma[0] == pytest.approx(0.5, abs=1e-15)
        assert inf.signed_gamma[0] == pytest.approx(0.5, abs=1e-15)

    def test_antiferromagnetic_mirror(self):
        inf = influences(path_instance([-LN3]))
        assert inf.gamma[0] == pytest.approx(0.5, abs=1e-15)
        assert inf.signed_gamma[0] == pytest.approx(-0.5, abs=1e-15)

    def test_zero_coupling_kills_influence(self):
        inf = influences(path_instance([0.0]))
        assert inf.gamma[0] == 0.0 and inf.signed_gamma[0] == 0.0

    def test_gamma_is_absolute_signed_gamma(self):
        rng = np.random.default_rng(0)
        tree = build_tree(TreeSpec.delta_ary(3, 3))
        couplings = CouplingAssignment(rng.normal(size=tree.edge_count))
        inf = influences(GibbsInstance(tree, 1.7, couplings))
        assert np.array_equal(inf.gamma, np.abs(inf.signed_gamma))


class TestGradientSupCheck:
    def test_maximum_at_zero_for_ln3(self):
        grid = np.arange(-10.0, 10.01, 0.1)
        peak = gradient_sup_check(1.0, LN3, grid)
        assert peak == pytest.approx(0.5, abs=1e-12)

    def test_identically_zero_coupling(self):
        grid = np.linspace(-5, 5, 101)
        assert gradient_sup_check(1.0, 0.0, grid) == 0.0

    def test_grid_maximum_never_exceeds_closed_form(self):
        grid = np.linspace(-12, 12, 4801)
        for beta, j in [(1.0, -2.0), (0.5, 3.0), (2.0, 0.3), (1.0, 40.0)]:
            closed = abs(math.tanh(0.5 * beta * j))
            value = gradient_sup_check(beta, j, grid)
            assert value <= closed + 1e-12
            at_zero = gradient_sup_check(beta, j, np.array([0.0]))
            assert at_zero == pytest.approx(closed, abs=1e-12)


class TestTvUpperBound:
    def test_two_edge_path(self):
        assert tv_upper_bound(path_instance([LN3, LN3]), 2) == pytest.approx(0.25, abs=1e-15)

    def test_beta_zero(self):
        tree = build_tree(TreeSpec.delta_ary(2, 2))
        inst = GibbsInstance(tree, 0.0, CouplingAssignment(np.ones(tree.edge_count)))
        assert tv_upper_bound(inst, 2) == 0.0

    def test_binary_tree_height_one(self):
        tree = build_tree(TreeSpec.delta_ary(2, 1))
        inst = GibbsInstance(tree, 1.0, CouplingAssignment([LN3, LN3]))
        assert tv_upper_bound(inst, 1) == pytest.approx(math.sqrt(0.5), abs=1e-14)

    def test_deep_path_does_not_underflow_to_garbage(self):
        # 400 edges with gamma^2 = 0.25 each: product is ~1e-241, sum of one term
        inst = path_instance([LN3] * 400)
        value = tv_upper_bound(inst, 400)
        assert value == pytest.approx(0.5**400, rel=1e-10)

    def test_exact_zero_preserved(self):
        inst = path_instance([LN3, 0.0, LN3])
        assert tv_upper_bound(inst, 3) == 0.0

    def test_dominates_exact_tv_on_random_instances(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(2, 11))
            parent = [-1] + [int(rng.integers(0, v)) for v in range(1, n)]
            tree = RootedTree(parent)
            inst = GibbsInstance(
                tree, float(rng.uniform(0, 4)), CouplingAssignment(rng.normal(size=n - 1))
            )
            h = max(1, tree.height)
            assert tv_leaf_conditional_exact(inst, h) <= tv_upper_bound(inst, h) + 1e-12

    def test_square_averages_to_branching_power(self):
        # the squared bound, averaged over coupling draws on the complete
        # delta-ary tree, is (delta * E[gamma^2])^h
        delta, h, beta = 2, 3, 1.0
        phi = CouplingDistribution.standard_gaussian()
        expected_gamma_sq = 0.17351614343237182  # frozen quadrature value
        tree = build_tree(TreeSpec.delta_ary(delta, h))
        rng = np.random.default_rng(11)
        n_draws = 40000
        values = np.empty(n_draws)
        for i in range(n_draws):
            couplings = CouplingAssignment(
                sample_couplings_array(phi, tree.edge_count, rng)
            )
            values[i] = tv_upper_bound(GibbsInstance(tree, beta, couplings), h) ** 2
        target = (delta * expected_gamma_sq) ** h
        stderr = values.std(ddof=1) / math.sqrt(n_draws)
        assert abs(values.mean() - target) < 4 * stderr


class TestDownCoupling:
    def test_beta_zero_never_propagates(self):
        tree = build_tree(TreeSpec.delta_ary(2, 2))
        inst = GibbsInstance(tree, 0.0, CouplingAssignment(np.ones(tree.edge_count)))
        freq = down_coupling_simulate(inst, 2, 2000, seed=0)
        assert all(f == 0.0 for f in freq.values())

    def test_two_edge_path_product(self):
        inst = path_instance([LN3, LN3])
        trials = 10**6
        freq = down_coupling_simulate(inst, 2, trials, seed=1)
        stderr = math.sqrt(0.25 * 0.75 / trials)
        assert abs(freq[2] - 0.25) < 4 * stderr

    def test_saturated_couplings_always_disagree(self):
        tree = build_tree(TreeSpec.delta_ary(2, 2))
        inst = GibbsInstance(tree, 1.0, CouplingAssignment(np.full(tree.edge_count, 1000.0)))
        freq = down_coupling_simulate(inst, 2, 500, seed=2)
        assert all(f == 1.0 for f in freq.values())

    def test_leaf_frequency_matches_path_product(self):
        rng = np.random.default_rng(3)
        tree = build_tree(TreeSpec.delta_ary(2, 3))
        couplings = CouplingAssignment(rng.normal(size=tree.edge_count))
        inst = GibbsInstance(tree, 1.0, couplings)
        gamma = influences(inst).gamma
        trials = 2 * 10**5
        freq = down_coupling_simulate(inst, 3, trials, seed=4)
        for v, f in freq.items():
            target = 1.0
            for child in path_edges(tree, 0, v):
                target *= gamma[child - 1]
            stderr = math.sqrt(max(target * (1 - target), 1e-12) / trials)
            assert abs(f - target) < 4 * stderr + 1e-6

    def test_empty_level(self):
        assert down_coupling_simulate(path_instance([1.0]), 9, 10, seed=0) == {}
