import itertools
import math

import numpy as np
import pytest

from glassy.broadcast import _propagate_batch, stay_probabilities
from glassy.distributions import CouplingDistribution, OffspringDistribution
from glassy.estimators import (
    ESTIMATOR_KINDS,
    delta_ary_ratio_bound,
    estimate_root,
    evaluate_estimator,
    flip_moment_gap,
    flip_second_moment,
    gw_ratio_bound,
    leaf_weights,
)
from glassy.inference import GibbsInstance
from glassy.model import CouplingAssignment, RootedTree, SpinConfig
from glassy.treegen import TreeSpec, build_tree

LN3 = math.log(3.0)


def instance_on(tree, beta, couplings) -> GibbsInstance:
    return GibbsInstance(tree, beta, CouplingAssignment(couplings))


class TestEvaluateEstimator:
    def test_flip_single_edge(self):
        inst = instance_on(RootedTree([-1, 0]), 1.0, [LN3])
        value = evaluate_estimator("flip_majority", inst, 1, SpinConfig([1], [1]))
        assert value == pytest.approx(0.5, abs=1e-15)

    def test_majority_counts_leaves(self):
        tree = build_tree(TreeSpec.delta_ary(2, 3))
        inst = instance_on(tree, 1.0, np.ones(tree.edge_count))
        leaves = tree.level(3)
        config = SpinConfig(leaves, np.ones(leaves.size, dtype=np.int8))
        assert evaluate_estimator("majority", inst, 3, config) == 8.0

    def test_flip_vanishes_at_beta_zero(self):
        tree = build_tree(TreeSpec.delta_ary(2, 2))
        inst = instance_on(tree, 0.0, np.ones(tree.edge_count))
        leaves = tree.level(2)
        rng = np.random.default_rng(0)
        for _ in range(5):
            tau = 2 * rng.integers(0, 2, size=leaves.size) - 1
            assert evaluate_estimator("flip_majority", inst, 2, SpinConfig(leaves, tau)) == 0.0

    def test_parity_kind_flips_odd_heights(self):
        tree = build_tree(TreeSpec.delta_ary(1, 3))
        inst = instance_on(tree, 1.0, [-1.0, -1.0, -1.0])
        config = SpinConfig([3], [1])
        assert evaluate_estimator("parity_flipped_majority", inst, 3, config) == -1.0

    def test_sign_weighted_uses_coupling_signs(self):
        tree = RootedTree([-1, 0, 1])
        inst = instance_on(tree, 2.0, [-1.5, 2.0])
        assert evaluate_estimator("sign_weighted_majority", inst, 2, SpinConfig([2], [1])) == -1.0

    def test_incomplete_config_rejected(self):
        tree = build_tree(TreeSpec.delta_ary(2, 1))
        inst = instance_on(tree, 1.0, np.ones(2))
        with pytest.raises(ValueError):
            evaluate_estimator("majority", inst, 1, SpinConfig([1], [1]))

    def test_unknown_kind_rejected(self):
        inst = instance_on(RootedTree([-1, 0]), 1.0, [1.0])
        with pytest.raises(ValueError):
            evaluate_estimator("median", inst, 1, SpinConfig([1], [1]))


class TestEstimateRoot:
    def test_sign_of_statistic(self):
        inst = instance_on(RootedTree([-1, 0]), 1.0, [LN3])
        assert estimate_root("flip_majority", inst, 1, SpinConfig([1], [1])) == 1
        assert estimate_root("flip_majority", inst, 1, SpinConfig([1], [-1])) == -1

    def test_tie_resolves_plus(self):
        inst = instance_on(RootedTree([-1, 0]), 0.0, [1.0])
        assert estimate_root("flip_majority", inst, 1, SpinConfig([1], [-1]), "plus") == 1

    def test_tie_coin_uses_stream(self):
        inst = instance_on(RootedTree([-1, 0]), 0.0, [1.0])
        outcomes = {
            estimate_root("flip_majority", inst, 1, SpinConfig([1], [1]), "coin",
                          np.random.default_rng(s))
            for s in range(20)
        }
        assert outcomes == {1, -1}

    def test_saturated_instance_recovers_root(self):
        tree = build_tree(TreeSpec.delta_ary(2, 3))
        inst = instance_on(tree, 1.0, np.full(tree.edge_count, 1000.0))
        stay = stay_probabilities(tree, 1.0, inst.couplings)
        u = np.random.default_rng(1).random((10**4, tree.n))
        roots = np.where(u[:, 0] < 0.5, 1, -1)
        spins = _propagate_batch(tree, stay, u, roots)
        leaves = tree.level(3)
        hits = 0
        for row, root in zip(spins, roots):
            guess = estimate_root("flip_majority", inst, 3, SpinConfig(leaves, row[leaves]))
            hits += guess == root
        assert hits == 10**4


class TestMoments:
    def test_gap_binary_height_one(self):
        tree = build_tree(TreeSpec.delta_ary(2, 1))
        inst = instance_on(tree, 1.0, [LN3, LN3])
        assert flip_moment_gap(inst, 1) == pytest.approx(1.0, abs=1e-14)

    def test_gap_beta_zero(self):
        tree = build_tree(TreeSpec.delta_ary(2, 2))
        inst = instance_on(tree, 0.0, np.ones(tree.edge_count))
        assert flip_moment_gap(inst, 2) == 0.0

    def test_second_moment_binary_height_one(self):
        tree = build_tree(TreeSpec.delta_ary(2, 1))
        inst = instance_on(tree, 1.0, [LN3, LN3])
        assert flip_second_moment(inst, 1) == pytest.approx(0.625, abs=1e-14)

    def test_second_moment_beta_zero(self):
        tree = build_tree(TreeSpec.delta_ary(2, 2))
        inst = instance_on(tree, 0.0, np.ones(tree.edge_count))
        assert flip_second_moment(inst, 2) == 0.0

    def test_moments_match_conditioned_broadcast_monte_carlo(self):
        tree = build_tree(TreeSpec.delta_ary(2, 3))
        rng = np.random.default_rng(6)
        couplings = rng.normal(size=tree.edge_count)
        inst = instance_on(tree, 1.1, couplings)
        leaves, weights = leaf_weights("flip_majority", inst, 3)
        stay = stay_probabilities(tree, 1.1, inst.couplings)
        n_runs = 2 * 10**5

        def mc_mean(root_spin):
            u = np.random.default_rng(7 + root_spin).random((n_runs, tree.n))
            roots = np.full(n_runs, root_spin, dtype=np.int8)
            spins = _propagate_batch(tree, stay, u, roots)
            values = spins[:, leaves].astype(np.float64) @ weights
            return values.mean(), values.std(ddof=1) / math.sqrt(n_runs)

        plus_mean, plus_err = mc_mean(1)
        minus_mean, minus_err = mc_mean(-1)
        gap_mc = plus_mean - minus_mean
        gap_err = math.hypot(plus_err, minus_err)
        assert abs(flip_moment_gap(inst, 3) - gap_mc) < 4 * gap_err

        u = np.random.default_rng(10).random((n_runs, tree.n))
        roots = np.where(u[:, 0] < 0.5, 1, -1)
        spins = _propagate_batch(tree, stay, u, roots)
        sq = (spins[:, leaves].astype(np.float64) @ weights) ** 2
        assert abs(flip_second_moment(inst, 3) - sq.mean()) < (
            4 * sq.std(ddof=1) / math.sqrt(n_runs)
        )


class TestEstimatorReductions:
    def _sign_agreement(self, couplings_value, kind_a, kind_b):
        # identical signs on every leaf configuration of trees with <= 8 leaves
        for delta, h in [(2, 1), (2, 2), (2, 3), (1, 4)]:
            tree = build_tree(TreeSpec.delta_ary(delta, h))
            leaves = tree.level(h)
            if leaves.size > 8:
                continue
            inst = instance_on(tree, 1.3, np.full(tree.edge_count, couplings_value))
            for tau in itertools.product((-1, 1), repeat=leaves.size):
                config = SpinConfig(leaves, np.array(tau, dtype=np.int8))
                assert estimate_root(kind_a, inst, h, config) == estimate_root(
                    kind_b, inst, h, config
                )

    def test_ferromagnetic_flip_reduces_to_majority(self):
        self._sign_agreement(+1.0, "flip_majority", "majority")

    def test_antiferromagnetic_flip_reduces_to_parity_majority(self):
        self._sign_agreement(-1.0, "flip_majority", "parity_flipped_majority")


class TestRatioBounds:
    def test_double_threshold_floor_is_half(self):
        phi = CouplingDistribution.rademacher()
        for h in (1, 2, 4, 7):
            bound = delta_ary_ratio_bound(8, LN3, phi, h)  # delta_ks = 4
            assert bound.floor == pytest.approx(0.5, abs=1e-12)
            assert bound.ratio >= bound.floor - 1e-12

    def test_tiny_margin_floor(self):
        phi = CouplingDistribution.rademacher()
        beta = 2.0 * math.atanh(math.sqrt(1.0 / 3.9999996))  # delta_ks just below 4
        bound = delta_ary_ratio_bound(4, beta, phi, 3)
        assert bound.floor == pytest.approx(1e-7, rel=1e-2)

    def test_at_threshold_rejected(self):
        with pytest.raises(ValueError):
            delta_ary_ratio_bound(4, LN3, CouplingDistribution.rademacher(), 3)

    def test_fixed_offspring_reduces_to_tree_floor(self):
        phi = CouplingDistribution.rademacher()
        value = gw_ratio_bound(OffspringDistribution.fixed(8), LN3, phi)
        assert value == pytest.approx(0.5, abs=1e-12)  # M = 1, delta = 1

    def test_poisson_second_moment_penalty(self):
        phi = CouplingDistribution.rademacher()
        value = gw_ratio_bound(OffspringDistribution.poisson(8.0), LN3, phi)
        assert value == pytest.approx(0.5 / (1 + 1 / 8.0), abs=1e-12)

    def test_below_threshold_rejected(self):
        with pytest.raises(ValueError):
            gw_ratio_bound(OffspringDistribution.poisson(2.0), LN3,
                           CouplingDistribution.rademacher())


class TestLeafWeights:
    def test_all_kinds_defined(self):
        tree = build_tree(TreeSpec.delta_ary(2, 2))
        inst = instance_on(tree, 1.0, np.ones(tree.edge_count) * 0.5)
        for kind in ESTIMATOR_KINDS:
            leaves, weights = leaf_weights(kind, inst, 2)
            assert leaves.size == weights.size == 4


def test_expected_tv_dominates_moment_ratio_above_threshold():
    # the scanned expected TV sits above the averaged moment ratio of the
    # flip statistic whenever the degree exceeds the threshold
    from glassy.scan import ScanConfig, run_scan

    phi = CouplingDistribution.rademacher()
    config = ScanConfig(
        model="delta_ary", phi=phi, beta_grid=(LN3,), degree_grid=(8.0,),
        h_grid=(2, 3), trials_per_cell=2000, master_seed=31,
    )
    for row in run_scan(config):
        bound = delta_ary_ratio_bound(8, LN3, phi, row.h)
        assert row.tv_mean >= bound.ratio - 4.0 * row.tv_stderr
        assert bound.ratio >= bound.floor
