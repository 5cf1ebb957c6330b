import math

import numpy as np
import pytest

from glassy.distributions import OffspringDistribution
from glassy.treegen import TreeBudgetError, TreeSpec, build_tree, level_set


class TestDeltaAry:
    def test_binary_height_three(self):
        t = build_tree(TreeSpec.delta_ary(2, 3))
        assert t.n == 15
        assert level_set(t, 3).size == 8

    def test_unary_is_a_path(self):
        t = build_tree(TreeSpec.delta_ary(1, 5))
        assert t.n == 6
        assert t.height == 5
        assert all(level_set(t, h).size == 1 for h in range(6))

    @pytest.mark.parametrize("delta,height", [(2, 4), (3, 3), (5, 2)])
    def test_level_sizes_are_powers(self, delta, height):
        t = build_tree(TreeSpec.delta_ary(delta, height))
        for h in range(height + 1):
            assert level_set(t, h).size == delta**h
        assert sum(level_set(t, h).size for h in range(height + 1)) == t.n

    def test_height_zero_is_single_vertex(self):
        t = build_tree(TreeSpec.delta_ary(3, 0))
        assert t.n == 1
        assert list(level_set(t, 0)) == [0]


class TestGaltonWatson:
    def test_same_seed_replays_identical_tree(self):
        spec = TreeSpec.galton_watson(OffspringDistribution.poisson(2.0), 5)
        a = build_tree(spec, np.random.default_rng(123))
        b = build_tree(spec, np.random.default_rng(123))
        assert a.n == b.n
        assert np.array_equal(a.parent, b.parent)

    def test_mean_level_size_matches_branching_power(self):
        # E|level(h)| = d^h for a Galton-Watson tree with mean offspring d
        spec = TreeSpec.galton_watson(OffspringDistribution.poisson(2.0), 4)
        rng = np.random.default_rng(7)
        samples = 10**5
        sizes = np.empty(samples)
        for i in range(samples):
            sizes[i] = level_set(build_tree(spec, rng), 4).size
        stderr = sizes.std(ddof=1) / math.sqrt(samples)
        assert abs(sizes.mean() - 16.0) < 3 * stderr

    def test_extinction_gives_empty_level(self):
        # offspring 0 w.p. 1/2 dies out often; find one extinct sample
        zeta = OffspringDistribution.finite_table([0, 2], [0.5, 0.5])
        spec = TreeSpec.galton_watson(zeta, 3)
        rng = np.random.default_rng(0)
        for _ in range(50):
            t = build_tree(spec, rng)
            if t.height < 3:
                assert level_set(t, 3).size == 0
                return
        pytest.fail("no extinct sample in 50 draws")

    def test_budget_overflow_carries_partial_level(self):
        spec = TreeSpec.galton_watson(
            OffspringDistribution.fixed(3), height=10, max_vertices=30
        )
        with pytest.raises(TreeBudgetError) as err:
            build_tree(spec, np.random.default_rng(1))
        assert err.value.vertex_count <= 30
        assert 0 <= err.value.level_reached < 10

    def test_fixed_offspring_equals_delta_ary(self):
        spec = TreeSpec.galton_watson(OffspringDistribution.fixed(2), 3)
        t = build_tree(spec, np.random.default_rng(9))
        ref = build_tree(TreeSpec.delta_ary(2, 3))
        assert np.array_equal(t.parent, ref.parent)

    def test_needs_rng(self):
        spec = TreeSpec.galton_watson(OffspringDistribution.poisson(1.0), 2)
        with pytest.raises(ValueError):
            build_tree(spec)


class TestSpecValidation:
    def test_bad_kind(self):
        with pytest.raises(ValueError):
            TreeSpec("weird", 2)

    def test_delta_must_be_positive(self):
        with pytest.raises(ValueError):
            TreeSpec.delta_ary(0, 3)

    def test_negative_height(self):
        with pytest.raises(ValueError):
            TreeSpec.delta_ary(2, -1)
