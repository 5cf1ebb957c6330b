import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from glassy.distributions import (
    CouplingDistribution,
    OffspringDistribution,
    classic_ks_degree,
    critical_beta,
    expected_gamma_sq,
    sample_coupling,
    sample_couplings_array,
    sample_offspring,
    sample_offspring_array,
    xi_lambda4,
)
from glassy.model import GibbsParams

LN3 = math.log(3.0)

# E[tanh^2(beta*J/2)] for standard-normal J, frozen from adaptive quadrature
# (scipy.integrate.quad at epsabs=1e-14) cross-checked against a 1e7-draw
# Monte Carlo mean at beta=1.
GAUSSIAN_ORACLE = {
    0.5: 0.055822310240481364,
    1.0: 0.17351614343237182,
    2.0: 0.39429449039784126,
}


class TestExpectedGammaSq:
    def test_rademacher_ln3_is_quarter(self):
        report = expected_gamma_sq(GibbsParams(LN3, CouplingDistribution.rademacher()))
        assert report.expected_gamma_sq == pytest.approx(0.25, abs=1e-15)
        assert report.delta_ks == pytest.approx(4.0, abs=1e-12)
        assert report.method == "closed_form"

    def test_beta_zero_maps_to_infinite_threshold(self):
        for phi in (CouplingDistribution.standard_gaussian(), CouplingDistribution.rademacher()):
            report = expected_gamma_sq(GibbsParams(0.0, phi))
            assert report.expected_gamma_sq == 0.0
            assert math.isinf(report.delta_ks)

    @pytest.mark.parametrize("beta", sorted(GAUSSIAN_ORACLE))
    def test_gaussian_quadrature_matches_frozen_oracle(self, beta):
        report = expected_gamma_sq(
            GibbsParams(beta, CouplingDistribution.standard_gaussian())
        )
        assert report.expected_gamma_sq == pytest.approx(GAUSSIAN_ORACLE[beta], abs=1e-13)
        assert report.method == "quadrature"
        assert report.quadrature_nodes == 200

    def test_gaussian_quadrature_agrees_with_monte_carlo(self):
        params = GibbsParams(1.0, CouplingDistribution.standard_gaussian())
        quad = expected_gamma_sq(params)
        mc = expected_gamma_sq(
            params, "monte_carlo", mc_samples=10**6, rng=np.random.default_rng(11)
        )
        assert abs(mc.expected_gamma_sq - quad.expected_gamma_sq) < 4 * mc.estimated_error

    def test_too_few_quadrature_nodes_rejected(self):
        params = GibbsParams(1.0, CouplingDistribution.standard_gaussian())
        with pytest.raises(ValueError):
            expected_gamma_sq(params, quadrature_nodes=4)

    def test_monotone_in_beta_for_ferromagnetic_kinds(self):
        betas = np.linspace(0.0, 6.0, 25)
        for phi in (CouplingDistribution.rademacher(), CouplingDistribution.point_mass(1.3)):
            values = [
                expected_gamma_sq(GibbsParams(b, phi)).expected_gamma_sq for b in betas
            ]
            assert all(b >= a for a, b in zip(values, values[1:]))
            assert all(0.0 <= v <= 1.0 for v in values)


@given(st.floats(min_value=-30.0, max_value=30.0))
def test_tanh_half_equals_logistic_ratio(x):
    # tanh(x/2) and (1 - e^x)/(1 + e^x) are the same function up to sign
    ratio = (1.0 - math.exp(x)) / (1.0 + math.exp(x))
    assert abs(math.tanh(0.5 * x) ** 2 - ratio**2) < 1e-14


class TestXiLambda4:
    def test_rademacher_ln3(self):
        assert xi_lambda4(GibbsParams(LN3, CouplingDistribution.rademacher())) == (
            pytest.approx(0.25, abs=1e-14)
        )

    def test_uniform_matrix_at_beta_zero(self):
        assert xi_lambda4(GibbsParams(0.0, CouplingDistribution.standard_gaussian())) == (
            pytest.approx(0.0, abs=1e-15)
        )

    @pytest.mark.parametrize(
        "phi",
        [
            CouplingDistribution.standard_gaussian(),
            CouplingDistribution.rademacher(),
            CouplingDistribution.point_mass(-0.7),
            CouplingDistribution.two_point(-1.2, 0.4, 0.3),
            CouplingDistribution.finite_table([-1.0, 0.2, 2.0], [0.2, 0.5, 0.3]),
        ],
    )
    def test_equals_expected_gamma_sq(self, phi):
        rng = np.random.default_rng(3)
        for beta in rng.uniform(0.0, 6.0, size=6):
            params = GibbsParams(float(beta), phi)
            assert abs(
                xi_lambda4(params) - expected_gamma_sq(params).expected_gamma_sq
            ) < 1e-10


class TestClassicKsDegree:
    def test_direct_formula(self):
        assert classic_ks_degree(0.5) == pytest.approx(4.0)
        assert classic_ks_degree(1.0) == pytest.approx(1.0)

    def test_zero_eigenvalue_gives_inf(self):
        assert math.isinf(classic_ks_degree(0.0))

    def test_matches_random_coupling_threshold_for_point_mass(self):
        # lambda_2 of the explicit 2x2 matrix via an eigenvalue solve
        rng = np.random.default_rng(5)
        for _ in range(20):
            beta = float(rng.uniform(0.5, 5.0))
            j0 = float(rng.uniform(0.5, 3.0)) * (1 if rng.random() < 0.5 else -1)
            p = 1.0 / (1.0 + math.exp(-beta * j0))
            eig = np.linalg.eigvalsh(np.array([[p, 1 - p], [1 - p, p]]))
            lam2 = min(eig, key=abs)
            via_matrix = classic_ks_degree(float(lam2))
            via_expectation = expected_gamma_sq(
                GibbsParams(beta, CouplingDistribution.point_mass(j0))
            ).delta_ks
            assert via_matrix == pytest.approx(via_expectation, abs=1e-10)


class TestCriticalBeta:
    def test_rademacher_degree_four_is_ln3(self):
        beta = critical_beta(CouplingDistribution.rademacher(), 4.0)
        assert beta == pytest.approx(LN3, abs=1e-9)

    def test_large_degree_pushes_beta_to_zero(self):
        beta = critical_beta(CouplingDistribution.rademacher(), 1e8)
        assert beta < 1e-3

    def test_gaussian_root_reproduces_degree(self):
        phi = CouplingDistribution.standard_gaussian()
        beta = critical_beta(phi, 4.0, tol=1e-8)
        report = expected_gamma_sq(GibbsParams(beta, phi))
        assert report.delta_ks == pytest.approx(4.0, abs=1e-6)

    def test_bad_bracket_rejected(self):
        with pytest.raises(ValueError):
            critical_beta(CouplingDistribution.rademacher(), 4.0, bracket=(2.0, 3.0))


class TestSamplers:
    def test_point_mass_is_degenerate(self):
        rng = np.random.default_rng(0)
        phi = CouplingDistribution.point_mass(2.5)
        assert all(sample_coupling(phi, rng) == 2.5 for _ in range(5))

    def test_rademacher_mean_within_standard_error(self):
        draws = sample_couplings_array(
            CouplingDistribution.rademacher(), 10**6, np.random.default_rng(1)
        )
        assert set(np.unique(draws)) == {-1.0, 1.0}
        assert abs(draws.mean()) < 4.0 / math.sqrt(10**6)

    def test_gaussian_variance_within_one_percent(self):
        draws = sample_couplings_array(
            CouplingDistribution.standard_gaussian(), 10**6, np.random.default_rng(2)
        )
        assert abs(draws.var() - 1.0) < 0.01

    def test_two_point_frequencies(self):
        phi = CouplingDistribution.two_point(-1.0, 2.0, 0.25)
        draws = sample_couplings_array(phi, 10**5, np.random.default_rng(3))
        assert abs((draws == 2.0).mean() - 0.25) < 0.01

    def test_fixed_offspring(self):
        zeta = OffspringDistribution.fixed(3)
        assert sample_offspring(zeta, np.random.default_rng(0)) == 3
        assert zeta.mean == 3.0 and zeta.second_moment == 9.0

    def test_poisson_offspring_mean(self):
        zeta = OffspringDistribution.poisson(2.0)
        draws = sample_offspring_array(zeta, 10**6, np.random.default_rng(4))
        assert abs(draws.mean() - 2.0) < 4.0 * math.sqrt(2.0) / 10**3
        assert zeta.second_moment == pytest.approx(6.0)

    def test_offspring_table_frequency(self):
        zeta = OffspringDistribution.finite_table([0, 4], [0.5, 0.5])
        draws = sample_offspring_array(zeta, 10**6, np.random.default_rng(5))
        assert abs((draws == 4).mean() - 0.5) < 0.005
        assert zeta.mean == pytest.approx(2.0)


class TestValidation:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValueError):
            CouplingDistribution.finite_table([1.0, 2.0], [0.6, 0.6])

    def test_negative_probability_rejected(self):
        with pytest.raises(ValueError):
            CouplingDistribution.finite_table([1.0, 2.0], [1.4, -0.4])

    def test_beta_must_be_finite_nonnegative(self):
        with pytest.raises(ValueError):
            GibbsParams(-1.0, CouplingDistribution.rademacher())
        with pytest.raises(ValueError):
            GibbsParams(math.nan, CouplingDistribution.rademacher())

    def test_offspring_needs_positive_mean(self):
        with pytest.raises(ValueError):
            OffspringDistribution.fixed(0)
