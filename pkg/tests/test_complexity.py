import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import ALL_FAMILIES, family_id, figure_config, random_eta
from oddarm.complexity import (
    ArmConfiguration,
    DegenerateConfigurationError,
    binary_kl,
    kappa_tilde,
    lambda_from_hat,
    lambda_hat,
    lower_bound,
    lower_bound_asymptote,
    phi,
    phi_derivative,
    ratio,
    solve_lambda_star,
)
from oddarm.expfam import Bernoulli, GaussianKnownVar, InvalidParameterError, VectorGaussian


class TestKappaTilde:
    def test_endpoints(self):
        np.testing.assert_allclose(kappa_tilde(1.0, [0.3], [0.7], 8), [0.3])
        np.testing.assert_allclose(kappa_tilde(0.0, [0.3], [0.7], 8), [0.7])

    def test_gaussian_mean_example(self):
        r = ratio(8)
        lh = 1.0 / (1.0 + math.sqrt(r))
        assert lh == pytest.approx(0.5193, abs=1e-4)
        lam = lambda_from_hat(lh, 8)
        np.testing.assert_allclose(kappa_tilde(lam, [0.0], [1.0], 8), [1 - lh], rtol=1e-12)
        assert 1 - lh == pytest.approx(0.4807, abs=1e-4)

    @settings(max_examples=100, deadline=None)
    @given(lam=st.floats(0.0, 1.0), K=st.integers(3, 50))
    def test_lambda_hat_inverse(self, lam, K):
        assert lambda_from_hat(lambda_hat(lam, K), K) == pytest.approx(lam, abs=1e-12)


class TestPhi:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_vanishes_at_endpoints(self, n):
        cfg = figure_config(n)
        assert phi(0.0, cfg) == pytest.approx(0.0, abs=1e-12)
        assert phi(1.0, cfg) == pytest.approx(0.0, abs=1e-12)

    def test_gaussian_mean_value(self):
        assert phi(0.4808, figure_config(1)) == pytest.approx(0.1156, abs=1e-4)

    @pytest.mark.parametrize("family", ALL_FAMILIES, ids=family_id)
    def test_derivative_nonincreasing(self, family):
        rng = np.random.default_rng(21)
        grid = np.linspace(1e-12, 1 - 1e-12, 1000)
        for _ in range(100):
            e1, e2 = random_eta(family, rng), random_eta(family, rng)
            cfg = ArmConfiguration(family, 0, e1, e2, int(rng.integers(3, 12)))
            d = np.array([phi_derivative(x, cfg) for x in grid])
            assert np.all(np.diff(d) <= 1e-9 * np.maximum(1.0, np.abs(d[:-1])))

    def test_derivative_matches_finite_difference(self):
        cfg = figure_config(4)
        for x in (0.1, 0.35, 0.6, 0.9):
            fd = (phi(x + 1e-6, cfg) - phi(x - 1e-6, cfg)) / 2e-6
            assert phi_derivative(x, cfg) == pytest.approx(fd, rel=1e-5)


class TestSolver:
    @pytest.mark.parametrize("n,expected", [(1, 0.1156), (3, 0.2556), (4, 0.3495)],
                             ids=["gaussian-mean", "bernoulli", "vector-gaussian"])
    def test_published_values(self, n, expected):
        assert solve_lambda_star(figure_config(n)).d_star == pytest.approx(expected, abs=1e-3)

    @pytest.mark.parametrize("n,name", [(1, "gaussian_known_var"), (2, "gaussian_zero_mean"),
                                        (3, "bernoulli"), (4, "vector_gaussian")])
    def test_matches_brute_force(self, n, name):
        cfg = figure_config(n)
        res = solve_lambda_star(cfg)
        d, lam = oracles.brute_force_d_star(oracles.textbook_kl(name), cfg.kappa1, cfg.kappa2, 8)
        assert res.d_star == pytest.approx(d, abs=1e-7)
        assert res.odd_mass == pytest.approx(lam, abs=1e-4)

    def test_gaussian_mean_closed_form(self):
        for K in (3, 4, 8, 20, 100):
            f = GaussianKnownVar()
            res = solve_lambda_star(ArmConfiguration(f, 0, [0.0], [1.0], K))
            assert res.lambda_hat_star == pytest.approx(1 / (1 + math.sqrt(ratio(K))), abs=1e-8)

    def test_degenerate(self):
        with pytest.raises(DegenerateConfigurationError):
            solve_lambda_star(ArmConfiguration(Bernoulli(), 0, [0.2], [0.2], 5))

    def test_configuration_validation(self):
        with pytest.raises(InvalidParameterError):
            ArmConfiguration(Bernoulli(), 0, [0.2], [0.3], 2)
        with pytest.raises(InvalidParameterError):
            ArmConfiguration(Bernoulli(), 5, [0.2], [0.3], 5)

    @pytest.mark.parametrize("family", ALL_FAMILIES, ids=family_id)
    def test_result_invariants(self, family):
        rng = np.random.default_rng(22)
        for _ in range(100):
            e1, e2 = random_eta(family, rng), random_eta(family, rng)
            K = int(rng.integers(3, 15))
            odd = int(rng.integers(K))
            cfg = ArmConfiguration(family, odd, e1, e2, K)
            res = solve_lambda_star(cfg)
            lam = res.lambda_star
            assert abs(lam.sum() - 1.0) < 1e-12
            assert np.all(lam > 0)
            rest = np.delete(lam, odd)
            np.testing.assert_allclose(rest, rest[0], rtol=0, atol=1e-15)
            # stationarity and the identity at the optimum
            d1 = family.kl(e1, res.eta_tilde)
            d2 = family.kl(e2, res.eta_tilde)
            assert abs(d1 - ratio(K) * d2) < 1e-8
            assert abs(res.d_star - d1) < 1e-8
            assert abs(phi_derivative(lam[odd], cfg)) < 1e-8
            np.testing.assert_allclose(res.kappa_tilde, kappa_tilde(lam[odd], cfg.kappa1, cfg.kappa2, K),
                                       rtol=1e-12, atol=1e-12)

    def test_relabel_symmetry(self):
        cfg = figure_config(4)
        base = solve_lambda_star(cfg)
        for i in range(8):
            res = solve_lambda_star(cfg.relabel(i))
            assert res.d_star == pytest.approx(base.d_star, abs=1e-14)
            np.testing.assert_allclose(res.lambda_star, np.roll(base.lambda_star, i), atol=1e-15)

    def test_symmetric_vector_gaussian(self):
        # swapping the mean sign leaves every divergence unchanged
        vg = VectorGaussian()
        a = solve_lambda_star(ArmConfiguration(vg, 0, vg.natural_param(1.0, 2.0), vg.natural_param(-1.0, 3.0), 6))
        b = solve_lambda_star(ArmConfiguration(vg, 0, vg.natural_param(-1.0, 2.0), vg.natural_param(1.0, 3.0), 6))
        assert a.d_star == pytest.approx(b.d_star, rel=1e-12)


class TestLowerBound:
    def test_binary_kl_examples(self):
        assert binary_kl(0.5) == 0.0
        assert binary_kl(0.01) == pytest.approx(0.98 * math.log(99), rel=1e-12)
        assert binary_kl(0.01) == pytest.approx(4.503, abs=1e-3)

    def test_binary_kl_small_u(self):
        ratios = [binary_kl(u) / -math.log(u) for u in (1e-3, 1e-6, 1e-12)]
        assert ratios[0] < ratios[1] < ratios[2] <= 1.0
        assert ratios[-1] == pytest.approx(1.0, abs=1e-10)

    def test_binary_kl_domain(self):
        with pytest.raises(InvalidParameterError):
            binary_kl(0.0)

    def test_asymptote_examples(self):
        assert lower_bound_asymptote(250, 0.1156) == pytest.approx(2163, abs=1.0)
        d = solve_lambda_star(figure_config(1)).d_star
        assert lower_bound_asymptote(250, d) == pytest.approx(2163.5, abs=0.5)
        assert lower_bound_asymptote(50, 0.4807) == pytest.approx(104.01, abs=0.01)

    def test_bound_at_half(self):
        assert lower_bound(0.5, 0.2) == 0.0

    @settings(max_examples=100, deadline=None)
    @given(alpha=st.floats(1e-9, 0.499), d=st.floats(0.01, 5.0))
    def test_bound_below_asymptote(self, alpha, d):
        # d_b(a, 1-a) <= log(1/a), so the exact bound sits under the asymptote
        assert lower_bound(alpha, d) <= lower_bound_asymptote(-math.log(alpha), d) + 1e-12
