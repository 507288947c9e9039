import numpy as np
import pytest

from pgrestore.theory import (
    TikhonovProblem,
    bias_variance_closed_form,
    claim1_check,
    claim2_check,
    claim3_check,
    claim4_check,
    condition_numbers,
    data_weight_matrix,
    mc_bias_variance,
    random_conforming_problem,
    run_verifier_battery,
    theorem1_check,
    tikhonov_estimate,
    verify_claim2,
    verify_theorem1,
)
from oracles import gradient_descent_minimize


def small_problem(seed=0, **kwargs):
    return random_conforming_problem(np.random.default_rng(seed), **kwargs)


class TestTikhonovEstimate:
    def test_huge_prior_weight_shrinks_to_zero(self, rng):
        p = small_problem(1)
        p = TikhonovProblem(
            a_matrix=p.a_matrix, d_matrix=p.d_matrix, beta_prior=1e8,
            sigma_e=p.sigma_e, x_star=p.x_star, delta=p.delta,
        )
        y = rng.standard_normal(p.shape[0])
        assert np.linalg.norm(tikhonov_estimate(p, "wls", y)) <= 1e-3

    def test_identity_ls_closed_form(self, rng):
        n = 5
        beta = 0.7
        p = TikhonovProblem(
            a_matrix=np.eye(n), d_matrix=np.eye(n), beta_prior=beta,
            sigma_e=0.1, x_star=np.zeros(n), delta=0.5,
        )
        y = rng.standard_normal(n)
        np.testing.assert_allclose(
            tikhonov_estimate(p, "ls", y), y / (1.0 + beta), atol=1e-12
        )

    def test_matches_gradient_descent_oracle(self, rng):
        p = small_problem(2, m=4, n=6)
        y = rng.standard_normal(4)
        for mode in ("ls", "bp", "wls"):
            w = data_weight_matrix(p, mode)
            hess = p.a_matrix.T @ w @ p.a_matrix + p.beta_prior * p.d_matrix.T @ p.d_matrix

            def grad(x, w=w):
                return p.a_matrix.T @ w @ (p.a_matrix @ x - y) + \
                    p.beta_prior * p.d_matrix.T @ p.d_matrix @ x

            oracle = gradient_descent_minimize(
                grad, np.zeros(6), np.linalg.eigvalsh(hess).max()
            )
            got = tikhonov_estimate(p, mode, y)
            assert np.linalg.norm(got - oracle) <= 1e-6 * (1 + np.linalg.norm(oracle))

    def test_stationarity(self, rng):
        p = small_problem(3)
        y = rng.standard_normal(p.shape[0])
        for mode in ("ls", "bp", "wls"):
            x_hat = tikhonov_estimate(p, mode, y)
            w = data_weight_matrix(p, mode)
            grad = p.a_matrix.T @ w @ (p.a_matrix @ x_hat - y) + \
                p.beta_prior * p.d_matrix.T @ p.d_matrix @ x_hat
            assert np.linalg.norm(grad) <= 1e-8

    def test_eigenbasis_violation_rejected(self, rng):
        p = small_problem(4)
        skewed = p.d_matrix.copy()
        skewed[0, -1] += 1.0
        with pytest.raises(ValueError, match="eigenbasis"):
            TikhonovProblem(
                a_matrix=p.a_matrix, d_matrix=skewed, beta_prior=p.beta_prior,
                sigma_e=p.sigma_e, x_star=p.x_star, delta=p.delta,
            )


class TestBiasVariance:
    def test_zero_noise_zero_variance(self):
        p = small_problem(5, sigma_e=0.0)
        for mode in ("ls", "bp", "wls"):
            _, v = bias_variance_closed_form(p, mode)
            assert v == 0.0

    def test_unit_singular_values_collapse_modes(self, rng):
        # orthonormal rows: all three weights act identically
        m, n = 4, 7
        u, _ = np.linalg.qr(rng.standard_normal((m, m)))
        v, _ = np.linalg.qr(rng.standard_normal((n, n)))
        a = u @ np.eye(m, n) @ v.T
        d = v @ np.diag(rng.uniform(0.5, 2.0, n)) @ v.T
        p = TikhonovProblem(
            a_matrix=a, d_matrix=d, beta_prior=0.4, sigma_e=0.1,
            x_star=rng.standard_normal(n), delta=0.5,
        )
        results = [bias_variance_closed_form(p, mode) for mode in ("ls", "bp", "wls")]
        for b2, v_ in results[1:]:
            assert b2 == pytest.approx(results[0][0], rel=1e-10)
            assert v_ == pytest.approx(results[0][1], rel=1e-10)

    def test_monte_carlo_agreement(self):
        p = small_problem(6)
        for mode in ("ls", "bp", "wls"):
            closed_b2, closed_v = bias_variance_closed_form(p, mode)
            mc = mc_bias_variance(p, mode, n_draws=20000, seed=99)
            assert abs(mc.bias_sq - closed_b2) <= 3.0 * mc.se_bias_sq
            assert abs(mc.var - closed_v) <= 3.0 * mc.se_var
            assert abs(mc.mse - (closed_b2 + closed_v)) <= 3.0 * mc.se_mse

    def test_mse_is_bias_plus_variance(self):
        p = small_problem(7)
        b2, v = bias_variance_closed_form(p, "wls")
        mc = mc_bias_variance(p, "wls", n_draws=20000, seed=5)
        assert mc.mse == pytest.approx(b2 + v, rel=0.05)


class TestTheorem1:
    def test_conforming_instance_orders_strictly(self):
        report = verify_theorem1(small_problem(8))
        assert report.passed
        assert report.bias_sq_bp < report.bias_sq_wls < report.bias_sq_ls
        assert report.var_ls < report.var_wls < report.var_bp

    def test_delta_near_one_collapses_wls_to_ls(self):
        p = small_problem(9, delta=1.0 - 1e-9)
        report = verify_theorem1(p)
        assert abs(report.var_wls - report.var_ls) <= 1e-6 * report.var_ls

    def test_equal_singular_values_rejected(self, rng):
        m, n = 3, 5
        u, _ = np.linalg.qr(rng.standard_normal((m, m)))
        v, _ = np.linalg.qr(rng.standard_normal((n, n)))
        a = 0.5 * (u @ np.eye(m, n) @ v.T)
        d = v @ np.diag(rng.uniform(0.5, 2.0, n)) @ v.T
        p = TikhonovProblem(
            a_matrix=a, d_matrix=d, beta_prior=0.3, sigma_e=0.1,
            x_star=rng.standard_normal(n), delta=0.5,
        )
        with pytest.raises(ValueError, match=r"assumption \(b\)"):
            verify_theorem1(p)

    def test_out_of_range_singular_values_rejected(self):
        p = small_problem(10)
        scaled = TikhonovProblem(
            a_matrix=2.0 * p.a_matrix, d_matrix=p.d_matrix, beta_prior=p.beta_prior,
            sigma_e=p.sigma_e, x_star=p.x_star, delta=p.delta,
        )
        with pytest.raises(ValueError, match=r"assumption \(b\)"):
            verify_theorem1(scaled)

    def test_nonzero_eta_rejected(self):
        p = small_problem(11)
        with_eta = TikhonovProblem(
            a_matrix=p.a_matrix, d_matrix=p.d_matrix, beta_prior=p.beta_prior,
            sigma_e=p.sigma_e, x_star=p.x_star, delta=p.delta, eta=0.1,
        )
        with pytest.raises(ValueError, match=r"assumption \(c\)"):
            verify_theorem1(with_eta)

    def test_hundred_random_instances(self):
        for i in range(100):
            report = verify_theorem1(small_problem(4000 + i))
            assert report.passed


class TestConditionNumbers:
    def test_ls_ratio(self):
        _, _, k_ls = condition_numbers(np.array([1.0, 0.5]), 1.0, 1.0)
        assert k_ls == pytest.approx(4.0, rel=1e-12)

    def test_wls_formula_value(self):
        _, k_wls, _ = condition_numbers(np.array([1.0, 0.5]), 0.5, 1.0)
        assert k_wls == pytest.approx(1.6, rel=1e-12)

    def test_bp_is_one_and_ordering(self, rng):
        for i in range(20):
            inst = np.random.default_rng(500 + i)
            lam = np.sort(inst.uniform(0.2, 1.5, size=4))[::-1]
            if lam[0] - lam[-1] < 0.05:
                continue
            k_bp, k_wls, k_ls = condition_numbers(lam, float(inst.uniform(0.1, 0.9)), 1.0)
            assert k_bp == 1.0
            assert k_bp < k_wls < k_ls

    def test_degenerate_lambda_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            condition_numbers(np.array([0.7, 0.7, 0.7]), 0.5, 1.0)
        with pytest.raises(ValueError):
            condition_numbers(np.array([1.0, -0.5]), 0.5, 1.0)
        with pytest.raises(ValueError):
            condition_numbers(np.array([0.5, 1.0]), 0.5, 1.0)


class TestClaim2:
    def test_identity_weight(self, rng):
        a = rng.standard_normal((3, 6))
        result = verify_claim2(a, np.eye(3))
        assert result.relative_residual <= 1e-12

    def test_gram_inverse_weight(self, rng):
        a = rng.standard_normal((4, 9))
        result = verify_claim2(a, np.linalg.inv(a @ a.T))
        assert result.relative_residual <= 1e-8

    def test_scaled_identity_weight(self, rng):
        a = rng.standard_normal((3, 6))
        result = verify_claim2(a, 2.0 * np.eye(3))
        assert result.relative_residual <= 1e-10
        # P extends the eigenvalues with ones on the null modes
        eigs = np.sort(np.linalg.eigvalsh(result.p_matrix))
        np.testing.assert_allclose(eigs, [1, 1, 1, 2, 2, 2], atol=1e-10)

    def test_non_commuting_weight_rejected(self, rng):
        a = rng.standard_normal((4, 6))
        w = rng.standard_normal((4, 4))
        w = w @ w.T + 4 * np.eye(4)  # PD but generic
        with pytest.raises(ValueError, match="commute"):
            verify_claim2(a, w)


class TestBattery:
    def test_individual_checks_pass(self):
        assert claim1_check().passed
        assert claim2_check().passed
        assert claim3_check().passed
        assert claim4_check().passed

    def test_theorem_check_small(self):
        result = theorem1_check(n_instances=10, mc_instances=3, mc_draws=4000)
        assert result.passed

    def test_battery_selection(self):
        results = run_verifier_battery(["claim4"])
        assert [r.name for r in results] == ["claim4"]
        with pytest.raises(ValueError, match="unknown check"):
            run_verifier_battery(["claim9"])

    def test_report_line_format(self):
        line = claim4_check(n_instances=3).line()
        assert line.startswith("claim4: PASS")
