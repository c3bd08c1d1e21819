"""Fitting layer: OLS against the normal-equations oracle, the piecewise
d-sep fitter, the covariance-structure fitter, and their equivalences."""

import math

import numpy as np
import pytest

from pathsem import (
    Dag,
    Dataset,
    GenerationRecipe,
    NotPositiveDefiniteError,
    RankDeficiencyError,
    ScenarioKind,
    draw_coefficients,
    fit_global,
    fit_piecewise,
    fml,
    generate,
    generate_scenario,
    implied_covariance,
    metric_bundle,
    ols,
    path_table,
    random_dag,
    summary_dict,
)
from pathsem.fit import global_df, global_k_cov

from oracles import ols_normal_equations


# -- ordinary least squares ------------------------------------------------------


def test_ols_noiseless_line():
    x = np.arange(10.0)
    fit = ols(2.0 * x, x[:, None])
    assert fit.coefficients[1] == pytest.approx(2.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.sigma2_hat == pytest.approx(0.0, abs=1e-20)


def test_ols_matches_normal_equations_oracle():
    # small designs, explicit Gauss-Jordan inversion as the reference
    rng = np.random.default_rng(17)
    for _ in range(50):
        n = int(rng.integers(6, 13))
        p = int(rng.integers(1, 4))
        x = rng.normal(size=(n, p))
        y = rng.normal(size=n) + x @ rng.normal(size=p)
        fit = ols(y, x)
        expected = ols_normal_equations(y.tolist(), x.tolist())
        np.testing.assert_allclose(fit.coefficients, expected, atol=1e-10)


def test_ols_type_one_error_rate():
    # independent y: slope significant in about 5% of replicates
    rej = 0
    for s in range(1000):
        rng = np.random.default_rng(s)
        x = rng.normal(size=100)
        y = rng.normal(size=100)
        rej += ols(y, x[:, None]).p_values[0] < 0.05
    assert 0.02 <= rej / 1000 <= 0.08


def test_ols_adjusted_r2_and_k():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(40, 2))
    y = x @ [1.0, -1.0] + rng.normal(size=40)
    fit = ols(y, x)
    n, p = 40, 3
    assert fit.adj_r2 == pytest.approx(1 - (1 - fit.r2) * (n - 1) / (n - p))
    assert fit.adj_r2 <= fit.r2
    assert fit.k_params == p + 1
    assert fit.loglik == pytest.approx(-0.5 * n * (math.log(2 * math.pi * fit.rss / n) + 1))


def test_ols_rank_deficient_raises():
    x = np.ones((20, 2))  # duplicated constant columns
    with pytest.raises(RankDeficiencyError):
        ols(np.arange(20.0), x)


def test_ols_insufficient_rows_raises():
    with pytest.raises(ValueError):
        ols(np.arange(3.0), np.arange(3.0)[:, None] * np.ones((1, 2)))


# -- piecewise fitter ----------------------------------------------------------------


def _exact_data(dag, n_rows, seed):
    rng = np.random.default_rng(seed)
    wdag = draw_coefficients(dag, 2.5, rng, sd_res=1.0)
    return generate(wdag, n_rows, rng)


def test_piecewise_saturated_no_claims():
    dag = Dag(("a", "b", "c"), [("a", "b"), ("a", "c"), ("b", "c")])
    fit = fit_piecewise(dag, _exact_data(dag, 200, 0))
    assert fit.claims == ()
    assert fit.fisher_c == 0.0
    assert fit.df == 0
    assert fit.global_p == 1.0


def test_piecewise_bookkeeping(rng):
    dag = random_dag(6, 0.3, rng)
    fit = fit_piecewise(dag, _exact_data(dag, 300, 1))
    assert fit.df == 2 * len(fit.claims)
    assert fit.total_k == sum(len(dag.parents(v)) + 2 for v in dag.endogenous())
    expected_c = -2 * sum(math.log(p) for p in fit.claim_p_values)
    assert fit.fisher_c == pytest.approx(expected_c)


def test_piecewise_missing_column_rejected(chain_dag):
    data = Dataset(("a", "b"), np.random.default_rng(0).normal(size=(30, 2)))
    with pytest.raises(ValueError, match="missing model column"):
        fit_piecewise(chain_dag, data)


def test_piecewise_rank_deficiency_flags_nonconverged():
    dag = Dag(("a", "b", "c"), [("a", "c"), ("b", "c")])
    rng = np.random.default_rng(2)
    a = rng.normal(size=60)
    data = Dataset(("a", "b", "c"), np.column_stack([a, a, rng.normal(size=60)]))
    fit = fit_piecewise(dag, data)
    assert not fit.converged
    assert math.isnan(fit.global_p)


def test_piecewise_exact_scenario_mostly_accepted():
    accepted = 0
    for s in range(60):
        rng = np.random.default_rng(200 + s)
        dag = random_dag(5, 0.3, rng)
        data, _ = generate_scenario(GenerationRecipe(dag, ScenarioKind.EXACT, 2.5, 1.0), 2000, rng)
        fit = fit_piecewise(dag, data)
        accepted += fit.converged and fit.global_p > 0.05
    assert accepted >= 48  # around 90-95%


# -- implied covariance and the ML discrepancy -----------------------------------------


def test_implied_covariance_no_paths():
    psi = np.diag([1.5, 2.0])
    np.testing.assert_allclose(implied_covariance(np.zeros((2, 2)), psi), psi)


def test_implied_covariance_two_node_golden():
    b = np.array([[0.0, 0.0], [2.0, 0.0]])
    psi = np.eye(2)
    np.testing.assert_allclose(implied_covariance(b, psi), [[1.0, 2.0], [2.0, 5.0]])


def test_implied_covariance_symmetry(rng):
    for _ in range(20):
        dag = random_dag(5, 0.3, rng)
        idx = {v: i for i, v in enumerate(dag.node_names)}
        b = np.zeros((5, 5))
        wdag = draw_coefficients(dag, 2.5, rng)
        for (src, tgt), coef in wdag.coefficients.items():
            b[idx[tgt], idx[src]] = coef
        sigma = implied_covariance(b, np.diag(rng.uniform(0.5, 2.0, size=5)))
        np.testing.assert_allclose(sigma, sigma.T)


def test_fml_perfect_fit_zero():
    s = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert fml(s, s) == 0.0


def test_fml_scalar_golden():
    assert fml([2.0], [1.0]) == pytest.approx(1 - math.log(2), abs=1e-10)


def test_fml_rejects_non_pd():
    with pytest.raises(NotPositiveDefiniteError):
        fml(np.array([[1.0, 2.0], [2.0, 1.0]]), np.eye(2))


def test_fml_minimized_at_ml_solution(rng):
    # perturbing the fitted parameters can only increase the discrepancy
    dag = random_dag(4, 0.3, rng)
    data = _exact_data(dag, 500, 3)
    fit = fit_global(dag, data)
    base = fml(fit.sample_sigma, fit.implied_sigma)
    idx = {v: i for i, v in enumerate(dag.node_names)}
    for src, tgt in list(dag.edges)[:3]:
        for eps in (-1e-3, 1e-3):
            b = fit.b_matrix.copy()
            b[idx[tgt], idx[src]] += eps
            assert fml(fit.sample_sigma, implied_covariance(b, fit.psi)) >= base


# -- global fitter ------------------------------------------------------------------------


def test_global_saturated_perfect_fit():
    dag = Dag(("a", "b", "c"), [("a", "b"), ("a", "c"), ("b", "c")])
    fit = fit_global(dag, _exact_data(dag, 300, 4))
    assert fit.df == 0
    assert fit.chi2 <= 1e-8
    assert fit.global_p == 1.0


def test_global_chain_df():
    chain = Dag(("a", "b", "c"), [("a", "b"), ("b", "c")])
    fit = fit_global(chain, _exact_data(chain, 300, 5))
    assert fit.df == 1  # 6 moments - (1 exo var + 2 paths + 2 resid vars)
    assert global_k_cov(chain) == 5


def test_global_df_monotone_in_edges(rng):
    dag = random_dag(6, 0.2, rng)
    from pathsem import add_edges

    bigger = add_edges(dag, 0.25, rng)
    assert global_df(bigger) < global_df(dag)


def test_global_matches_piecewise_estimates(rng):
    # ML == OLS for recursive observed-variable models
    for _ in range(20):
        dag = random_dag(6, 0.3, rng)
        data = _exact_data(dag, 400, int(rng.integers(1 << 30)))
        pw = fit_piecewise(dag, data)
        gl = fit_global(dag, data)
        pw_est = pw.path_estimates()
        for edge, est in gl.path_estimates.items():
            assert est == pytest.approx(pw_est[edge], rel=1e-8)


def test_global_endo_r2_matches_definition(rng):
    dag = random_dag(5, 0.3, rng)
    data = _exact_data(dag, 500, 6)
    fit = fit_global(dag, data)
    idx = {v: i for i, v in enumerate(dag.node_names)}
    for node, r2 in fit.endo_r2.items():
        i = idx[node]
        assert r2 == pytest.approx(1 - fit.psi[i, i] / fit.sample_sigma[i, i])


def test_global_singular_sample_covariance_rejected():
    dag = Dag(("a", "b", "c"), [("a", "c"), ("b", "c")])
    rng = np.random.default_rng(8)
    a = rng.normal(size=50)
    data = Dataset(("a", "b", "c"), np.column_stack([a, 2 * a, rng.normal(size=50)]))
    fit = fit_global(dag, data)
    assert not fit.converged
    assert fit.failure is not None


def test_global_too_few_rows_rejected(rng):
    dag = random_dag(8, 0.3, rng)  # densest node can have up to 7 parents
    data = _exact_data(dag, 7, 9)
    fit = fit_global(dag, data)
    assert not fit.converged


def test_global_nonconvergence_is_rejection(rng):
    from pathsem import acceptance

    dag = random_dag(8, 0.3, rng)
    fit = fit_global(dag, _exact_data(dag, 7, 10))
    assert not acceptance(fit.global_p, fit.converged)


def test_global_chi2_null_reference():
    # exact-scenario chi2 tracks its nominal chi-square(df): mean within df +- 0.5
    chis, dfs = [], set()
    for rep in range(500):
        rng = np.random.default_rng(7000 + rep)
        dag = random_dag(5, 0.3, rng)
        data = generate(draw_coefficients(dag, 2.5, rng, sd_res=1.0), 10_000, rng)
        fit = fit_global(dag, data)
        chis.append(fit.chi2)
        dfs.add(fit.df)
    assert dfs == {3}  # 15 moments - (7 paths + 5 variances)
    assert abs(np.mean(chis) - 3.0) <= 0.5


def test_path_tests_type_one_calibrated():
    # random scenario: per-path rejection rate near alpha over >= 1000 tests
    rejected = total = 0
    for rep in range(200):
        rng = np.random.default_rng(8000 + rep)
        dag = random_dag(5, 0.3, rng)
        data, _ = generate_scenario(GenerationRecipe(dag, ScenarioKind.RANDOM, 2.5, 1.0), 100, rng)
        fit = fit_piecewise(dag, data)
        p_values = fit.path_p_values()
        rejected += sum(1 for p in p_values if p < 0.05)
        total += len(p_values)
    assert total >= 1000
    assert 0.02 <= rejected / total <= 0.08


# -- bundle and reports --------------------------------------------------------------------


def test_metric_bundle_fields(rng):
    dag = random_dag(5, 0.3, rng)
    data = _exact_data(dag, 400, 11)
    for fit in (fit_piecewise(dag, data), fit_global(dag, data)):
        bundle = metric_bundle(fit, data)
        assert bundle.converged
        assert 0 <= bundle.prop_significant_paths <= 1
        assert 0 <= bundle.avg_r2 <= 1
        assert 0 <= bundle.prop_ci_failed <= 1
        assert bundle.bic == pytest.approx(-2 * bundle.loglik + bundle.k_params * math.log(400))


def test_metric_bundle_nonconverged(rng):
    dag = random_dag(8, 0.3, rng)
    data = _exact_data(dag, 7, 12)
    bundle = metric_bundle(fit_global(dag, data), data)
    assert not bundle.accepted
    assert math.isnan(bundle.avg_r2)


def test_path_table_and_summary(rng):
    dag = random_dag(5, 0.3, rng)
    data = _exact_data(dag, 300, 13)
    for fit, stat in ((fit_piecewise(dag, data), "fisher_c"), (fit_global(dag, data), "chi2")):
        rows = path_table(fit)
        assert len(rows) == len(dag.edges)
        assert set(rows[0]) == {"response", "predictor", "estimate", "se", "statistic", "p"}
        summary = summary_dict(fit)
        assert summary["statistic"]["name"] == stat
        assert set(summary["r2"]) == set(dag.endogenous())
