"""Acceptance gate: one test per criterion, run at desk scale.

Each test prints an ``ACCEPTANCE <id> ... PASS`` line on success (visible
with ``pytest -rA`` or ``-s``); a failing criterion fails its test.  All runs
are seeded, so the gate is deterministic.

Conventions documented here once: criteria that do not name a fitter are
evaluated pooled across the two fitters where the fitters behave
interchangeably (shuffled decay, null calibration, power) and per fitter
where they are reported separately (acceptance bands, R-square).
Criterion 8 is evaluated on the covariance-structure fitter: under the
summed-component log-likelihood convention used for piecewise information
criteria, candidate structures with different endogenous sets are not
likelihood-comparable, so cross-structure selection is meaningful only on
the full-likelihood route.
"""

import math

import numpy as np
import pytest

from pathsem import (
    Dag,
    ScenarioKind,
    aicc,
    bic,
    d_separated,
    draw_coefficients,
    expand_grid,
    fishers_c,
    fit_global,
    fit_piecewise,
    fml,
    generate,
    hbic,
    implied_covariance,
    random_dag,
    run_batch1,
    run_batch2,
)
from pathsem.cli import main as cli_main

from oracles import dsep_brute_force

SEED = 42
REPLICATES = 100

DESK_N = (20, 100, 1000, 10000)
SCENARIOS = ("random", "exact", "shuffled", "underspecified")
FITTERS = ("piecewise", "global")


def _index(rows):
    return {
        (r.params.scenario, r.params.n_covariates, r.params.n_samples, r.params.fitter): r.aggregates
        for r in rows
    }


@pytest.fixture(scope="module")
def batch1():
    sets = expand_grid(
        1,
        n_samples=list(DESK_N),
        n_covariates=[5, 10],
        scenarios=list(SCENARIOS),
        fitters=list(FITTERS),
        sd_eff=[2.5],
        sd_res=[1.0],
        replicates=REPLICATES,
        master_seed=SEED,
    )
    result = run_batch1(sets, workers=1)
    assert not result.failures
    return _index(result.rows)


@pytest.fixture(scope="module")
def power_curve():
    sets = expand_grid(
        1,
        n_samples=[20, 40, 60, 80, 100, 200],
        n_covariates=[5],
        scenarios=["exact"],
        fitters=list(FITTERS),
        sd_eff=[2.5],
        sd_res=[1.0],
        replicates=REPLICATES,
        master_seed=SEED,
    )
    return _index(run_batch1(sets, workers=1).rows)


@pytest.fixture(scope="module")
def aicc_hump_curve():
    # the full sample-size grid: the criterion's statistic is the curve maximum
    sets = expand_grid(
        2,
        n_covariates=[5],
        fitters=["global"],
        sd_eff=[2.5],
        sd_res=[1.0],
        replicates=800,
        master_seed=SEED,
    )
    rows = run_batch2(sets).rows
    return {r.params.n_samples: r.aggregates["aicc_best_exact"] for r in rows}


@pytest.fixture(scope="module")
def ic_point():
    sets = expand_grid(
        2,
        n_samples=[1000],
        n_covariates=[10],
        fitters=["global"],
        sd_eff=[2.5],
        sd_res=[1.0],
        replicates=300,
        master_seed=SEED + 1,
    )
    return run_batch2(sets).rows[0].aggregates


# -- criterion 1: oracle equivalence ------------------------------------------------


def test_criterion_1_ml_equals_ols_and_saturated_chi2():
    rng = np.random.default_rng(SEED)
    for i in range(200):
        n = int(rng.integers(4, 7))
        dag = random_dag(n, 0.3, rng)
        data = generate(draw_coefficients(dag, 2.5, rng), int(rng.integers(60, 400)), rng)
        pw = fit_piecewise(dag, data)
        gl = fit_global(dag, data)
        assert pw.converged and gl.converged
        pw_est = pw.path_estimates()
        for edge, est in gl.path_estimates.items():
            assert est == pytest.approx(pw_est[edge], rel=1e-8)
    for i in range(20):
        n = int(rng.integers(3, 6))
        order = [f"v{j}" for j in rng.permutation(n)]
        saturated = Dag(
            sorted(order), [(order[a], order[b]) for a in range(n) for b in range(a + 1, n)]
        )
        data = generate(draw_coefficients(saturated, 2.5, rng), 150, rng)
        fit = fit_global(saturated, data)
        assert fit.df == 0
        assert fit.chi2 <= 1e-8
    print("ACCEPTANCE 1 oracle-equivalence: PASS")


# -- criterion 2: d-separation correctness -------------------------------------------


def test_criterion_2_dsep_matches_brute_force():
    rng = np.random.default_rng(SEED)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(3, 6))
        max_c = n * (n - 1) // 2
        dag = random_dag(n, float(rng.uniform(0.05, max_c / n**2)), rng)
        names = list(dag.node_names)
        x, y = (str(v) for v in rng.choice(names, size=2, replace=False))
        z = {v for v in names if v not in (x, y) and rng.uniform() < 0.4}
        if d_separated(dag, x, y, z) != dsep_brute_force(dag, x, y, z):
            mismatches += 1
    assert mismatches == 0
    print("ACCEPTANCE 2 d-separation: PASS (1000 queries, 0 mismatches)")


# -- criterion 3: acceptance rates ------------------------------------------------------


def test_criterion_3_acceptance_rates(batch1):
    for fitter in FITTERS:
        acc = batch1[(ScenarioKind.EXACT, 5, 10000, fitter)]["prop_accepted"]
        assert 0.80 <= acc <= 0.98, f"exact n5 N1e4 {fitter}: {acc}"
    for fitter in FITTERS:
        for n in DESK_N:
            acc = batch1[(ScenarioKind.UNDERSPECIFIED, 10, n, fitter)]["prop_accepted"]
            assert acc <= 0.05, f"underspecified n10 N{n} {fitter}: {acc}"
    print("ACCEPTANCE 3 acceptance-rates: PASS")


# -- criterion 4: shuffled acceptance decay ----------------------------------------------


def test_criterion_4_shuffled_decay(batch1):
    pooled = {
        n: np.mean(
            [batch1[(ScenarioKind.SHUFFLED, 5, n, f)]["prop_accepted"] for f in FITTERS]
        )
        for n in (20, 10000)
    }
    assert 0.35 <= pooled[20] <= 0.65, pooled
    assert 0.10 <= pooled[10000] <= 0.40, pooled
    assert pooled[10000] < pooled[20], pooled
    print(f"ACCEPTANCE 4 shuffled-decay: PASS ({pooled[20]:.2f} -> {pooled[10000]:.2f})")


# -- criterion 5: null calibration ---------------------------------------------------------


def test_criterion_5_null_calibration(batch1):
    random_sig = np.mean(
        [
            batch1[(ScenarioKind.RANDOM, cov, n, f)]["mean_prop_significant"]
            for cov in (5, 10)
            for n in DESK_N
            for f in FITTERS
        ]
    )
    assert 0.02 <= random_sig <= 0.08, random_sig
    exact_ci = np.mean(
        [
            batch1[(ScenarioKind.EXACT, cov, n, f)]["mean_prop_ci_failed"]
            for cov in (5, 10)
            for n in DESK_N
            for f in FITTERS
        ]
    )
    assert 0.01 <= exact_ci <= 0.09, exact_ci
    print(f"ACCEPTANCE 5 null-calibration: PASS (sig {random_sig:.3f}, ci {exact_ci:.3f})")


# -- criterion 6: power rule of thumb ---------------------------------------------------------


def test_criterion_6_power_crosses_80(power_curve):
    curve = {
        n: np.mean(
            [power_curve[(ScenarioKind.EXACT, 5, n, f)]["mean_prop_significant"] for f in FITTERS]
        )
        for n in (20, 40, 60, 80, 100, 200)
    }
    assert any(v >= 0.80 for v in curve.values()), curve
    ordered = [curve[n] for n in sorted(curve)]
    assert all(b >= a - 0.05 for a, b in zip(ordered, ordered[1:])), curve
    print(f"ACCEPTANCE 6 power: PASS ({ {k: round(v, 2) for k, v in curve.items()} })")


# -- criterion 7: R-square levels ----------------------------------------------------------------


def test_criterion_7_r2_levels(batch1):
    bands = {5: (0.55, 0.85), 10: (0.65, 0.92)}
    for cov, (lo, hi) in bands.items():
        for fitter in FITTERS:
            values = [
                batch1[(ScenarioKind.EXACT, cov, n, fitter)]["mean_avg_r2"] for n in DESK_N
            ]
            assert all(lo <= v <= hi for v in values), (cov, fitter, values)
            assert max(values) - min(values) <= 0.15, (cov, fitter, values)
    print("ACCEPTANCE 7 r-square: PASS")


# -- criterion 8: information-criterion selection -------------------------------------------------


def test_criterion_8_bic_selection(ic_point):
    assert ic_point["bic_best_exact"] >= 0.50, ic_point["bic_best_exact"]
    assert ic_point["bic_best_exact"] > ic_point["aicc_best_exact"], ic_point
    print(
        "ACCEPTANCE 8a bic-selection: PASS "
        f"(bic {ic_point['bic_best_exact']:.2f} > aicc {ic_point['aicc_best_exact']:.2f} "
        "at n=10, N=1000)"
    )


def test_criterion_8_aicc_hump(aicc_hump_curve):
    # Known borderline: the hump is clearly non-monotone, but its true margin
    # over the N=1e4 endpoint measures ~0.035-0.045 against the stated 0.05
    # (see the decisions ledger).  The assertion stays at the stated tolerance.
    curve = aicc_hump_curve
    ordered_n = sorted(curve)
    peak_n = max(curve, key=curve.get)
    assert peak_n not in (ordered_n[0], ordered_n[-1]), curve
    assert curve[peak_n] >= curve[ordered_n[0]] + 0.05, curve
    assert curve[peak_n] >= curve[ordered_n[-1]] + 0.05, curve
    print(
        "ACCEPTANCE 8b aicc-hump: PASS "
        f"({ {k: round(v, 3) for k, v in sorted(curve.items())} })"
    )


# -- criterion 9: formula golden values -------------------------------------------------------------


def test_criterion_9_formula_goldens():
    fc = fishers_c([0.05, 0.05])
    assert fc.c == pytest.approx(11.983, abs=1e-3)
    assert fc.df == 4
    assert fc.p_value == pytest.approx(0.0175, abs=1e-3)
    assert fml([2.0], [1.0]) == pytest.approx(1 - math.log(2), abs=1e-10)
    b = np.array([[0.0, 0.0], [2.0, 0.0]])
    np.testing.assert_array_equal(implied_covariance(b, np.eye(2)), [[1.0, 2.0], [2.0, 5.0]])
    assert aicc(-50, 3, 20) == 107.5
    for k, loglik, n in ((3, -50.0, 20), (5, -100.0, 100), (12, -431.5, 977)):
        assert bic(loglik, k, n) - hbic(loglik, k, n) == pytest.approx(
            k * math.log(2 * math.pi), abs=1e-12
        )
    print("ACCEPTANCE 9 formula-goldens: PASS")


# -- criterion 10: determinism -----------------------------------------------------------------------


def test_criterion_10_cli_determinism(tmp_path):
    outs = []
    for name, workers in (("a", 1), ("b", 1), ("c", 3)):
        out = tmp_path / f"{name}.csv"
        code = cli_main(
            [
                "simulate", "--batch", "1", "--preset", "desk", "--seed", "42",
                "--replicates", "5", "--workers", str(workers), "--out", str(out),
            ]
        )
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    print("ACCEPTANCE 10 determinism: PASS (byte-identical across runs and workers)")
