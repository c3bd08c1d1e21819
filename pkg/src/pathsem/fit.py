"""Two fitting routes for a hypothesized DAG on observed data.

The piecewise route estimates each endogenous node by ordinary least squares
and combines the model's independence claims through Fisher's C.  The global
route assembles the model-implied covariance from the same closed-form ML
estimates (valid for recursive observed-variable models with uncorrelated
errors) and tests it against the sample covariance with the classic ML
discrepancy chi-square.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dag import Dag, IndependenceClaim, basis_set
from .datagen import Dataset
from .errors import NotPositiveDefiniteError, RankDeficiencyError
from .metrics import (
    DEFAULT_ALPHA,
    FisherC,
    MetricBundle,
    acceptance,
    aicc,
    avg_r2,
    bic,
    ci_local_tests,
    fishers_c,
    hbic,
    partial_correlation,
    prop_significant,
)

Edge = tuple[str, str]


# -- ordinary least squares with inference ---------------------------------------


@dataclass(frozen=True)
class RegressionFit:
    """One least-squares equation with classical inference.

    ``coefficients`` starts with the intercept; ``p_values`` covers the
    non-intercept coefficients only (two-sided t tests).  ``loglik`` is the
    Gaussian log-likelihood evaluated at the ML residual variance RSS/n.
    """

    response: str
    predictors: tuple[str, ...]
    coefficients: tuple[float, ...]
    standard_errors: tuple[float, ...]
    p_values: tuple[float, ...]
    sigma2_hat: float
    r2: float
    adj_r2: float
    loglik: float
    n_obs: int
    k_params: int

    @property
    def rss(self) -> float:
        return self.sigma2_hat * (self.n_obs - len(self.coefficients))


def ols(y, x_columns, response: str = "y", predictors=None) -> RegressionFit:
    """Least squares of ``y`` on ``x_columns`` with an intercept.

    Standard errors come from ``sigma2 * (X'X)^-1`` with ``sigma2 =
    RSS / (n - p)``; p-values are two-sided t.  Raises
    :class:`RankDeficiencyError` for a rank-deficient design and
    ``ValueError`` when there are too few observations for inference.
    """
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(x_columns, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, n_pred = x.shape
    if y.shape[0] != n:
        raise ValueError("y and x_columns disagree on the number of rows")
    if predictors is None:
        predictors = tuple(f"x{i + 1}" for i in range(n_pred))
    predictors = tuple(predictors)
    p = n_pred + 1
    if n <= p:
        raise ValueError(f"need more than {p} observations to fit {p} parameters")
    design = np.column_stack([np.ones(n), x])
    if np.linalg.matrix_rank(design) < p:
        raise RankDeficiencyError(f"design matrix for {response!r} is rank deficient")
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    xtx_inv = np.linalg.inv(design.T @ design)
    resid = y - design @ beta
    rss = float(resid @ resid)
    tss = float(np.sum((y - y.mean()) ** 2))
    sigma2 = rss / (n - p)
    se = np.sqrt(np.maximum(np.diag(xtx_inv) * sigma2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = beta / se
    p_vals = np.where(
        se > 0.0,
        2.0 * stats.t.sf(np.abs(np.where(se > 0.0, t_stats, 0.0)), n - p),
        np.where(beta == 0.0, 1.0, 0.0),
    )
    if tss > 0.0:
        r2 = 1.0 - rss / tss
    else:
        r2 = 1.0 if rss <= 1e-12 else 0.0
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / (n - p)
    ml_var = max(rss / n, 1e-300)
    loglik = -0.5 * n * (math.log(2.0 * math.pi * ml_var) + 1.0)
    return RegressionFit(
        response=response,
        predictors=predictors,
        coefficients=tuple(float(b) for b in beta),
        standard_errors=tuple(float(s) for s in se),
        p_values=tuple(float(v) for v in p_vals[1:]),
        sigma2_hat=float(sigma2),
        r2=float(r2),
        adj_r2=float(adj_r2),
        loglik=float(loglik),
        n_obs=int(n),
        k_params=p + 1,
    )


# -- piecewise fitter -------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseFit:
    """Equation-by-equation fit plus the directed-separation test."""

    dag: Dag
    regressions: dict[str, RegressionFit]
    claims: tuple[IndependenceClaim, ...]
    claim_p_values: tuple[float, ...]
    fisher_c: float
    df: int
    global_p: float
    total_loglik: float
    total_k: int
    converged: bool
    failure: str | None = None

    def path_p_values(self) -> list[float]:
        """All per-path p-values, regression by regression."""
        return [p for reg in self.regressions.values() for p in reg.p_values]

    def path_estimates(self) -> dict[Edge, float]:
        return {
            (pred, node): reg.coefficients[i + 1]
            for node, reg in self.regressions.items()
            for i, pred in enumerate(reg.predictors)
        }


def _check_columns(dag: Dag, data: Dataset) -> None:
    missing = [v for v in dag.node_names if v not in data.columns]
    if missing:
        raise ValueError(f"data is missing model column(s): {', '.join(missing)}")


def _failed_piecewise(dag: Dag, reason: str) -> PiecewiseFit:
    return PiecewiseFit(
        dag=dag,
        regressions={},
        claims=(),
        claim_p_values=(),
        fisher_c=float("nan"),
        df=0,
        global_p=float("nan"),
        total_loglik=float("nan"),
        total_k=0,
        converged=False,
        failure=reason,
    )


def fit_piecewise(dag: Dag, data: Dataset) -> PiecewiseFit:
    """Fit one regression per endogenous node and test the basis-set claims.

    Fisher's C combines the claim p-values; a saturated model (no claims)
    scores C = 0 with p = 1.  Any rank-deficient equation flags the whole fit
    as non-converged, which downstream acceptance treats as rejected.
    """
    _check_columns(dag, data)
    index = {v: i for i, v in enumerate(dag.node_names)}
    regressions: dict[str, RegressionFit] = {}
    try:
        for node in dag.endogenous():
            parents = sorted(dag.parents(node), key=index.get)
            regressions[node] = ols(
                data.column(node), data.matrix(parents), response=node, predictors=parents
            )
    except (RankDeficiencyError, ValueError) as exc:
        return _failed_piecewise(dag, str(exc))
    claims = tuple(basis_set(dag))
    try:
        claim_ps = tuple(
            partial_correlation(data, c.x, c.y, c.conditioning_set).p_value for c in claims
        )
    except ValueError as exc:
        return _failed_piecewise(dag, str(exc))
    combined: FisherC = fishers_c(claim_ps)
    return PiecewiseFit(
        dag=dag,
        regressions=regressions,
        claims=claims,
        claim_p_values=claim_ps,
        fisher_c=combined.c,
        df=combined.df,
        global_p=combined.p_value,
        total_loglik=sum(r.loglik for r in regressions.values()),
        total_k=sum(r.k_params for r in regressions.values()),
        converged=True,
    )


# -- global (covariance-structure) fitter -------------------------------------------


def implied_covariance(b_matrix: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Model-implied covariance ``(I - B)^-1 Psi (I - B)^-T``."""
    b = np.asarray(b_matrix, dtype=float)
    psi = np.asarray(psi, dtype=float)
    n = b.shape[0]
    eye_b = np.eye(n) - b
    try:
        a = np.linalg.inv(eye_b)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("I - B is singular") from None
    sigma = a @ psi @ a.T
    return (sigma + sigma.T) / 2.0


def fml(sample_sigma: np.ndarray, implied_sigma: np.ndarray) -> float:
    """Maximum-likelihood discrepancy between sample and implied covariance.

    ``F = ln|Sigma| + tr(S Sigma^-1) - ln|S| - n``; non-negative, zero iff the
    matrices coincide.  Raises :class:`NotPositiveDefiniteError` when either
    matrix is not positive definite.
    """
    s = np.asarray(sample_sigma, dtype=float)
    sigma = np.asarray(implied_sigma, dtype=float)
    if s.ndim == 0 or s.ndim == 1:
        s = np.atleast_2d(s)
        sigma = np.atleast_2d(sigma)
    n = s.shape[0]
    for name, m in (("sample", s), ("implied", sigma)):
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError(f"{name} covariance is not positive definite") from None
    sign_s, logdet_s = np.linalg.slogdet(s)
    sign_i, logdet_i = np.linalg.slogdet(sigma)
    if sign_s <= 0 or sign_i <= 0:
        raise NotPositiveDefiniteError("covariance determinant is not positive")
    trace_term = float(np.trace(np.linalg.solve(sigma, s)))
    return max(float(logdet_i + trace_term - logdet_s - n), 0.0)


@dataclass(frozen=True)
class GlobalFit:
    """Covariance-structure fit with the ML chi-square test."""

    dag: Dag
    b_matrix: np.ndarray
    psi: np.ndarray
    implied_sigma: np.ndarray
    sample_sigma: np.ndarray
    chi2: float
    df: int
    global_p: float
    path_estimates: dict[Edge, float]
    path_standard_errors: dict[Edge, float]
    path_p_values: dict[Edge, float]
    endo_r2: dict[str, float]
    loglik: float
    k_params: int
    converged: bool
    failure: str | None = None


def _failed_global(dag: Dag, sample_sigma: np.ndarray, reason: str) -> GlobalFit:
    n = dag.n
    nan_mat = np.full((n, n), np.nan)
    return GlobalFit(
        dag=dag,
        b_matrix=nan_mat,
        psi=nan_mat,
        implied_sigma=nan_mat,
        sample_sigma=sample_sigma,
        chi2=float("nan"),
        df=global_df(dag),
        global_p=float("nan"),
        path_estimates={},
        path_standard_errors={},
        path_p_values={},
        endo_r2={},
        loglik=float("nan"),
        k_params=global_k_params(dag),
        converged=False,
        failure=reason,
    )


def global_k_cov(dag: Dag) -> int:
    """Free covariance-structure parameters: paths plus one variance per node."""
    return len(dag.edges) + dag.n


def global_df(dag: Dag) -> int:
    return dag.n * (dag.n + 1) // 2 - global_k_cov(dag)


def global_k_params(dag: Dag) -> int:
    # covariance parameters plus one fitted mean per variable
    return global_k_cov(dag) + dag.n


def fit_global(dag: Dag, data: Dataset) -> GlobalFit:
    """Closed-form ML fit of the covariance structure implied by the dag.

    For recursive models with uncorrelated errors the ML path coefficients
    coincide with the per-equation least-squares coefficients; residual and
    exogenous variances use the N denominator.  The test statistic is
    ``(N - 1) * F_ML`` against a chi-square with ``n(n+1)/2 - k_cov`` degrees
    of freedom.  Numerical failures (singular covariance, rank deficiency,
    too few rows) yield ``converged=False``, which acceptance treats as
    rejection.
    """
    _check_columns(dag, data)
    names = dag.node_names
    index = {v: i for i, v in enumerate(names)}
    values = data.matrix(names)
    n_obs = values.shape[0]
    n = dag.n
    sample_sigma = np.atleast_2d(np.cov(values.T, bias=True))

    try:
        np.linalg.cholesky(sample_sigma)
    except np.linalg.LinAlgError:
        return _failed_global(dag, sample_sigma, "sample covariance is not positive definite")

    b = np.zeros((n, n))
    psi = np.zeros((n, n))
    estimates: dict[Edge, float] = {}
    ses: dict[Edge, float] = {}
    p_values: dict[Edge, float] = {}
    endo_r2: dict[str, float] = {}
    try:
        for node in dag.endogenous():
            parents = sorted(dag.parents(node), key=index.get)
            reg = ols(data.column(node), data.matrix(parents), response=node, predictors=parents)
            i = index[node]
            n_par = len(parents)
            # ML rescaling of the OLS standard errors: sigma2 uses N, not N - p
            scale = math.sqrt((n_obs - n_par - 1) / n_obs)
            for j, parent in enumerate(parents):
                coef = reg.coefficients[j + 1]
                se = reg.standard_errors[j + 1] * scale
                b[i, index[parent]] = coef
                estimates[(parent, node)] = coef
                ses[(parent, node)] = se
                if se > 0.0:
                    z = coef / se
                    p_values[(parent, node)] = float(2.0 * stats.norm.sf(abs(z)))
                else:
                    p_values[(parent, node)] = 1.0 if coef == 0.0 else 0.0
            psi[i, i] = reg.rss / n_obs
            endo_r2[node] = float(1.0 - psi[i, i] / sample_sigma[i, i])
        for node in dag.exogenous():
            i = index[node]
            psi[i, i] = sample_sigma[i, i]
        implied = implied_covariance(b, psi)
        discrepancy = fml(sample_sigma, implied)
        sign, logdet_implied = np.linalg.slogdet(implied)
        if sign <= 0:
            raise NotPositiveDefiniteError("implied covariance is not positive definite")
        trace_term = float(np.trace(np.linalg.solve(implied, sample_sigma)))
    except (RankDeficiencyError, NotPositiveDefiniteError, ValueError) as exc:
        return _failed_global(dag, sample_sigma, str(exc))

    chi2 = (n_obs - 1) * discrepancy
    df = global_df(dag)
    global_p = float(stats.chi2.sf(chi2, df)) if df > 0 else 1.0
    loglik = -0.5 * n_obs * (n * math.log(2.0 * math.pi) + logdet_implied + trace_term)
    return GlobalFit(
        dag=dag,
        b_matrix=b,
        psi=psi,
        implied_sigma=implied,
        sample_sigma=sample_sigma,
        chi2=float(chi2),
        df=df,
        global_p=global_p,
        path_estimates=estimates,
        path_standard_errors=ses,
        path_p_values=p_values,
        endo_r2=endo_r2,
        loglik=float(loglik),
        k_params=global_k_params(dag),
        converged=True,
    )


# -- metric bundle -------------------------------------------------------------------


def metric_bundle(fit, data: Dataset, alpha: float = DEFAULT_ALPHA) -> MetricBundle:
    """Derive the full metric bundle for a fitted model on ``data``.

    Non-converged fits are recorded as rejected with NaN statistics; the
    sample-size-corrected AIC is NaN whenever it is undefined (n <= k + 1).
    """
    if isinstance(fit, PiecewiseFit):
        loglik, k = fit.total_loglik, fit.total_k
        path_ps = fit.path_p_values()
    elif isinstance(fit, GlobalFit):
        loglik, k = fit.loglik, fit.k_params
        path_ps = list(fit.path_p_values.values())
    else:
        raise TypeError(f"not a fit result: {type(fit).__name__}")
    n = data.n_rows
    nan = float("nan")
    if not fit.converged:
        return MetricBundle(
            accepted=False,
            prop_significant_paths=nan,
            avg_r2=nan,
            prop_ci_failed=nan,
            loglik=nan,
            k_params=k,
            n_obs=n,
            aicc=nan,
            bic=nan,
            hbic=nan,
            converged=False,
        )
    ci = ci_local_tests(fit.dag, data, alpha=alpha)
    try:
        aicc_value = aicc(loglik, k, n)
    except ValueError:
        aicc_value = nan
    return MetricBundle(
        accepted=acceptance(fit.global_p, fit.converged, alpha),
        prop_significant_paths=prop_significant(path_ps, alpha),
        avg_r2=avg_r2(fit),
        prop_ci_failed=ci.prop_failed,
        loglik=loglik,
        k_params=k,
        n_obs=n,
        aicc=aicc_value,
        bic=bic(loglik, k, n),
        hbic=hbic(loglik, k, n),
        converged=True,
    )


# -- report serialization -----------------------------------------------------------


def path_table(fit) -> list[dict]:
    """One row per path: response, predictor, estimate, se, statistic, p."""
    rows = []
    if isinstance(fit, PiecewiseFit):
        for node, reg in fit.regressions.items():
            for j, pred in enumerate(reg.predictors):
                se = reg.standard_errors[j + 1]
                est = reg.coefficients[j + 1]
                rows.append(
                    {
                        "response": node,
                        "predictor": pred,
                        "estimate": est,
                        "se": se,
                        "statistic": est / se if se > 0 else float("inf"),
                        "p": reg.p_values[j],
                    }
                )
    elif isinstance(fit, GlobalFit):
        for (pred, node), est in fit.path_estimates.items():
            se = fit.path_standard_errors[(pred, node)]
            rows.append(
                {
                    "response": node,
                    "predictor": pred,
                    "estimate": est,
                    "se": se,
                    "statistic": est / se if se > 0 else float("inf"),
                    "p": fit.path_p_values[(pred, node)],
                }
            )
    else:
        raise TypeError(f"not a fit result: {type(fit).__name__}")
    rows.sort(key=lambda r: (r["response"], r["predictor"]))
    return rows


def write_path_table(fit, path) -> None:
    rows = path_table(fit)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["response", "predictor", "estimate", "se", "statistic", "p"])
        writer.writeheader()
        writer.writerows(rows)


def summary_dict(fit) -> dict:
    """Structured summary of the global test plus per-node R-square."""
    if isinstance(fit, PiecewiseFit):
        return {
            "fitter": "piecewise",
            "converged": fit.converged,
            "statistic": {"name": "fisher_c", "value": fit.fisher_c, "df": fit.df},
            "global_p": fit.global_p,
            "r2": {node: reg.adj_r2 for node, reg in fit.regressions.items()},
            "loglik": fit.total_loglik,
            "k_params": fit.total_k,
            "failure": fit.failure,
        }
    if isinstance(fit, GlobalFit):
        return {
            "fitter": "global",
            "converged": fit.converged,
            "statistic": {"name": "chi2", "value": fit.chi2, "df": fit.df},
            "global_p": fit.global_p,
            "r2": dict(fit.endo_r2),
            "loglik": fit.loglik,
            "k_params": fit.k_params,
            "failure": fit.failure,
        }
    raise TypeError(f"not a fit result: {type(fit).__name__}")
