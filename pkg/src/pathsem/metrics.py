"""Model-checking statistics: acceptance, path significance, R-square,
conditional-independence tests, Fisher's C, information criteria,
best-scenario selection, and the post-fit diagnosis rules."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dag import Dag, IndependenceClaim, ScenarioKind, basis_set
from .datagen import Dataset

P_VALUE_FLOOR = 1e-300

DEFAULT_ALPHA = 0.05


# -- partial correlation -------------------------------------------------------


@dataclass(frozen=True)
class PartialCorrelation:
    """Fisher-z test of one conditional-independence claim."""

    r: float
    statistic: float
    p_value: float
    collinear: bool = False


def partial_correlation(data: Dataset, x: str, y: str, conditioning) -> PartialCorrelation:
    """Sample partial correlation of (x, y) given a conditioning set.

    Computed by inverting the correlation matrix of the involved columns.
    The test statistic is ``atanh(r) * sqrt(N - |Z| - 3)`` against the
    standard normal.  A collinear submatrix (|r| >= 1) is reported as a
    failure with p = 0 and flagged.
    """
    cond = sorted(conditioning)
    n_obs = data.n_rows
    if n_obs <= len(cond) + 3:
        raise ValueError(f"need more than |Z| + 3 = {len(cond) + 3} observations, got {n_obs}")
    sub = data.matrix([x, y] + cond)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.corrcoef(sub.T)
    if not np.isfinite(corr).all():
        return PartialCorrelation(r=1.0, statistic=math.inf, p_value=0.0, collinear=True)
    try:
        prec = np.linalg.inv(corr)
    except np.linalg.LinAlgError:
        return PartialCorrelation(r=1.0, statistic=math.inf, p_value=0.0, collinear=True)
    denom = prec[0, 0] * prec[1, 1]
    if denom <= 0:
        return PartialCorrelation(r=1.0, statistic=math.inf, p_value=0.0, collinear=True)
    r = float(-prec[0, 1] / math.sqrt(denom))
    if abs(r) >= 1.0:
        return PartialCorrelation(r=r, statistic=math.inf, p_value=0.0, collinear=True)
    z = math.atanh(r) * math.sqrt(n_obs - len(cond) - 3)
    p = 2.0 * stats.norm.sf(abs(z))
    return PartialCorrelation(r=r, statistic=float(z), p_value=float(p))


# -- Fisher's C ----------------------------------------------------------------


@dataclass(frozen=True)
class FisherC:
    c: float
    df: int
    p_value: float
    clamped: bool = False


def fishers_c(claim_p_values) -> FisherC:
    """Combine claim p-values into Fisher's C = -2 * sum(ln p).

    The statistic is referred to a chi-square with twice as many degrees of
    freedom as there are claims; no claims means a perfectly accepted test
    (C = 0, df = 0, p = 1).  Zero p-values are clamped to 1e-300 and flagged.
    """
    ps = [float(p) for p in claim_p_values]
    if any(p < 0.0 or p > 1.0 for p in ps):
        raise ValueError("p-values must lie in [0, 1]")
    clamped = any(p < P_VALUE_FLOOR for p in ps)
    ps = [max(p, P_VALUE_FLOOR) for p in ps]
    if not ps:
        return FisherC(c=0.0, df=0, p_value=1.0)
    c = -2.0 * sum(math.log(p) for p in ps)
    df = 2 * len(ps)
    return FisherC(c=float(c), df=df, p_value=float(stats.chi2.sf(c, df)), clamped=clamped)


# -- scalar metrics ------------------------------------------------------------


def acceptance(global_p: float, converged: bool, alpha: float = DEFAULT_ALPHA) -> bool:
    """A model counts as accepted iff it converged and its global p exceeds alpha."""
    return bool(converged) and float(global_p) > alpha


def prop_significant(path_p_values, alpha: float = DEFAULT_ALPHA) -> float:
    """Fraction of path p-values strictly below alpha."""
    ps = list(path_p_values)
    if not ps:
        raise ValueError("no path p-values; a model must contain at least one path")
    return sum(1 for p in ps if p < alpha) / len(ps)


def avg_r2(fit) -> float:
    """Average explained variance over the endogenous nodes of a fit.

    Piecewise fits contribute the adjusted R-square of each component
    regression; global fits contribute each endogenous node's R-square.
    The mean is clamped to [0, 1].
    """
    if hasattr(fit, "regressions"):
        values = [reg.adj_r2 for reg in fit.regressions.values()]
    elif hasattr(fit, "endo_r2"):
        values = [min(max(v, 0.0), 1.0) for v in fit.endo_r2.values()]
    else:
        raise TypeError(f"not a fit result: {type(fit).__name__}")
    if not values:
        raise ValueError("fit has no endogenous nodes")
    return float(min(max(np.mean(values), 0.0), 1.0))


# -- conditional-independence local tests ---------------------------------------


@dataclass(frozen=True)
class CiTestResult:
    claims: tuple[IndependenceClaim, ...]
    p_values: tuple[float, ...]
    prop_failed: float
    any_collinear: bool = False


def ci_local_tests(dag: Dag, data: Dataset, alpha: float = DEFAULT_ALPHA) -> CiTestResult:
    """Test every basis-set claim of the dag against the data.

    A claim fails when its partial-correlation p-value falls below alpha.
    A saturated model has no claims and a failure proportion of 0.
    """
    claims = tuple(basis_set(dag))
    tests = [partial_correlation(data, c.x, c.y, c.conditioning_set) for c in claims]
    p_values = tuple(t.p_value for t in tests)
    failed = sum(1 for p in p_values if p < alpha)
    prop = failed / len(claims) if claims else 0.0
    return CiTestResult(
        claims=claims,
        p_values=p_values,
        prop_failed=prop,
        any_collinear=any(t.collinear for t in tests),
    )


# -- information criteria --------------------------------------------------------


def aic(loglik: float, k: int) -> float:
    return -2.0 * loglik + 2.0 * k


def aicc(loglik: float, k: int, n: int) -> float:
    """Sample-size-corrected AIC; undefined (raises) at n <= k + 1."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if n <= k + 1:
        raise ValueError(f"aicc undefined for n = {n} <= k + 1 = {k + 1}")
    return aic(loglik, k) + 2.0 * k * (k + 1) / (n - k - 1)


def bic(loglik: float, k: int, n: int) -> float:
    if k < 1:
        raise ValueError("k must be at least 1")
    return -2.0 * loglik + k * math.log(n)


def hbic(loglik: float, k: int, n: int, as_printed: bool = False) -> float:
    """Haughton BIC with penalty ``k * ln(n / (2 pi))``.

    The default orientation is ``-2 * loglik + k * ln(n / 2pi)`` so that lower
    stays better, consistent with the other criteria.  ``as_printed=True``
    evaluates the literal published form ``loglik - k * ln(n / 2pi)`` instead,
    whose preference ordering is inverted.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    penalty = k * math.log(n / (2.0 * math.pi))
    if as_printed:
        return loglik - penalty
    return -2.0 * loglik + penalty


# -- best-scenario selection ------------------------------------------------------


@dataclass(frozen=True)
class ScenarioSelection:
    best: ScenarioKind | None
    margin: float


def select_best(ic_by_scenario, threshold: float = 2.0) -> ScenarioSelection:
    """Label the scenario with the lowest IC, if it wins by more than ``threshold``.

    ``margin`` is the gap between the two lowest IC values; no scenario is
    labelled when the gap does not exceed the threshold (ties included).
    """
    items = list(ic_by_scenario.items())
    if len(items) < 2:
        raise ValueError("need at least two scenarios to compare")
    if any(not math.isfinite(v) for _, v in items):
        raise ValueError("IC values must be finite")
    items.sort(key=lambda kv: kv[1])
    margin = items[1][1] - items[0][1]
    best = items[0][0] if margin > threshold else None
    return ScenarioSelection(best=best, margin=float(margin))


# -- metric bundle -----------------------------------------------------------------


@dataclass(frozen=True)
class MetricBundle:
    """All per-model statistics the simulation harness aggregates."""

    accepted: bool
    prop_significant_paths: float
    avg_r2: float
    prop_ci_failed: float
    loglik: float
    k_params: int
    n_obs: int
    aicc: float
    bic: float
    hbic: float
    converged: bool = True

    def __post_init__(self):
        for name in ("prop_significant_paths", "avg_r2", "prop_ci_failed"):
            v = getattr(self, name)
            if math.isfinite(v) and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


# -- diagnosis ---------------------------------------------------------------------


LABEL_NOT_CONVERGED = "not-converged"
LABEL_NO_SIGNAL = "no-signal"
LABEL_UNDERFIT = "underfit-or-misdirected"
LABEL_ADEQUATE = "adequate-check-overfit"
LABEL_INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DiagnosisThresholds:
    """Cutoffs for the post-fit diagnosis rules (artifact defaults)."""

    low_prop_significant: float = 0.25
    low_r2: float = 0.10
    high_ci_failed: float = 0.25


@dataclass(frozen=True)
class Diagnosis:
    label: str
    advice: str


def diagnose(bundle: MetricBundle, thresholds: DiagnosisThresholds | None = None) -> Diagnosis:
    """Combine the metric bundle into a single post-fit recommendation.

    Rules, in order: unconverged fits must be re-specified; an accepted model
    without significant paths or explained variance extracted no real signal;
    a rejected model showing clear signal, failed independence claims, or
    high R-square points to missing or mis-directed relationships; an
    accepted model with signal is adequate but should still be screened for
    overfitting with BIC.
    """
    t = thresholds or DiagnosisThresholds()
    if not bundle.converged:
        return Diagnosis(
            LABEL_NOT_CONVERGED,
            "The fit did not converge; re-specify the model. Estimates from "
            "unconverged fits should not be trusted.",
        )
    low_signal = (
        bundle.prop_significant_paths < t.low_prop_significant and bundle.avg_r2 < t.low_r2
    )
    if bundle.accepted and low_signal:
        return Diagnosis(
            LABEL_NO_SIGNAL,
            "The global test accepts the model but paths are rarely significant "
            "and R-square is near zero: no real signal was extracted from the data.",
        )
    misfit_signal = (
        bundle.prop_significant_paths >= t.low_prop_significant
        or bundle.prop_ci_failed > t.high_ci_failed
        or bundle.avg_r2 >= t.low_r2
    )
    if not bundle.accepted and misfit_signal:
        return Diagnosis(
            LABEL_UNDERFIT,
            "The global test rejects the model while signal is clearly present; "
            "look for missing relationships or wrongly directed paths, guided by "
            "the failing conditional-independence tests.",
        )
    if bundle.accepted:
        return Diagnosis(
            LABEL_ADEQUATE,
            "Fit acceptable, but global tests give no safeguard against "
            "superfluous paths; compare against simpler structures with BIC.",
        )
    return Diagnosis(
        LABEL_INCONCLUSIVE,
        "The global test rejects the model yet local metrics show little signal; "
        "consider gathering more data or rethinking the covariate set.",
    )
