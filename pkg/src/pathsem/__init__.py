"""Observed-variable path analysis with a Monte Carlo misspecification harness.

The package fits hypothesized DAG structures to data two ways (piecewise
per-equation least squares with a directed-separation test, and a global
covariance-structure ML fit with a chi-square test), derives the standard
fitness metrics from either fit, and orchestrates the two simulation batches
that probe how those metrics behave under random, exact, shuffled, over- and
under-specified data generation.
"""

from .dag import (
    Dag,
    IndependenceClaim,
    ScenarioKind,
    add_edges,
    basis_set,
    d_separated,
    drop_edges,
    parse_model_spec,
    random_dag,
    read_model_spec,
    shuffle_edges,
    topological_order,
)
from .datagen import (
    Dataset,
    GenerationRecipe,
    WeightedDag,
    draw_coefficients,
    generate,
    generate_scenario,
)
from .errors import (
    ModelSpecError,
    NotPositiveDefiniteError,
    PathsemError,
    RankDeficiencyError,
)
from .estimators import GlobalSEM, PiecewiseSEM
from .fit import (
    GlobalFit,
    PiecewiseFit,
    RegressionFit,
    fit_global,
    fit_piecewise,
    fml,
    implied_covariance,
    metric_bundle,
    ols,
    path_table,
    summary_dict,
)
from .metrics import (
    Diagnosis,
    DiagnosisThresholds,
    FisherC,
    MetricBundle,
    ScenarioSelection,
    acceptance,
    aic,
    aicc,
    avg_r2,
    bic,
    ci_local_tests,
    diagnose,
    fishers_c,
    hbic,
    partial_correlation,
    prop_significant,
    select_best,
)
from .sim import (
    ParameterSet,
    RunResult,
    SummaryRow,
    expand_grid,
    replicate_rng,
    run_batch1,
    run_batch2,
    summarize,
    summarize_selections,
    write_results_csv,
)

__version__ = "0.1.0"

__all__ = [
    "Dag",
    "IndependenceClaim",
    "ScenarioKind",
    "random_dag",
    "topological_order",
    "d_separated",
    "basis_set",
    "shuffle_edges",
    "drop_edges",
    "add_edges",
    "parse_model_spec",
    "read_model_spec",
    "WeightedDag",
    "Dataset",
    "GenerationRecipe",
    "draw_coefficients",
    "generate",
    "generate_scenario",
    "RegressionFit",
    "PiecewiseFit",
    "GlobalFit",
    "ols",
    "fit_piecewise",
    "fit_global",
    "implied_covariance",
    "fml",
    "metric_bundle",
    "path_table",
    "summary_dict",
    "FisherC",
    "MetricBundle",
    "ScenarioSelection",
    "Diagnosis",
    "DiagnosisThresholds",
    "fishers_c",
    "acceptance",
    "prop_significant",
    "avg_r2",
    "ci_local_tests",
    "partial_correlation",
    "aic",
    "aicc",
    "bic",
    "hbic",
    "select_best",
    "diagnose",
    "PiecewiseSEM",
    "GlobalSEM",
    "ParameterSet",
    "SummaryRow",
    "RunResult",
    "expand_grid",
    "replicate_rng",
    "run_batch1",
    "run_batch2",
    "summarize",
    "summarize_selections",
    "write_results_csv",
    "PathsemError",
    "ModelSpecError",
    "RankDeficiencyError",
    "NotPositiveDefiniteError",
    "__version__",
]
