"""Monte Carlo harness: parameter grids, deterministic seeding, replicate
execution for both simulation batches, and figure-ready summaries."""

from __future__ import annotations

import csv
import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dag import ScenarioKind, add_edges, drop_edges, random_dag, shuffle_edges
from .datagen import GenerationRecipe, generate, generate_scenario, draw_coefficients
from .fit import fit_global, fit_piecewise, metric_bundle
from .metrics import DEFAULT_ALPHA, MetricBundle, aicc, bic, hbic, select_best

DEFAULT_N_SAMPLES = (20, 40, 60, 80, 100, 200, 500, 1000, 5000, 10000)
DEFAULT_N_COVARIATES = (5, 7, 10)
DEFAULT_SD_EFF = (1.0, 2.5, 5.0)
DEFAULT_SD_RES = (0.5, 1.0, 2.5)
DEFAULT_FITTERS = ("piecewise", "global")
DEFAULT_CONNECTANCE = 0.3
DEFAULT_REPLICATES = 100

BATCH1_SCENARIOS = (
    ScenarioKind.RANDOM,
    ScenarioKind.EXACT,
    ScenarioKind.SHUFFLED,
    ScenarioKind.OVERSPECIFIED,
    ScenarioKind.UNDERSPECIFIED,
)
# batch 2 compares the four structure-bearing scenarios on shared exact data
IC_SCENARIOS = (
    ScenarioKind.EXACT,
    ScenarioKind.SHUFFLED,
    ScenarioKind.OVERSPECIFIED,
    ScenarioKind.UNDERSPECIFIED,
)
IC_METRICS = ("aicc", "bic", "hbic")

BATCH1_AGGREGATES = (
    "prop_accepted",
    "mean_prop_significant",
    "mean_avg_r2",
    "mean_prop_ci_failed",
)
BATCH2_AGGREGATES = tuple(
    f"{metric}_{label}"
    for metric in IC_METRICS
    for label in ("best_exact", "best_shuffled", "best_overspecified", "best_underspecified", "none")
)


@dataclass(frozen=True)
class ParameterSet:
    """One cell of the simulation grid (scenario is None in batch 2)."""

    batch: int
    set_index: int
    n_samples: int
    n_covariates: int
    scenario: ScenarioKind | None
    fitter: str
    sd_eff: float
    sd_res: float
    replicates: int
    master_seed: int
    connectance: float = DEFAULT_CONNECTANCE


@dataclass(frozen=True)
class SummaryRow:
    """Aggregated record for one parameter set; the unit of figure reproduction."""

    params: ParameterSet
    n_replicates_effective: int
    aggregates: dict[str, float]


@dataclass
class RunResult:
    rows: list[SummaryRow]
    raw: list[dict]
    failures: list[str]


def replicate_rng(master_seed: int, set_index: int, replicate: int) -> np.random.Generator:
    """Independent stream per (seed, set, replicate); order- and worker-invariant."""
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(set_index), int(replicate)])
    )


def _subset(name, requested, defaults):
    if requested is None:
        return tuple(defaults)
    requested = tuple(requested)
    bad = [v for v in requested if v not in defaults]
    if bad:
        raise ValueError(f"{name} values {bad} are outside the default grid {defaults}")
    if not requested:
        raise ValueError(f"{name} override is empty")
    return tuple(v for v in defaults if v in set(requested))


def expand_grid(
    batch: int,
    *,
    n_samples=None,
    n_covariates=None,
    scenarios=None,
    fitters=None,
    sd_eff=None,
    sd_res=None,
    replicates: int = DEFAULT_REPLICATES,
    master_seed: int = 0,
    connectance: float = DEFAULT_CONNECTANCE,
) -> list[ParameterSet]:
    """Expand the (possibly restricted) parameter grid in deterministic order.

    Overrides must subset the default grid.  Batch 1 crosses sample size,
    covariate count, scenario, fitter and both spread levels, keeping a
    single signal level for the random scenario; batch 2 drops the scenario
    dimension.  Defaults yield 2340 (batch 1) and 540 (batch 2) sets.
    """
    if batch not in (1, 2):
        raise ValueError("batch must be 1 or 2")
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    if master_seed < 0:
        raise ValueError("master_seed must be non-negative")
    ns = _subset("n_samples", n_samples, DEFAULT_N_SAMPLES)
    covs = _subset("n_covariates", n_covariates, DEFAULT_N_COVARIATES)
    effs = _subset("sd_eff", sd_eff, DEFAULT_SD_EFF)
    ress = _subset("sd_res", sd_res, DEFAULT_SD_RES)
    fits = _subset("fitters", fitters, DEFAULT_FITTERS)
    if scenarios is None:
        scens = BATCH1_SCENARIOS
    else:
        scens = tuple(s if isinstance(s, ScenarioKind) else ScenarioKind.parse(s) for s in scenarios)
        scens = _subset("scenarios", scens, BATCH1_SCENARIOS)
    # the random scenario has no signal; it keeps exactly one sd_eff level
    random_sd_eff = 2.5 if 2.5 in effs else effs[0]

    sets: list[ParameterSet] = []
    if batch == 1:
        for n in ns:
            for cov in covs:
                for scen in scens:
                    for fitter in fits:
                        for eff in effs:
                            if scen is ScenarioKind.RANDOM and eff != random_sd_eff:
                                continue
                            for res in ress:
                                sets.append(
                                    ParameterSet(
                                        batch=1,
                                        set_index=len(sets),
                                        n_samples=n,
                                        n_covariates=cov,
                                        scenario=scen,
                                        fitter=fitter,
                                        sd_eff=eff,
                                        sd_res=res,
                                        replicates=replicates,
                                        master_seed=master_seed,
                                        connectance=connectance,
                                    )
                                )
    else:
        for n in ns:
            for cov in covs:
                for fitter in fits:
                    for eff in effs:
                        for res in ress:
                            sets.append(
                                ParameterSet(
                                    batch=2,
                                    set_index=len(sets),
                                    n_samples=n,
                                    n_covariates=cov,
                                    scenario=None,
                                    fitter=fitter,
                                    sd_eff=eff,
                                    sd_res=res,
                                    replicates=replicates,
                                    master_seed=master_seed,
                                    connectance=connectance,
                                )
                            )
    if not sets:
        raise ValueError("expanded grid is empty")
    return sets


# -- replicate execution -----------------------------------------------------------


_FAILED_BUNDLE = MetricBundle(
    accepted=False,
    prop_significant_paths=float("nan"),
    avg_r2=float("nan"),
    prop_ci_failed=float("nan"),
    loglik=float("nan"),
    k_params=0,
    n_obs=0,
    aicc=float("nan"),
    bic=float("nan"),
    hbic=float("nan"),
    converged=False,
)


def _fit_model(fitter: str, dag, data):
    if fitter == "piecewise":
        return fit_piecewise(dag, data)
    if fitter == "global":
        return fit_global(dag, data)
    raise ValueError(f"unknown fitter {fitter!r}")


def _replicate_batch1(ps: ParameterSet, rep: int, alpha, shuffle_fraction, modify_fraction):
    rng = replicate_rng(ps.master_seed, ps.set_index, rep)
    model = random_dag(ps.n_covariates, ps.connectance, rng)
    recipe = GenerationRecipe(
        model_dag=model,
        scenario=ps.scenario,
        sd_eff=ps.sd_eff,
        sd_res=ps.sd_res,
        shuffle_fraction=shuffle_fraction,
        modify_fraction=modify_fraction,
    )
    data, _generating = generate_scenario(recipe, ps.n_samples, rng)
    fit = _fit_model(ps.fitter, model, data)
    return metric_bundle(fit, data, alpha)


def summarize(params: ParameterSet, bundles: list[MetricBundle]) -> SummaryRow:
    """Aggregate batch-1 metric bundles into one summary row.

    Acceptance counts every replicate (failures are rejected, never dropped);
    the remaining means run over the converged replicates only.
    """
    if not bundles:
        raise ValueError("cannot summarize an empty replicate list")
    converged = [b for b in bundles if b.converged]
    agg = {"prop_accepted": sum(b.accepted for b in bundles) / len(bundles)}
    for key, attr in (
        ("mean_prop_significant", "prop_significant_paths"),
        ("mean_avg_r2", "avg_r2"),
        ("mean_prop_ci_failed", "prop_ci_failed"),
    ):
        agg[key] = (
            float(np.mean([getattr(b, attr) for b in converged])) if converged else float("nan")
        )
    return SummaryRow(params=params, n_replicates_effective=len(converged), aggregates=agg)


def _run_set_batch1(args):
    ps, alpha, shuffle_fraction, modify_fraction, collect_raw = args
    bundles: list[MetricBundle] = []
    failures: list[str] = []
    for rep in range(ps.replicates):
        try:
            bundle = _replicate_batch1(ps, rep, alpha, shuffle_fraction, modify_fraction)
        except Exception as exc:  # replicate failures are isolated and logged
            failures.append(f"batch1 set {ps.set_index} replicate {rep}: {exc}")
            bundle = _FAILED_BUNDLE
        bundles.append(bundle)
    raw = (
        [
            {
                "set_index": ps.set_index,
                "replicate": rep,
                "converged": b.converged,
                "accepted": b.accepted,
                "prop_significant": b.prop_significant_paths,
                "avg_r2": b.avg_r2,
                "prop_ci_failed": b.prop_ci_failed,
                "loglik": b.loglik,
                "k_params": b.k_params,
                "aicc": b.aicc,
                "bic": b.bic,
                "hbic": b.hbic,
            }
            for rep, b in enumerate(bundles)
        ]
        if collect_raw
        else []
    )
    return summarize(ps, bundles), raw, failures


@dataclass(frozen=True)
class Batch2Replicate:
    ok: bool
    selections: dict[str, ScenarioKind | None]
    ics: dict[str, dict[ScenarioKind, float]]


def _replicate_batch2(
    ps: ParameterSet, rep: int, shuffle_fraction, modify_fraction, hbic_as_printed
) -> Batch2Replicate:
    rng = replicate_rng(ps.master_seed, ps.set_index, rep)
    dag = random_dag(ps.n_covariates, ps.connectance, rng)
    wdag = draw_coefficients(dag, ps.sd_eff, rng, sd_res=ps.sd_res)
    data = generate(wdag, ps.n_samples, rng)
    # data stay exact; the four candidate structures mirror the batch-1
    # transformations on the model side
    models = {
        ScenarioKind.EXACT: dag,
        ScenarioKind.SHUFFLED: shuffle_edges(dag, shuffle_fraction, rng),
        ScenarioKind.OVERSPECIFIED: add_edges(dag, modify_fraction, rng),
        ScenarioKind.UNDERSPECIFIED: drop_edges(dag, modify_fraction, rng),
    }
    fits = {scen: _fit_model(ps.fitter, model, data) for scen, model in models.items()}
    if not all(f.converged for f in fits.values()):
        return Batch2Replicate(ok=False, selections={m: None for m in IC_METRICS}, ics={})

    def loglik_k(fit):
        if ps.fitter == "piecewise":
            return fit.total_loglik, fit.total_k
        return fit.loglik, fit.k_params

    ics: dict[str, dict[ScenarioKind, float]] = {m: {} for m in IC_METRICS}
    n = ps.n_samples
    for scen, fit in fits.items():
        ll, k = loglik_k(fit)
        try:
            ics["aicc"][scen] = aicc(ll, k, n)
        except ValueError:
            ics["aicc"][scen] = float("nan")
        ics["bic"][scen] = bic(ll, k, n)
        ics["hbic"][scen] = hbic(ll, k, n, as_printed=hbic_as_printed)
    selections: dict[str, ScenarioKind | None] = {}
    for metric in IC_METRICS:
        values = ics[metric]
        if all(math.isfinite(v) for v in values.values()):
            selections[metric] = select_best(values).best
        else:
            selections[metric] = None
    return Batch2Replicate(ok=True, selections=selections, ics=ics)


def summarize_selections(params: ParameterSet, replicates: list[Batch2Replicate]) -> SummaryRow:
    """Per-metric best-scenario frequencies over all replicates."""
    if not replicates:
        raise ValueError("cannot summarize an empty replicate list")
    total = len(replicates)
    agg: dict[str, float] = {}
    for metric in IC_METRICS:
        for scen in IC_SCENARIOS:
            key = f"{metric}_best_{scen.value}"
            agg[key] = sum(1 for r in replicates if r.selections[metric] is scen) / total
        agg[f"{metric}_none"] = (
            sum(1 for r in replicates if r.selections[metric] is None) / total
        )
    effective = sum(1 for r in replicates if r.ok)
    return SummaryRow(params=params, n_replicates_effective=effective, aggregates=agg)


def _run_set_batch2(args):
    ps, shuffle_fraction, modify_fraction, hbic_as_printed, collect_raw = args
    reps: list[Batch2Replicate] = []
    failures: list[str] = []
    for rep in range(ps.replicates):
        try:
            result = _replicate_batch2(ps, rep, shuffle_fraction, modify_fraction, hbic_as_printed)
        except Exception as exc:
            failures.append(f"batch2 set {ps.set_index} replicate {rep}: {exc}")
            result = Batch2Replicate(ok=False, selections={m: None for m in IC_METRICS}, ics={})
        reps.append(result)
    raw = []
    if collect_raw:
        for rep, r in enumerate(reps):
            row: dict = {"set_index": ps.set_index, "replicate": rep, "ok": r.ok}
            for metric in IC_METRICS:
                sel = r.selections[metric]
                row[f"{metric}_best"] = sel.value if sel is not None else "none"
                for scen in IC_SCENARIOS:
                    row[f"{metric}_{scen.value}"] = r.ics.get(metric, {}).get(scen, float("nan"))
            raw.append(row)
    return summarize_selections(ps, reps), raw, failures


# -- batch drivers --------------------------------------------------------------------


def _execute(worker, arg_list, workers: int):
    if workers <= 1:
        return [worker(args) for args in arg_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, arg_list))


def _with_replicates(sets, replicates):
    if replicates is None:
        return list(sets)
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    return [dataclasses.replace(ps, replicates=replicates) for ps in sets]


def run_batch1(
    sets,
    replicates: int | None = None,
    *,
    workers: int = 1,
    alpha: float = DEFAULT_ALPHA,
    shuffle_fraction: float = 0.25,
    modify_fraction: float = 0.25,
    collect_raw: bool = False,
) -> RunResult:
    """Run the misspecification batch: per replicate draw a model, generate
    scenario data, fit, and aggregate the four fitness metrics per set.

    Results are deterministic in (master_seed, set_index, replicate) and
    independent of ``workers``.
    """
    sets = _with_replicates(sets, replicates)
    if any(ps.batch != 1 or ps.scenario is None for ps in sets):
        raise ValueError("run_batch1 requires batch-1 parameter sets")
    args = [(ps, alpha, shuffle_fraction, modify_fraction, collect_raw) for ps in sets]
    results = _execute(_run_set_batch1, args, workers)
    return RunResult(
        rows=[row for row, _, _ in results],
        raw=[r for _, raw, _ in results for r in raw],
        failures=[f for _, _, fails in results for f in fails],
    )


def run_batch2(
    sets,
    replicates: int | None = None,
    *,
    workers: int = 1,
    shuffle_fraction: float = 0.25,
    modify_fraction: float = 0.25,
    hbic_as_printed: bool = False,
    collect_raw: bool = False,
) -> RunResult:
    """Run the IC batch: generate exact data once per replicate, fit the four
    candidate structures to the same data, and tally best-scenario selections
    per information criterion."""
    sets = _with_replicates(sets, replicates)
    if any(ps.batch != 2 for ps in sets):
        raise ValueError("run_batch2 requires batch-2 parameter sets")
    args = [(ps, shuffle_fraction, modify_fraction, hbic_as_printed, collect_raw) for ps in sets]
    results = _execute(_run_set_batch2, args, workers)
    return RunResult(
        rows=[row for row, _, _ in results],
        raw=[r for _, raw, _ in results for r in raw],
        failures=[f for _, _, fails in results for f in fails],
    )


# -- results CSV ------------------------------------------------------------------------


_KEY_FIELDS_B1 = (
    "batch",
    "set_index",
    "n_samples",
    "n_covariates",
    "scenario",
    "fitter",
    "sd_eff",
    "sd_res",
    "replicates",
    "n_replicates_effective",
)
_KEY_FIELDS_B2 = tuple(f for f in _KEY_FIELDS_B1 if f != "scenario")


def results_header(batch: int) -> list[str]:
    if batch == 1:
        return list(_KEY_FIELDS_B1) + list(BATCH1_AGGREGATES)
    return list(_KEY_FIELDS_B2) + list(BATCH2_AGGREGATES)


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _row_cells(row: SummaryRow) -> list[str]:
    ps = row.params
    cells = {
        "batch": ps.batch,
        "set_index": ps.set_index,
        "n_samples": ps.n_samples,
        "n_covariates": ps.n_covariates,
        "scenario": ps.scenario.value if ps.scenario is not None else "",
        "fitter": ps.fitter,
        "sd_eff": ps.sd_eff,
        "sd_res": ps.sd_res,
        "replicates": ps.replicates,
        "n_replicates_effective": row.n_replicates_effective,
    }
    cells.update(row.aggregates)
    return [_format_cell(cells[name]) for name in results_header(ps.batch)]


def write_results_csv(rows: list[SummaryRow], path) -> None:
    """One CSV row per summary row, stable documented column order."""
    if not rows:
        raise ValueError("no summary rows to write")
    batches = {row.params.batch for row in rows}
    if len(batches) != 1:
        raise ValueError("cannot mix batches in one results CSV")
    header = results_header(batches.pop())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(_row_cells(row))


def write_raw_csv(raw_rows: list[dict], path) -> None:
    if not raw_rows:
        raise ValueError("no raw rows to write")
    header = list(raw_rows[0].keys())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in raw_rows:
            writer.writerow([_format_cell(row[name]) for name in header])


def read_results_csv(path) -> list[dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty results CSV")
        return list(reader)
