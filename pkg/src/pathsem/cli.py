"""Command-line interface: simulate, fit, generate, figure.

Exit codes are a stable scripting contract: 0 on success, 1 on usage or
parse errors (bad flags, malformed model specs, schema mismatches), 2 on
runtime or numeric failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .dag import ScenarioKind, read_model_spec
from .datagen import Dataset, GenerationRecipe, generate_scenario
from .errors import ModelSpecError, PathsemError
from .figures import FIGURE_IDS, FigureSchemaError, figure_table, plot_figure, write_figure_csv
from .fit import fit_global, fit_piecewise, metric_bundle, path_table, summary_dict, write_path_table
from .metrics import ci_local_tests, diagnose
from .sim import (
    DEFAULT_CONNECTANCE,
    DEFAULT_REPLICATES,
    expand_grid,
    read_results_csv,
    run_batch1,
    run_batch2,
    write_raw_csv,
    write_results_csv,
)


class UsageError(PathsemError):
    """Bad invocation or unparsable input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); keep 2 for runtime only
        raise UsageError(message)


PRESETS = {
    "paper-defaults": {},
    "desk": {
        "n_samples": (20, 100, 1000, 10000),
        "n_covariates": (5, 10),
        "sd_eff": (2.5,),
        "sd_res": (1.0,),
    },
}


def _csv_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in str(text).split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _csv_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in str(text).split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _csv_strs(text: str) -> tuple[str, ...]:
    return tuple(tok.strip() for tok in str(text).split(","))


def build_parser() -> _Parser:
    parser = _Parser(prog="pathsem", description=__doc__)
    parser.add_argument("--version", action="version", version=f"pathsem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulation batch over a parameter grid")
    sim.add_argument("--batch", type=int, choices=(1, 2), required=True)
    sim.add_argument("--preset", choices=sorted(PRESETS), default="paper-defaults")
    sim.add_argument("--config", help="key=value config file; flags override it")
    sim.add_argument("--seed", type=int, default=0, help="master seed")
    sim.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", required=True, help="results CSV path")
    sim.add_argument("--alpha", type=float, default=0.05)
    sim.add_argument("--connectance", type=float, default=DEFAULT_CONNECTANCE)
    sim.add_argument("--hbic-as-printed", action="store_true", dest="hbic_as_printed")
    sim.add_argument("--emit-raw", action="store_true", dest="emit_raw")
    sim.add_argument("--n", help="sample sizes, comma separated (grid override)")
    sim.add_argument("--n-cov", help="covariate counts, comma separated (grid override)")
    sim.add_argument("--scenario", help="scenarios, comma separated (batch 1 grid override)")
    sim.add_argument("--fitter", help="fitters, comma separated (grid override)")
    sim.add_argument("--sd-eff", dest="sd_eff", help="signal levels, comma separated")
    sim.add_argument("--sd-res", dest="sd_res", help="noise levels, comma separated")

    fit = sub.add_parser("fit", help="fit a model spec to a data CSV and diagnose it")
    fit.add_argument("--model", required=True, help="model spec file (TARGET ~ SOURCES)")
    fit.add_argument("--data", required=True, help="data CSV with a header row")
    fit.add_argument("--fitter", choices=("piecewise", "global"), default="piecewise")
    fit.add_argument("--alpha", type=float, default=0.05)
    fit.add_argument("--out", help="output prefix for .paths.csv/.ci.csv/.summary.json")

    gen = sub.add_parser("generate", help="simulate a data CSV from a model spec")
    gen.add_argument("--model", required=True)
    gen.add_argument("--scenario", default="exact")
    gen.add_argument("--n", type=int, required=True, help="sample size")
    gen.add_argument("--sd-eff", dest="sd_eff", type=float, default=2.5)
    gen.add_argument("--sd-res", dest="sd_res", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="data CSV path")

    figure = sub.add_parser("figure", help="emit a figure-ready tidy CSV from results")
    figure.add_argument("--results", required=True, help="results CSV from `simulate`")
    figure.add_argument("--figure", required=True, choices=FIGURE_IDS, dest="figure_id")
    figure.add_argument("--out", required=True, help="tidy CSV path")
    figure.add_argument("--svg", action="store_true", help="also write a static SVG plot")
    return parser


# -- simulate ---------------------------------------------------------------------


def _load_config(path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key=value")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    return values


_CONFIG_KEYS = {
    "seed": int,
    "replicates": int,
    "workers": int,
    "alpha": float,
    "connectance": float,
    "hbic_as_printed": None,
    "emit_raw": None,
    "n": str,
    "n_cov": str,
    "scenario": str,
    "fitter": str,
    "sd_eff": str,
    "sd_res": str,
    "preset": str,
}


def _apply_config(args, argv_rest: list[str]) -> None:
    """Fill argument values from the config file where no flag was given."""
    config = _load_config(args.config)
    given = {tok.split("=", 1)[0].lstrip("-").replace("-", "_") for tok in argv_rest if tok.startswith("--")}
    for key, value in config.items():
        if key not in _CONFIG_KEYS:
            raise UsageError(f"unknown config key {key!r}")
        if key in given:
            continue  # explicit flags win
        caster = _CONFIG_KEYS[key]
        if caster is None:
            parsed = value.strip().lower() in ("1", "true", "yes", "on")
        else:
            try:
                parsed = caster(value)
            except ValueError:
                raise UsageError(f"config key {key!r} has invalid value {value!r}") from None
        setattr(args, key, parsed)


def cmd_simulate(args, argv: list[str]) -> int:
    if args.config:
        _apply_config(args, argv)
    preset = dict(PRESETS[args.preset])
    overrides = {
        "n_samples": _csv_ints(args.n) if args.n else preset.get("n_samples"),
        "n_covariates": _csv_ints(args.n_cov) if args.n_cov else preset.get("n_covariates"),
        "sd_eff": _csv_floats(args.sd_eff) if args.sd_eff else preset.get("sd_eff"),
        "sd_res": _csv_floats(args.sd_res) if args.sd_res else preset.get("sd_res"),
        "fitters": _csv_strs(args.fitter) if args.fitter else preset.get("fitters"),
    }
    if args.batch == 1:
        overrides["scenarios"] = _csv_strs(args.scenario) if args.scenario else preset.get("scenarios")
    elif args.scenario:
        raise UsageError("--scenario applies to batch 1 only")
    started = time.time()
    try:
        sets = expand_grid(
            args.batch,
            replicates=args.replicates,
            master_seed=args.seed,
            connectance=args.connectance,
            **overrides,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.batch == 1:
        result = run_batch1(
            sets, workers=args.workers, alpha=args.alpha, collect_raw=args.emit_raw
        )
    else:
        result = run_batch2(
            sets,
            workers=args.workers,
            hbic_as_printed=args.hbic_as_printed,
            collect_raw=args.emit_raw,
        )
    write_results_csv(result.rows, args.out)
    if args.emit_raw:
        write_raw_csv(result.raw, f"{args.out}.raw.csv")
    manifest = {
        "command": "simulate",
        "version": __version__,
        "batch": args.batch,
        "preset": args.preset,
        "seed": args.seed,
        "replicates": args.replicates,
        "workers": args.workers,
        "alpha": args.alpha,
        "connectance": args.connectance,
        "hbic_as_printed": args.hbic_as_printed,
        "n_parameter_sets": len(sets),
        "grid": {
            key: list(value) if value is not None else "defaults"
            for key, value in overrides.items()
        },
        "wall_time_s": round(time.time() - started, 3),
        "failures": result.failures,
    }
    _write_json(f"{args.out}.manifest.json", manifest)
    print(f"wrote {len(result.rows)} summary rows to {args.out} ({len(result.failures)} failures)")
    return 0


# -- fit --------------------------------------------------------------------------


def _load_model_and_data(model_path, data_path):
    try:
        dag = read_model_spec(model_path)
    except OSError as exc:
        raise UsageError(f"cannot read model spec: {exc}") from exc
    try:
        data = Dataset.from_csv(data_path)
    except OSError as exc:
        raise UsageError(f"cannot read data CSV: {exc}") from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    missing = [v for v in dag.node_names if v not in data.columns]
    if missing:
        raise UsageError(f"data is missing model column(s): {', '.join(missing)}")
    return dag, data


def cmd_fit(args) -> int:
    dag, data = _load_model_and_data(args.model, args.data)
    fit = fit_piecewise(dag, data) if args.fitter == "piecewise" else fit_global(dag, data)
    bundle = metric_bundle(fit, data, alpha=args.alpha)
    verdict = diagnose(bundle)
    summary = summary_dict(fit)

    print(f"fitter: {args.fitter}   converged: {fit.converged}")
    stat = summary["statistic"]
    print(f"global test: {stat['name']} = {stat['value']:.4g}, df = {stat['df']}, "
          f"p = {summary['global_p']:.4g}  ->  {'accepted' if bundle.accepted else 'rejected'}")
    if fit.converged:
        print("\npaths:")
        print(f"{'response':<12}{'predictor':<12}{'estimate':>12}{'se':>12}{'statistic':>12}{'p':>12}")
        for row in path_table(fit):
            print(
                f"{row['response']:<12}{row['predictor']:<12}{row['estimate']:>12.4g}"
                f"{row['se']:>12.4g}{row['statistic']:>12.4g}{row['p']:>12.4g}"
            )
        ci = ci_local_tests(dag, data, alpha=args.alpha)
        print("\nconditional independence claims:")
        if not ci.claims:
            print("  (saturated model, no claims)")
        for claim, p in zip(ci.claims, ci.p_values):
            cond = ",".join(sorted(claim.conditioning_set)) or "-"
            flag = "FAILED" if p < args.alpha else "ok"
            print(f"  {claim.x} _||_ {claim.y} | {cond}: p = {p:.4g} [{flag}]")
        print(
            f"\nprop significant paths: {bundle.prop_significant_paths:.3f}   "
            f"avg R2: {bundle.avg_r2:.3f}   prop CI failed: {bundle.prop_ci_failed:.3f}"
        )
        print(f"loglik: {bundle.loglik:.4f}   k: {bundle.k_params}   n: {bundle.n_obs}")
        print(f"AICc: {bundle.aicc:.4f}   BIC: {bundle.bic:.4f}   HBIC: {bundle.hbic:.4f}")
    print(f"\ndiagnosis: {verdict.label}")
    print(f"  {verdict.advice}")

    if args.out:
        if fit.converged:
            write_path_table(fit, f"{args.out}.paths.csv")
            ci = ci_local_tests(dag, data, alpha=args.alpha)
            _write_ci_csv(ci, f"{args.out}.ci.csv")
        payload = {
            "summary": summary,
            "metrics": {
                "accepted": bundle.accepted,
                "prop_significant_paths": bundle.prop_significant_paths,
                "avg_r2": bundle.avg_r2,
                "prop_ci_failed": bundle.prop_ci_failed,
                "aicc": bundle.aicc,
                "bic": bundle.bic,
                "hbic": bundle.hbic,
            },
            "diagnosis": {"label": verdict.label, "advice": verdict.advice},
        }
        _write_json(f"{args.out}.summary.json", payload)
    return 0


def _write_ci_csv(ci, path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "conditioning_set", "p"])
        for claim, p in zip(ci.claims, ci.p_values):
            writer.writerow([claim.x, claim.y, " ".join(sorted(claim.conditioning_set)), repr(p)])


# -- generate ----------------------------------------------------------------------


def cmd_generate(args) -> int:
    try:
        dag = read_model_spec(args.model)
    except OSError as exc:
        raise UsageError(f"cannot read model spec: {exc}") from exc
    try:
        scenario = ScenarioKind.parse(args.scenario)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    recipe = GenerationRecipe(
        model_dag=dag, scenario=scenario, sd_eff=args.sd_eff, sd_res=args.sd_res
    )
    rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
    data, generating = generate_scenario(recipe, args.n, rng)
    data.to_csv(args.out)
    manifest = {
        "command": "generate",
        "version": __version__,
        "scenario": scenario.value,
        "n": args.n,
        "sd_eff": args.sd_eff,
        "sd_res": args.sd_res,
        "seed": args.seed,
        "model_edges": sorted(map(list, dag.edges)),
        "generating_edges": sorted(map(list, generating.edges)),
        "columns": list(data.columns),
    }
    _write_json(f"{args.out}.manifest.json", manifest)
    print(f"wrote {data.n_rows} rows x {len(data.columns)} columns to {args.out}")
    return 0


# -- figure ------------------------------------------------------------------------


def cmd_figure(args) -> int:
    try:
        rows = read_results_csv(args.results)
    except OSError as exc:
        raise UsageError(f"cannot read results CSV: {exc}") from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        header, table = figure_table(rows, args.figure_id)
    except FigureSchemaError as exc:
        raise UsageError(str(exc)) from exc
    write_figure_csv(header, table, args.out)
    print(f"wrote {len(table)} tidy rows to {args.out}")
    if args.svg:
        svg_path = f"{args.out}.svg"
        plot_figure(header, table, args.figure_id, svg_path)
        print(f"wrote plot to {svg_path}")
    return 0


# -- entry point --------------------------------------------------------------------


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            return cmd_simulate(args, argv)
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "figure":
            return cmd_figure(args)
        raise UsageError(f"unknown command {args.command!r}")  # pragma: no cover
    except (UsageError, ModelSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime/numeric failures
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
