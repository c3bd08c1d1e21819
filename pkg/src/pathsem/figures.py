"""Figure-ready tidy tables (and optional SVG plots) from results CSVs.

Each figure id selects the rows and columns for one panel family of the
study: acceptance (fig2), path significance (fig3), R-square (fig4), failed
conditional-independence tests (fig5), best-scenario selection (fig6) and
the full signal/noise sweep (appendix).
"""

from __future__ import annotations

from .errors import PathsemError
from .sim import BATCH1_AGGREGATES, IC_METRICS, IC_SCENARIOS

FIGURE_IDS = ("fig2", "fig3", "fig4", "fig5", "fig6", "appendix")

# main-text figures show the central signal/noise levels only
MAIN_SD_EFF = 2.5
MAIN_SD_RES = 1.0

_BATCH1_FIGURES = {
    "fig2": ("prop_accepted", "prop_accepted"),
    "fig3": ("mean_prop_significant", "prop_significant"),
    "fig4": ("mean_avg_r2", "avg_r2"),
    "fig5": ("mean_prop_ci_failed", "prop_ci_failed"),
}

_BATCH2_MARKER = "aicc_best_exact"


class FigureSchemaError(PathsemError):
    """Results CSV does not match what the requested figure needs."""


def _require(condition, message):
    if not condition:
        raise FigureSchemaError(message)


def _batch_of(rows) -> int:
    batches = {row.get("batch") for row in rows}
    _require(len(batches) == 1 and batches <= {"1", "2"}, "results CSV must hold exactly one batch")
    return int(batches.pop())


def _num(cell: str) -> float:
    return float(cell)


def figure_table(rows: list[dict[str, str]], figure_id: str) -> tuple[list[str], list[list[str]]]:
    """Build the tidy table for one figure from parsed results-CSV rows.

    Returns the header and data rows (as strings, ready for CSV).  Raises
    :class:`FigureSchemaError` when the CSV is from the wrong batch, misses
    columns, or holds duplicate panel cells.
    """
    if figure_id not in FIGURE_IDS:
        raise FigureSchemaError(f"unknown figure id {figure_id!r}; expected one of {FIGURE_IDS}")
    _require(bool(rows), "results CSV has no rows")
    batch = _batch_of(rows)

    if figure_id in _BATCH1_FIGURES:
        _require(batch == 1, f"{figure_id} needs a batch-1 results CSV")
        source, out_name = _BATCH1_FIGURES[figure_id]
        _require(source in rows[0], f"results CSV lacks column {source!r}")
        picked = [
            r for r in rows if _num(r["sd_eff"]) == MAIN_SD_EFF and _num(r["sd_res"]) == MAIN_SD_RES
        ]
        _require(bool(picked), f"no rows at sd_eff={MAIN_SD_EFF}, sd_res={MAIN_SD_RES}")
        header = ["n_samples", "n_cov", "scenario", "fitter", out_name]
        out, seen = [], set()
        for r in picked:
            key = (r["n_samples"], r["n_covariates"], r["scenario"], r["fitter"])
            _require(key not in seen, f"duplicate panel cell {key}")
            seen.add(key)
            out.append([r["n_samples"], r["n_covariates"], r["scenario"], r["fitter"], r[source]])
        out.sort(key=lambda c: (int(c[1]), c[2], c[3], int(c[0])))
        return header, out

    if figure_id == "fig6":
        _require(batch == 2, "fig6 needs a batch-2 results CSV")
        _require(_BATCH2_MARKER in rows[0], f"results CSV lacks column {_BATCH2_MARKER!r}")
        picked = [
            r for r in rows if _num(r["sd_eff"]) == MAIN_SD_EFF and _num(r["sd_res"]) == MAIN_SD_RES
        ]
        _require(bool(picked), f"no rows at sd_eff={MAIN_SD_EFF}, sd_res={MAIN_SD_RES}")
        header = ["n_samples", "n_cov", "fitter", "ic_metric", "scenario", "prop_best"]
        out, seen = [], set()
        for r in picked:
            cell = (r["n_samples"], r["n_covariates"], r["fitter"])
            _require(cell not in seen, f"duplicate panel cell {cell}")
            seen.add(cell)
            for metric in IC_METRICS:
                for scen in IC_SCENARIOS:
                    out.append(
                        [
                            r["n_samples"],
                            r["n_covariates"],
                            r["fitter"],
                            metric,
                            scen.value,
                            r[f"{metric}_best_{scen.value}"],
                        ]
                    )
                out.append(
                    [r["n_samples"], r["n_covariates"], r["fitter"], metric, "none", r[f"{metric}_none"]]
                )
        out.sort(key=lambda c: (int(c[1]), c[2], c[3], c[4], int(c[0])))
        return header, out

    # appendix: the full signal/noise sweep, batch decides the layout
    if batch == 1:
        header = ["n_samples", "n_cov", "scenario", "fitter", "sd_eff", "sd_res", *BATCH1_AGGREGATES]
        out = [
            [
                r["n_samples"],
                r["n_covariates"],
                r["scenario"],
                r["fitter"],
                r["sd_eff"],
                r["sd_res"],
                *[r[a] for a in BATCH1_AGGREGATES],
            ]
            for r in rows
        ]
        out.sort(key=lambda c: (int(c[1]), c[2], c[3], float(c[4]), float(c[5]), int(c[0])))
        return header, out
    header = ["n_samples", "n_cov", "fitter", "sd_eff", "sd_res", "ic_metric", "scenario", "prop_best"]
    out = []
    for r in rows:
        for metric in IC_METRICS:
            for scen in IC_SCENARIOS:
                out.append(
                    [
                        r["n_samples"],
                        r["n_covariates"],
                        r["fitter"],
                        r["sd_eff"],
                        r["sd_res"],
                        metric,
                        scen.value,
                        r[f"{metric}_best_{scen.value}"],
                    ]
                )
            out.append(
                [r["n_samples"], r["n_covariates"], r["fitter"], r["sd_eff"], r["sd_res"], metric, "none", r[f"{metric}_none"]]
            )
    out.sort(key=lambda c: (int(c[1]), c[2], float(c[3]), float(c[4]), c[5], c[6], int(c[0])))
    return header, out


def write_figure_csv(header: list[str], rows: list[list[str]], path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def plot_figure(header: list[str], rows: list[list[str]], figure_id: str, path) -> None:
    """Optional static SVG rendering (log-scaled sample-size axis).

    Purely presentational; requires matplotlib.
    """
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # pragma: no cover - matplotlib is an extra
        raise PathsemError("SVG plotting requires matplotlib (install extra 'plots')") from exc

    idx = {name: i for i, name in enumerate(header)}
    y_name = header[-1]
    panel_keys = sorted({row[idx["n_cov"]] for row in rows}, key=int)
    fig, axes = plt.subplots(1, len(panel_keys), figsize=(4 * len(panel_keys), 3.2), squeeze=False)
    for ax, n_cov in zip(axes[0], panel_keys):
        panel = [r for r in rows if r[idx["n_cov"]] == n_cov]
        group_cols = [c for c in header if c not in ("n_samples", "n_cov", y_name)]
        groups = sorted({tuple(r[idx[c]] for c in group_cols) for r in panel})
        for g in groups:
            series = sorted(
                (int(r[idx["n_samples"]]), float(r[idx[y_name]]))
                for r in panel
                if tuple(r[idx[c]] for c in group_cols) == g
            )
            ax.plot([x for x, _ in series], [y for _, y in series], marker="o", label="/".join(g))
        ax.set_xscale("log")
        ax.set_xlabel("sample size")
        ax.set_title(f"{figure_id}: n_cov={n_cov}")
        ax.set_ylabel(y_name)
    axes[0][-1].legend(fontsize=6, loc="best")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
