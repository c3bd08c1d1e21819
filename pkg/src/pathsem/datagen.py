"""Dataset simulation from weighted DAGs under five misspecification scenarios."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dag import Dag, ScenarioKind, add_edges, drop_edges, shuffle_edges, topological_order

EXOGENOUS_LAWS = ("uniform", "normal")


@dataclass(frozen=True)
class WeightedDag:
    """A Dag plus the parameters of its data-generating process.

    ``coefficients`` maps every edge to its path coefficient; ``residual_sd``
    maps every endogenous node to the standard deviation of its additive
    Gaussian noise; exogenous nodes are drawn from ``exogenous_law``
    (``"uniform"`` = standard uniform, ``"normal"`` = standard normal).
    """

    dag: Dag
    coefficients: dict[tuple[str, str], float]
    residual_sd: dict[str, float]
    exogenous_law: str = "uniform"

    def __post_init__(self):
        if set(self.coefficients) != set(self.dag.edges):
            raise ValueError("coefficients must be keyed exactly by the dag edges")
        endo = set(self.dag.endogenous())
        if set(self.residual_sd) != endo:
            raise ValueError("residual_sd must be keyed exactly by the endogenous nodes")
        if any(sd <= 0 for sd in self.residual_sd.values()):
            raise ValueError("residual_sd must be positive")
        if self.exogenous_law not in EXOGENOUS_LAWS:
            raise ValueError(f"exogenous_law must be one of {EXOGENOUS_LAWS}")


@dataclass(frozen=True)
class Dataset:
    """An N x n numeric sample with named columns (no missing values)."""

    columns: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D matrix")
        if values.shape[1] != len(self.columns):
            raise ValueError("column count mismatch")
        if values.shape[0] < 1:
            raise ValueError("need at least one row")
        if not np.isfinite(values).all():
            raise ValueError("values must be finite")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def matrix(self, names) -> np.ndarray:
        idx = [self.columns.index(name) for name in names]
        return self.values[:, idx]

    def to_csv(self, path) -> None:
        """Write as UTF-8 CSV with a header row; '.' decimal separator."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.values:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        """Read a header-row CSV; scientific notation is accepted."""
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: empty CSV") from None
            rows = [[float(cell) for cell in row] for row in reader if row]
        if not rows:
            raise ValueError(f"{path}: no data rows")
        return cls(tuple(h.strip() for h in header), np.array(rows, dtype=float))


@dataclass(frozen=True)
class GenerationRecipe:
    """How to simulate data for a model that will later be fitted.

    ``model_dag`` is the structure handed to the fitter; the scenario decides
    which (possibly transformed) structure actually generates the data.
    """

    model_dag: Dag
    scenario: ScenarioKind
    sd_eff: float
    sd_res: float
    shuffle_fraction: float = 0.25
    modify_fraction: float = 0.25
    exogenous_law: str = "uniform"

    def __post_init__(self):
        if self.sd_eff <= 0 or self.sd_res <= 0:
            raise ValueError("sd_eff and sd_res must be positive")
        for frac in (self.shuffle_fraction, self.modify_fraction):
            if not 0.0 <= frac <= 1.0:
                raise ValueError("fractions must be in [0, 1]")


def draw_coefficients(
    dag: Dag,
    sd_eff: float,
    rng: np.random.Generator,
    sd_res: float = 1.0,
    exogenous_law: str = "uniform",
) -> WeightedDag:
    """Draw one path coefficient per edge, i.i.d. Normal(0, sd_eff**2).

    Every endogenous node gets the same residual standard deviation
    ``sd_res``; edge order is fixed (sorted) so the draw is reproducible.
    """
    if sd_eff < 0:
        raise ValueError("sd_eff must be non-negative")
    coefs = {edge: float(rng.normal(0.0, sd_eff)) for edge in sorted(dag.edges)}
    resid = {node: float(sd_res) for node in dag.endogenous()}
    return WeightedDag(dag, coefs, resid, exogenous_law)


def generate(wdag: WeightedDag, n_rows: int, rng: np.random.Generator) -> Dataset:
    """Simulate ``n_rows`` observations from a weighted DAG.

    Columns are filled in topological order: exogenous nodes from the
    configured law, endogenous nodes as the coefficient-weighted sum of their
    parent columns plus Gaussian noise.  No intercepts enter the linear
    predictors.
    """
    if n_rows < 1:
        raise ValueError("n_rows must be at least 1")
    dag = wdag.dag
    data: dict[str, np.ndarray] = {}
    for node in topological_order(dag):
        parents = sorted(dag.parents(node), key=dag.node_names.index)
        if not parents:
            if wdag.exogenous_law == "uniform":
                data[node] = rng.uniform(0.0, 1.0, size=n_rows)
            else:
                data[node] = rng.normal(0.0, 1.0, size=n_rows)
        else:
            linear = np.zeros(n_rows)
            for p in parents:
                linear += wdag.coefficients[(p, node)] * data[p]
            data[node] = linear + rng.normal(0.0, wdag.residual_sd[node], size=n_rows)
    matrix = np.column_stack([data[name] for name in dag.node_names])
    return Dataset(dag.node_names, matrix)


def generate_scenario(
    recipe: GenerationRecipe, n_rows: int, rng: np.random.Generator
) -> tuple[Dataset, Dag]:
    """Simulate one dataset under the recipe's scenario.

    Returns the dataset together with the structure that actually generated
    it, for audit.  The random scenario draws every column i.i.d. standard
    normal (generating structure: no edges); the other scenarios generate
    from the model structure after the scenario's edge transformation, with
    fresh coefficients each call.
    """
    model = recipe.model_dag
    if recipe.scenario is ScenarioKind.RANDOM:
        values = rng.standard_normal((n_rows, model.n))
        return Dataset(model.node_names, values), model.with_edges(())
    if recipe.scenario is ScenarioKind.EXACT:
        gen_dag = model
    elif recipe.scenario is ScenarioKind.SHUFFLED:
        gen_dag = shuffle_edges(model, recipe.shuffle_fraction, rng)
    elif recipe.scenario is ScenarioKind.OVERSPECIFIED:
        gen_dag = drop_edges(model, recipe.modify_fraction, rng)
    elif recipe.scenario is ScenarioKind.UNDERSPECIFIED:
        gen_dag = add_edges(model, recipe.modify_fraction, rng)
    else:  # pragma: no cover
        raise ValueError(f"unhandled scenario {recipe.scenario}")
    wdag = draw_coefficients(
        gen_dag, recipe.sd_eff, rng, sd_res=recipe.sd_res, exogenous_law=recipe.exogenous_law
    )
    return generate(wdag, n_rows, rng), gen_dag
