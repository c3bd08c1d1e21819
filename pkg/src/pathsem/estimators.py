"""Scikit-learn style estimator fronts for the two fitting routes.

Both estimators take the hypothesized structure at construction, accept a
Dataset, DataFrame or array in ``fit``, and expose the fitted quantities as
trailing-underscore attributes, so they compose with ``get_params`` /
``clone`` and the wider sklearn tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .dag import Dag, parse_model_spec
from .datagen import Dataset
from .fit import fit_global, fit_piecewise, metric_bundle
from .metrics import DEFAULT_ALPHA, MetricBundle
from .validation import as_dataset


def _resolve_dag(dag) -> Dag:
    if isinstance(dag, Dag):
        return dag
    if isinstance(dag, str):
        return parse_model_spec(dag)
    raise ValueError("dag must be a Dag or a model-spec string")


class _BaseSEM(BaseEstimator):
    def __init__(self, dag=None, alpha=DEFAULT_ALPHA):
        self.dag = dag
        self.alpha = alpha

    def _fit_impl(self, data: Dataset):  # pragma: no cover - overridden
        raise NotImplementedError

    def fit(self, X, y=None):
        dag = _resolve_dag(self.dag)
        data = as_dataset(X, required_columns=dag.node_names)
        self.dag_ = dag
        self.data_n_obs_ = data.n_rows
        self.result_ = self._fit_impl(data)
        self.converged_ = self.result_.converged
        self.global_p_ = self.result_.global_p
        self._set_fitted_attributes()
        self._train_data = data
        return self

    def metric_bundle(self, X=None) -> MetricBundle:
        """Metric bundle against ``X`` (defaults to the training data)."""
        self._check_fitted()
        data = self._train_data if X is None else as_dataset(X, self.dag_.node_names)
        return metric_bundle(self.result_, data, self.alpha)

    def predict(self, X) -> np.ndarray:
        """Predicted values for the endogenous nodes, column per node.

        Each endogenous column is the fitted intercept plus the fitted
        coefficients applied to the parent columns of ``X``; columns follow
        ``endogenous_`` order.
        """
        self._check_fitted()
        data = as_dataset(X, required_columns=self.dag_.node_names)
        cols = []
        for node in self.endogenous_:
            parents = self.parents_[node]
            pred = np.full(data.n_rows, self.intercepts_[node])
            for parent in parents:
                pred = pred + self.coefficients_[(parent, node)] * data.column(parent)
            cols.append(pred)
        return np.column_stack(cols) if cols else np.empty((data.n_rows, 0))

    def _check_fitted(self) -> None:
        if not hasattr(self, "result_"):
            raise RuntimeError("estimator is not fitted; call fit(X) first")

    def _set_fitted_attributes(self) -> None:  # pragma: no cover - overridden
        raise NotImplementedError


class PiecewiseSEM(_BaseSEM):
    """Piecewise path-model estimator: per-equation OLS plus Fisher's C.

    Parameters
    ----------
    dag : Dag or str
        Hypothesized structure, or a model-spec string
        (``TARGET ~ SOURCE1 + SOURCE2`` lines).
    alpha : float
        Significance level used by the derived metric bundle.
    """

    def _fit_impl(self, data: Dataset):
        return fit_piecewise(_resolve_dag(self.dag), data)

    def _set_fitted_attributes(self) -> None:
        res = self.result_
        self.fisher_c_ = res.fisher_c
        self.df_ = res.df
        self.claims_ = res.claims
        self.claim_p_values_ = res.claim_p_values
        self.regressions_ = res.regressions
        self.endogenous_ = tuple(res.regressions)
        self.parents_ = {node: reg.predictors for node, reg in res.regressions.items()}
        self.intercepts_ = {node: reg.coefficients[0] for node, reg in res.regressions.items()}
        self.coefficients_ = res.path_estimates()


class GlobalSEM(_BaseSEM):
    """Covariance-structure path-model estimator with the ML chi-square test."""

    def _fit_impl(self, data: Dataset):
        return fit_global(_resolve_dag(self.dag), data)

    def _set_fitted_attributes(self) -> None:
        res = self.result_
        self.chi2_ = res.chi2
        self.df_ = res.df
        self.b_matrix_ = res.b_matrix
        self.psi_ = res.psi
        self.implied_sigma_ = res.implied_sigma
        self.sample_sigma_ = res.sample_sigma
        self.endo_r2_ = res.endo_r2
        self.coefficients_ = dict(res.path_estimates)
        self.endogenous_ = self.dag_.endogenous() if res.converged else ()
        self.parents_ = {
            node: tuple(sorted(self.dag_.parents(node), key=self.dag_.node_names.index))
            for node in self.endogenous_
        }
        # intercepts of the implied mean structure: fitted on the training means
        means = {name: float(np.mean(self._train_values[name])) for name in self.dag_.node_names}
        self.intercepts_ = {
            node: means[node]
            - sum(self.coefficients_[(p, node)] * means[p] for p in self.parents_[node])
            for node in self.endogenous_
        }

    def fit(self, X, y=None):
        dag = _resolve_dag(self.dag)
        data = as_dataset(X, required_columns=dag.node_names)
        self._train_values = {name: data.column(name) for name in dag.node_names}
        return super().fit(data)
