"""Input validation helpers bridging array-likes, data frames and Datasets."""

from __future__ import annotations

import numpy as np

from .datagen import Dataset


def as_dataset(X, required_columns=None) -> Dataset:
    """Coerce ``X`` into a :class:`Dataset`.

    Accepts an existing Dataset, anything with ``columns`` and ``to_numpy``
    (a pandas DataFrame, for instance), or a plain 2-D array, in which case
    ``required_columns`` supplies the column names in order.  Missing model
    columns are reported by name.
    """
    if isinstance(X, Dataset):
        data = X
    elif hasattr(X, "columns") and hasattr(X, "to_numpy"):
        data = Dataset(tuple(str(c) for c in X.columns), np.asarray(X.to_numpy(), dtype=float))
    else:
        values = np.asarray(X, dtype=float)
        if values.ndim != 2:
            raise ValueError("X must be a 2-D matrix")
        if required_columns is None:
            raise ValueError("column names are required for a bare array")
        if values.shape[1] != len(tuple(required_columns)):
            raise ValueError(
                f"X has {values.shape[1]} columns but {len(tuple(required_columns))} "
                "names were expected"
            )
        data = Dataset(tuple(required_columns), values)
    if required_columns is not None:
        missing = [c for c in required_columns if c not in data.columns]
        if missing:
            raise ValueError(f"data is missing model column(s): {', '.join(missing)}")
    return data
