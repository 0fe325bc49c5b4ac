"""Input validation helpers for the estimator layer."""

from __future__ import annotations

import numpy as np

from .acquisition import DataSet
from .grid import Grid, Model

__all__ = ["check_dataset", "check_model", "check_frequencies"]


def check_dataset(data) -> DataSet:
    if not isinstance(data, DataSet):
        raise TypeError(f"expected a DataSet, got {type(data).__name__}")
    return data


def check_model(model, grid: Grid | None = None) -> Model:
    if not isinstance(model, Model):
        raise TypeError(f"expected a Model, got {type(model).__name__}")
    if grid is not None and (model.grid.nx, model.grid.nz) != (grid.nx, grid.nz):
        raise ValueError(
            f"model grid {model.grid.nx}x{model.grid.nz} does not match "
            f"expected {grid.nx}x{grid.nz}"
        )
    return model


def check_frequencies(data: DataSet, freqs) -> None:
    missing = [f for f in freqs if float(f) not in data.records]
    if missing:
        raise ValueError(f"dataset is missing records at {missing} Hz; "
                         f"available: {sorted(data.records)}")
