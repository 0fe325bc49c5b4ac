"""Scikit-learn style estimators wrapping the inversion drivers.

Each estimator's ``fit(data, initial_model)`` consumes a DataSet plus a
starting Model and exposes the fitted velocity model as ``model_``, the
iteration stream as ``reports_``, and the solve accounting as ``ledger_``.
``predict`` forward-models records from the fitted model, so a fitted
estimator can be scored against held-out observations.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .acquisition import Acquisition, DataSet, RickerSpectrum, synthesize_data
from .grid import BoundConstraint, Rectangle, build_partition
from .inversion import (
    InversionConfig,
    ScheduleEntry,
    irwri_frequency_batch,
    multiblock_frequency_batch,
    run_frequency_schedule,
)
from .linsolve import SolveLedger
from .localized import lwi_multi_frequency
from .validation import check_dataset, check_frequencies, check_model

__all__ = ["IRWRI", "MultiBlockInversion", "LocalizedInversion"]


class _FrequencyDomainInversion(BaseEstimator):
    """Shared parameter handling and fit plumbing for the inversion drivers."""

    def __init__(self, *, v_min=1000.0, v_max=4500.0, pml_width=20,
                 lambda_rel=0.1, lambda_fixed=None, iters_per_freq=5,
                 passes=1, frequencies=None, ricker_f0_hz=10.0):
        self.v_min = v_min
        self.v_max = v_max
        self.pml_width = pml_width
        self.lambda_rel = lambda_rel
        self.lambda_fixed = lambda_fixed
        self.iters_per_freq = iters_per_freq
        self.passes = passes
        self.frequencies = frequencies
        self.ricker_f0_hz = ricker_f0_hz

    def _config(self, data: DataSet, **extra) -> InversionConfig:
        freqs = tuple(self.frequencies) if self.frequencies else data.frequencies
        check_frequencies(data, freqs)
        schedule = (ScheduleEntry(freqs_hz=freqs, passes=self.passes,
                                  iters_per_freq=self.iters_per_freq),)
        return InversionConfig(
            bounds=BoundConstraint(self.v_min, self.v_max),
            pml_width=self.pml_width,
            lambda_rel=self.lambda_rel,
            lambda_fixed=self.lambda_fixed,
            iters_per_freq=self.iters_per_freq,
            spectrum_f0=self.ricker_f0_hz,
            schedule=schedule,
            **extra,
        )

    def fit(self, data, initial_model):
        data = check_dataset(data)
        initial_model = check_model(initial_model)
        self.ledger_ = SolveLedger()
        self.model_, self.reports_ = self._run(data, initial_model)
        self.n_iter_ = sum(1 for r in self.reports_ if r.phase == "iterate")
        return self

    def predict(self, data=None, frequencies=None) -> DataSet:
        """Forward-model records from the fitted model.

        Geometry and frequencies default to those of ``data`` (or of the
        training data recorded on the estimator).
        """
        if not hasattr(self, "model_"):
            raise RuntimeError("estimator is not fitted")
        source = data if data is not None else self._fit_data_
        freqs = frequencies if frequencies is not None else source.frequencies
        acq = Acquisition(sources=source.source_positions,
                          receivers=source.receiver_positions,
                          spectrum=RickerSpectrum(self.ricker_f0_hz))
        return synthesize_data(self.model_, acq, freqs, self.pml_width)

    def score(self, data, initial_model=None) -> float:
        """Negative relative data misfit of the fitted model (0 is perfect)."""
        data = check_dataset(data)
        predicted = self.predict(data)
        num = 0.0
        den = 0.0
        for f in data.frequencies:
            num += np.linalg.norm(predicted.records[f] - data.records[f]) ** 2
            den += np.linalg.norm(data.records[f]) ** 2
        return -float(np.sqrt(num / den))

    def fit_predict(self, data, initial_model) -> DataSet:
        return self.fit(data, initial_model).predict(data)

    def _run(self, data, initial_model):
        raise NotImplementedError


class IRWRI(_FrequencyDomainInversion):
    """Full-domain alternating inversion (fields, model, duals)."""

    def _run(self, data, initial_model):
        self._fit_data_ = data
        config = self._config(data)
        return run_frequency_schedule(irwri_frequency_batch, initial_model,
                                      data, config, ledger=self.ledger_)


class _PartitionedInversion(_FrequencyDomainInversion):
    def __init__(self, *, rectangles=(), v_min=1000.0, v_max=4500.0,
                 pml_width=20, lambda_rel=0.1, lambda_fixed=None,
                 iters_per_freq=5, passes=1, frequencies=None,
                 ricker_f0_hz=10.0):
        super().__init__(v_min=v_min, v_max=v_max, pml_width=pml_width,
                         lambda_rel=lambda_rel, lambda_fixed=lambda_fixed,
                         iters_per_freq=iters_per_freq, passes=passes,
                         frequencies=frequencies, ricker_f0_hz=ricker_f0_hz)
        self.rectangles = rectangles

    def _partition(self, grid):
        rects = [r if isinstance(r, Rectangle) else Rectangle(*r)
                 for r in self.rectangles]
        if not rects:
            raise ValueError("a partitioned inversion needs target rectangles")
        return build_partition(grid, rects)


class MultiBlockInversion(_PartitionedInversion):
    """Four-block alternating reference loop over split fields and models."""

    def _run(self, data, initial_model):
        self._fit_data_ = data
        config = self._config(data)
        partition = self._partition(initial_model.grid)

        def batch(m, ds, f, cfg, *, ledger=None, n_iter=None):
            return multiblock_frequency_batch(m, ds, f, partition, cfg,
                                              ledger=ledger, n_iter=n_iter)

        return run_frequency_schedule(batch, initial_model, data, config,
                                      ledger=self.ledger_)


class LocalizedInversion(_PartitionedInversion):
    """Target-only inversion with a frozen background per frequency batch."""

    def __init__(self, *, rectangles=(), update_background_once=False,
                 v_min=1000.0, v_max=4500.0, pml_width=20, lambda_rel=0.1,
                 lambda_fixed=None, iters_per_freq=5, passes=1,
                 frequencies=None, ricker_f0_hz=10.0):
        super().__init__(rectangles=rectangles, v_min=v_min, v_max=v_max,
                         pml_width=pml_width, lambda_rel=lambda_rel,
                         lambda_fixed=lambda_fixed, iters_per_freq=iters_per_freq,
                         passes=passes, frequencies=frequencies,
                         ricker_f0_hz=ricker_f0_hz)
        self.update_background_once = update_background_once

    def _run(self, data, initial_model):
        self._fit_data_ = data
        config = self._config(
            data, update_background_once=self.update_background_once)
        partition = self._partition(initial_model.grid)
        return lwi_multi_frequency(initial_model, data, partition, config,
                                   ledger=self.ledger_)
