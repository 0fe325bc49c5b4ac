"""Alternating-direction inversion machinery shared by all drivers.

Contains the scaled augmented-Lagrangian pieces: data-assimilated wavefield
solves, closed-form model updates (the wave equation is bilinear and the mass
term is diagonal, so the model subproblem decouples per node), dual ascent,
and the two full-domain reference loops (single-block and four-block).

Within one iteration wavefields are updated before model parameters, and the
dual variables last; model updates consume the iteration's new wavefields.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .acquisition import Acquisition, DataSet, ObservationOperator, RickerSpectrum, build_observation
from .grid import BoundConstraint, Model, Partition
from .helmholtz import ColumnBlocks, HelmholtzSystem, assemble, split_columns
from .linsolve import SolveLedger, solve_augmented_normal, solve_target_normal

__all__ = [
    "DualState",
    "IterationReport",
    "ScheduleEntry",
    "InversionConfig",
    "AugmentedLagrangian",
    "da_wavefield",
    "update_model_full",
    "update_model_target",
    "update_duals",
    "update_duals_full",
    "irwri_frequency_batch",
    "multiblock_frequency_batch",
    "run_frequency_schedule",
    "reports_to_csv",
    "resolve_lambda",
    "acquisition_from",
]


@dataclass(frozen=True)
class DualState:
    """Scaled dual variables: running sums of the two constraint violations."""

    b_hat: np.ndarray  # wave-equation residual accumulator, (N, n_s)
    d_hat: np.ndarray  # data residual accumulator, (n_r, n_s)

    @classmethod
    def zeros(cls, n_pad: int, n_receivers: int, n_sources: int) -> "DualState":
        return cls(
            b_hat=np.zeros((n_pad, n_sources), dtype=complex),
            d_hat=np.zeros((n_receivers, n_sources), dtype=complex),
        )

    def advanced(self, wave_residual: np.ndarray, data_residual: np.ndarray) -> "DualState":
        b_hat = self.b_hat + wave_residual
        d_hat = self.d_hat + data_residual
        if not (np.all(np.isfinite(b_hat)) and np.all(np.isfinite(d_hat))):
            raise FloatingPointError("dual update produced non-finite values")
        return DualState(b_hat=b_hat, d_hat=d_hat)


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    freq_hz: float
    phase: str
    data_residual: float
    source_residual: float
    model_change: float
    psi: float
    full_solves: int
    target_solves: int


def reports_to_csv(reports, path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["iter", "freq_hz", "data_res", "source_res", "model_change", "psi",
         "full_solves", "target_solves", "phase"]
    )
    for r in reports:
        writer.writerow(
            [r.iteration, repr(r.freq_hz), repr(r.data_residual), repr(r.source_residual),
             repr(r.model_change), repr(r.psi), r.full_solves, r.target_solves, r.phase]
        )
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


@dataclass(frozen=True)
class ScheduleEntry:
    """One sweep specification: a frequency band repeated for some passes."""

    freqs_hz: tuple[float, ...]
    passes: int = 1
    iters_per_freq: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "freqs_hz", tuple(float(f) for f in self.freqs_hz))
        if not self.freqs_hz:
            raise ValueError("schedule entry needs at least one frequency")
        if self.passes < 1:
            raise ValueError("passes must be >= 1")


@dataclass(frozen=True)
class InversionConfig:
    """Settings shared by every inversion loop."""

    bounds: BoundConstraint
    pml_width: int = 20
    lambda_rel: float = 0.1
    lambda_fixed: float | None = None
    iters_per_freq: int = 5
    illumination_rel: float = 1e-10
    update_background_once: bool = False
    spectrum_f0: float = 10.0
    schedule: tuple[ScheduleEntry, ...] = ()

    def resolved_schedule(self, dataset: DataSet) -> tuple[ScheduleEntry, ...]:
        if self.schedule:
            return self.schedule
        return (ScheduleEntry(freqs_hz=dataset.frequencies, passes=1,
                              iters_per_freq=self.iters_per_freq),)


def acquisition_from(dataset: DataSet, config: InversionConfig) -> Acquisition:
    """Rebuild the acquisition geometry recorded in a data set."""
    return Acquisition(
        sources=dataset.source_positions,
        receivers=dataset.receiver_positions,
        spectrum=RickerSpectrum(config.spectrum_f0),
    )


def resolve_lambda(system: HelmholtzSystem, obs: ObservationOperator,
                   b: np.ndarray, d: np.ndarray, *, lambda_rel: float = 0.1,
                   lambda_fixed: float | None = None) -> float:
    """Penalty weight: lambda_rel * ||P^H D||_F / ||A^H B||_F, once per frequency."""
    if lambda_fixed is not None:
        return float(lambda_fixed)
    num = np.linalg.norm(obs.matrix.conj().T @ d)
    den = np.linalg.norm(system.matrix.conj().T @ b)
    if num == 0.0 or den == 0.0:
        return lambda_rel
    return lambda_rel * num / den


@dataclass(frozen=True)
class AugmentedLagrangian:
    """Scaled augmented-Lagrangian value as a function of all four blocks.

    Reassembles the operator from (m1, m2) on every call; intended for
    reports and stationarity checks, not inner loops.
    """

    partition: Partition
    obs: ObservationOperator
    b: np.ndarray
    d: np.ndarray
    omega: float
    pml_width: int

    def value(self, u1, u2, m1, m2, duals: DualState, lam: float,
              reg_background=None, reg_target=None) -> float:
        model = Model(self.partition.grid, self.partition.merge(m1, m2))
        system = assemble(model, self.omega, self.pml_width)
        blocks = split_columns(system, self.partition)
        wave = blocks.apply(u1, u2) - self.b - duals.b_hat
        data = self.obs.sample(blocks.merge(u1, u2)) - self.d - duals.d_hat
        value = np.linalg.norm(data) ** 2 + lam * np.linalg.norm(wave) ** 2
        if reg_background is not None:
            value += reg_background(m1)
        if reg_target is not None:
            value += reg_target(m2)
        return float(value)


def da_wavefield(system: HelmholtzSystem, obs: ObservationOperator, lam: float,
                 b: np.ndarray, d: np.ndarray, duals: DualState, *,
                 ledger: SolveLedger | None = None, freq_hz: float = 0.0,
                 phase: str = "da") -> np.ndarray:
    """Data-assimilated fields: jointly fit observations and the wave equation.

    Returns ``[lam A^H A + P^H P]^{-1} [lam A^H (B + Bhat) + P^H (D + Dhat)]``;
    with zero duals this is the one-time initialization solve.
    """
    return solve_augmented_normal(
        system.matrix, obs.matrix, lam, b + duals.b_hat, d + duals.d_hat,
        size_class="full", freq_hz=freq_hz, phase=phase, ledger=ledger,
    )


def _guarded_update(num: np.ndarray, den: np.ndarray, prev: np.ndarray,
                    threshold_rel: float) -> np.ndarray:
    """num/den where illumination suffices, previous values elsewhere."""
    out = np.array(prev, dtype=float, copy=True)
    den_max = den.max() if den.size else 0.0
    ok = (den >= threshold_rel * den_max) & (den > 0.0)
    out[ok] = num[ok] / den[ok]
    return out


def update_model_full(system: HelmholtzSystem, fields: np.ndarray, b: np.ndarray,
                      b_hat, bounds: BoundConstraint, prev_model: Model,
                      threshold_rel: float = 1e-10) -> Model:
    """Closed-form box-projected model update over all interior nodes.

    Per node j: ``m_j = clip(Re(sum_i conj(U_ij) r_ij) / (omega^2 sum_i |U_ij|^2))``
    with ``r = B + Bhat - Laplacian U`` restricted to interior rows; nodes whose
    illumination falls below the threshold keep their previous value.
    """
    padded = system.padded
    resid = b - system.laplacian @ fields
    if b_hat is not None and not np.isscalar(b_hat):
        resid = resid + b_hat
    imap = padded.interior_map
    u_i = fields[imap]
    r_i = resid[imap]
    num = np.sum(np.conj(u_i) * r_i, axis=1).real
    den = (system.omega**2) * np.sum(np.abs(u_i) ** 2, axis=1)
    values = _guarded_update(num, den, prev_model.values, threshold_rel)
    return prev_model.with_values(bounds.project(values))


def update_model_target(fields_target: np.ndarray, blocks: ColumnBlocks,
                        background_term: np.ndarray | None, b: np.ndarray, b_hat,
                        bounds: BoundConstraint, prev_m2: np.ndarray,
                        threshold_rel: float = 1e-10) -> np.ndarray:
    """Closed-form box-projected update of the target model values.

    Minimizes the stacked per-source residual ``omega^2 Diag(U2_i) m2 - y_i``
    with ``y_i = B_i + Bhat_i - (A1 U1)_i - Lap2 U2_i``; the normal matrix is
    diagonal because the target mass columns are distinct unit vectors.
    """
    y = b - blocks.lap2 @ fields_target
    if background_term is not None:
        y = y - background_term
    if b_hat is not None and not np.isscalar(b_hat):
        y = y + b_hat
    y_t = y[blocks.idx_target]
    num = np.sum(np.conj(fields_target) * y_t, axis=1).real
    den = (blocks.omega**2) * np.sum(np.abs(fields_target) ** 2, axis=1)
    values = _guarded_update(num, den, prev_m2, threshold_rel)
    return bounds.project(values)


def update_duals(duals: DualState, blocks: ColumnBlocks, obs: ObservationOperator,
                 u1: np.ndarray, u2: np.ndarray, b: np.ndarray, d: np.ndarray) -> DualState:
    """Dual ascent: accumulate the current source and data residuals."""
    wave_residual = b - blocks.apply(u1, u2)
    data_residual = d - obs.sample(blocks.merge(u1, u2))
    return duals.advanced(wave_residual, data_residual)


def update_duals_full(duals: DualState, system: HelmholtzSystem, model: Model,
                      fields: np.ndarray, b: np.ndarray, d: np.ndarray,
                      obs: ObservationOperator) -> DualState:
    """Full-domain dual ascent with the freshly updated model."""
    wave_residual = b - system.apply_with_model(model.values, fields)
    data_residual = d - obs.sample(fields)
    return duals.advanced(wave_residual, data_residual)


def _solve_counts(ledger: SolveLedger | None) -> tuple[int, int]:
    if ledger is None:
        return 0, 0
    return ledger.solves(size_class="full"), ledger.solves(size_class="target")


def _model_change(new: np.ndarray, old: np.ndarray) -> float:
    denom = np.linalg.norm(old)
    return float(np.linalg.norm(new - old) / denom) if denom else 0.0


def irwri_frequency_batch(model: Model, dataset: DataSet, freq_hz: float,
                          config: InversionConfig, *,
                          ledger: SolveLedger | None = None,
                          n_iter: int | None = None,
                          acq: Acquisition | None = None):
    """Full-domain alternating loop: DA fields, model update, dual ascent.

    Runs ``n_iter`` iterations at one frequency with duals starting at zero;
    each iteration costs one full-size solve per source.
    """
    freq_hz = float(freq_hz)
    n_iter = config.iters_per_freq if n_iter is None else n_iter
    omega = 2.0 * math.pi * freq_hz
    d = dataset.records[freq_hz]
    acq = acq or acquisition_from(dataset, config)
    system = assemble(model, omega, config.pml_width)
    obs = build_observation(acq, system.padded)
    b = acq.source_term(system.padded, freq_hz)
    lam = resolve_lambda(system, obs, b, d, lambda_rel=config.lambda_rel,
                         lambda_fixed=config.lambda_fixed)
    duals = DualState.zeros(system.n, obs.n_receivers, dataset.n_sources)

    reports = []
    for k in range(n_iter):
        if k > 0:
            system = system.with_model(model)
        fields = da_wavefield(system, obs, lam, b, d, duals,
                              ledger=ledger, freq_hz=freq_hz, phase="irwri")
        new_model = update_model_full(system, fields, b, duals.b_hat,
                                      config.bounds, model, config.illumination_rel)
        wave_lhs = system.apply_with_model(new_model.values, fields)
        data_sample = obs.sample(fields)
        psi = float(np.linalg.norm(data_sample - d - duals.d_hat) ** 2
                    + lam * np.linalg.norm(wave_lhs - b - duals.b_hat) ** 2)
        duals = duals.advanced(b - wave_lhs, d - data_sample)
        full, target = _solve_counts(ledger)
        reports.append(IterationReport(
            iteration=k + 1, freq_hz=freq_hz, phase="iterate",
            data_residual=float(np.linalg.norm(data_sample - d)),
            source_residual=float(np.linalg.norm(wave_lhs - b)),
            model_change=_model_change(new_model.values, model.values),
            psi=psi, full_solves=full, target_solves=target,
        ))
        model = new_model
    return model, reports


def multiblock_frequency_batch(model: Model, dataset: DataSet, freq_hz: float,
                               partition: Partition, config: InversionConfig, *,
                               ledger: SolveLedger | None = None,
                               n_iter: int | None = None,
                               acq: Acquisition | None = None):
    """Four-block alternating loop over (U1, U2, m1, m2) plus dual ascent.

    The joint fields are initialized by one DA solve (phase "setup"); after
    that every iteration solves one background-size and one target-size
    normal system per source set, never a full-size one. The two model-block
    updates share one per-node closed form because the mass term is diagonal,
    which makes them independent of each other given the new fields.
    """
    freq_hz = float(freq_hz)
    n_iter = config.iters_per_freq if n_iter is None else n_iter
    omega = 2.0 * math.pi * freq_hz
    d = dataset.records[freq_hz]
    acq = acq or acquisition_from(dataset, config)
    system = assemble(model, omega, config.pml_width)
    obs = build_observation(acq, system.padded, partition)
    b = acq.source_term(system.padded, freq_hz)
    lam = resolve_lambda(system, obs, b, d, lambda_rel=config.lambda_rel,
                         lambda_fixed=config.lambda_fixed)
    duals = DualState.zeros(system.n, obs.n_receivers, dataset.n_sources)

    fields0 = da_wavefield(system, obs, lam, b, d, duals,
                           ledger=ledger, freq_hz=freq_hz, phase="setup")
    blocks = split_columns(system, partition)
    u1 = blocks.restrict_background(fields0)
    u2 = blocks.restrict_target(fields0)
    receivers_in_target = obs.p2 is not None and obs.p2.nnz > 0

    reports = []
    for k in range(n_iter):
        if k > 0:
            system = system.with_model(model)
            blocks = split_columns(system, partition)
        u1 = solve_augmented_normal(
            blocks.a1, obs.p1, lam,
            b + duals.b_hat - blocks.a2 @ u2,
            d + duals.d_hat - obs.p2 @ u2,
            size_class="background", freq_hz=freq_hz, phase="u1_update", ledger=ledger,
        )
        rhs_wave = b + duals.b_hat - blocks.a1 @ u1
        if receivers_in_target:
            u2 = solve_augmented_normal(
                blocks.a2, obs.p2, lam, rhs_wave,
                d + duals.d_hat - obs.p1 @ u1,
                size_class="target", freq_hz=freq_hz, phase="u2_update", ledger=ledger,
            )
        else:
            u2 = solve_target_normal(blocks.a2, rhs_wave, freq_hz=freq_hz,
                                     phase="u2_update", ledger=ledger)
        fields = blocks.merge(u1, u2)
        new_model = update_model_full(system, fields, b, duals.b_hat,
                                      config.bounds, model, config.illumination_rel)
        wave_lhs = system.apply_with_model(new_model.values, fields)
        data_sample = obs.sample(fields)
        psi = float(np.linalg.norm(data_sample - d - duals.d_hat) ** 2
                    + lam * np.linalg.norm(wave_lhs - b - duals.b_hat) ** 2)
        duals = duals.advanced(b - wave_lhs, d - data_sample)
        full, target = _solve_counts(ledger)
        reports.append(IterationReport(
            iteration=k + 1, freq_hz=freq_hz, phase="iterate",
            data_residual=float(np.linalg.norm(data_sample - d)),
            source_residual=float(np.linalg.norm(wave_lhs - b)),
            model_change=_model_change(new_model.values, model.values),
            psi=psi, full_solves=full, target_solves=target,
        ))
        model = new_model
    return model, reports


def run_frequency_schedule(batch_fn, model: Model, dataset: DataSet,
                           config: InversionConfig, *,
                           ledger: SolveLedger | None = None):
    """Sweep the schedule low-to-high within each pass, carrying the model.

    ``batch_fn(model, dataset, freq_hz, config, ledger=..., n_iter=...)`` must
    return ``(model, reports)``.
    """
    all_reports = []
    for entry in config.resolved_schedule(dataset):
        n_iter = entry.iters_per_freq or config.iters_per_freq
        for _ in range(entry.passes):
            for freq in entry.freqs_hz:
                if freq not in dataset.records:
                    raise KeyError(f"dataset has no records at {freq} Hz")
                model, reports = batch_fn(model, dataset, freq, config,
                                          ledger=ledger, n_iter=n_iter)
                all_reports.extend(reports)
    return model, all_reports
