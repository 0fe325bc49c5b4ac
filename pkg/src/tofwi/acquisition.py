"""Sources, receivers, observation operators, and synthetic data generation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import GeometryError
from .grid import Grid, Model, Partition
from .helmholtz import PaddedDomain, assemble
from .linsolve import SolveLedger, factorize

__all__ = [
    "ricker_spectrum",
    "RickerSpectrum",
    "FlatSpectrum",
    "Acquisition",
    "ObservationOperator",
    "DataSet",
    "build_observation",
    "synthesize_data",
]


def ricker_spectrum(f: float, f0: float) -> float:
    """Amplitude spectrum of a zero-phase Ricker wavelet with peak at f0 (Hz)."""
    if f <= 0 or f0 <= 0:
        raise ValueError("frequencies must be positive")
    return (2.0 / math.sqrt(math.pi)) * (f**2 / f0**3) * math.exp(-((f / f0) ** 2))


@dataclass(frozen=True)
class RickerSpectrum:
    f0: float = 10.0

    def __call__(self, f: float) -> float:
        return ricker_spectrum(f, self.f0)


@dataclass(frozen=True)
class FlatSpectrum:
    amplitude: float = 1.0

    def __call__(self, f: float) -> float:
        return self.amplitude


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise ValueError(f"positions must be an (n, 2) array, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class Acquisition:
    """Source and receiver positions (meters) plus the source spectrum rule."""

    sources: np.ndarray
    receivers: np.ndarray
    spectrum: object = field(default_factory=RickerSpectrum)

    def __post_init__(self):
        object.__setattr__(self, "sources", _as_points(self.sources))
        object.__setattr__(self, "receivers", _as_points(self.receivers))

    @property
    def n_sources(self) -> int:
        return self.sources.shape[0]

    @property
    def n_receivers(self) -> int:
        return self.receivers.shape[0]

    def validate_inside(self, grid: Grid):
        for name, pts in (("source", self.sources), ("receiver", self.receivers)):
            for x, z in pts:
                if not grid.contains(x, z):
                    raise GeometryError(
                        f"{name} at ({x}, {z}) is not strictly inside the interior grid"
                    )

    def source_term(self, padded: PaddedDomain, freq_hz: float) -> np.ndarray:
        """Discrete delta source columns on the padded grid, spectrum-scaled.

        Each source injects ``W(f) / (dx*dz)`` at its nearest interior node.
        """
        grid = padded.grid
        self.validate_inside(grid)
        amp = complex(self.spectrum(freq_hz)) / (grid.dx * grid.dz)
        b = np.zeros((padded.n_pad, self.n_sources), dtype=complex)
        for i, (x, z) in enumerate(self.sources):
            idx = _nearest_node(grid, x, z)
            b[padded.interior_map[idx], i] = amp
        return b


def _nearest_node(grid: Grid, x: float, z: float) -> int:
    """Flat interior index of the node nearest (x, z); ties go to the lower index."""
    ux = (x - grid.origin[0]) / grid.dx
    uz = (z - grid.origin[1]) / grid.dz
    ix = int(np.ceil(ux - 0.5))
    iz = int(np.ceil(uz - 0.5))
    ix = min(max(ix, 0), grid.nx - 1)
    iz = min(max(iz, 0), grid.nz - 1)
    return iz * grid.nx + ix


@dataclass(frozen=True)
class ObservationOperator:
    """0/1 receiver selection matrix on the padded domain, with block views."""

    matrix: sp.csr_matrix  # n_r x N
    p1: sp.csr_matrix | None = None  # receivers at background columns
    p2: sp.csr_matrix | None = None  # receivers at target columns

    @property
    def n_receivers(self) -> int:
        return self.matrix.shape[0]

    def sample(self, fields: np.ndarray) -> np.ndarray:
        return self.matrix @ fields


def build_observation(
    acq: Acquisition, padded: PaddedDomain, partition: Partition | None = None
) -> ObservationOperator:
    """Nearest-node selection matrix for the receivers, on padded indices."""
    grid = padded.grid
    rows = np.arange(acq.n_receivers)
    cols = np.empty(acq.n_receivers, dtype=np.int64)
    for i, (x, z) in enumerate(acq.receivers):
        if not grid.contains(x, z):
            raise GeometryError(f"receiver at ({x}, {z}) outside the interior region")
        cols[i] = padded.interior_map[_nearest_node(grid, x, z)]
    p = sp.csr_matrix(
        (np.ones(acq.n_receivers), (rows, cols)),
        shape=(acq.n_receivers, padded.n_pad),
    )
    p1 = p2 = None
    if partition is not None:
        idx_target = padded.lift_indices(partition.target_indices)
        mask = np.ones(padded.n_pad, dtype=bool)
        mask[idx_target] = False
        idx_background = np.nonzero(mask)[0]
        p1 = sp.csr_matrix(p[:, idx_background])
        p2 = sp.csr_matrix(p[:, idx_target])
    return ObservationOperator(matrix=p, p1=p1, p2=p2)


@dataclass(frozen=True)
class DataSet:
    """Per-frequency complex records for all source-receiver pairs."""

    frequencies: tuple[float, ...]
    records: dict[float, np.ndarray]  # freq -> (n_r, n_s)
    source_positions: np.ndarray
    receiver_positions: np.ndarray

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.frequencies)
        if any(not np.isfinite(f) for f in freqs):
            raise ValueError("frequencies must be finite")
        if list(freqs) != sorted(set(freqs)):
            raise ValueError("frequency list must be strictly increasing")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "source_positions", _as_points(self.source_positions))
        object.__setattr__(self, "receiver_positions", _as_points(self.receiver_positions))
        n_s = self.source_positions.shape[0]
        n_r = self.receiver_positions.shape[0]
        for f in freqs:
            rec = np.asarray(self.records[f], dtype=complex)
            if rec.shape != (n_r, n_s):
                raise ValueError(
                    f"records at {f} Hz have shape {rec.shape}, expected {(n_r, n_s)}"
                )
            if not np.all(np.isfinite(rec)):
                raise ValueError(f"records at {f} Hz contain non-finite entries")
            self.records[f] = rec

    @property
    def n_sources(self) -> int:
        return self.source_positions.shape[0]

    @property
    def n_receivers(self) -> int:
        return self.receiver_positions.shape[0]


def synthesize_data(
    model_true: Model,
    acq: Acquisition,
    freqs,
    pml_width: int,
    *,
    noise_snr_db: float | None = None,
    seed: int = 0,
    ledger: SolveLedger | None = None,
    threads: int = 1,
) -> DataSet:
    """Forward-model observed records for every frequency and source.

    Per frequency: assemble, factorize once, solve all source columns, and
    sample at the receivers. Optional additive complex Gaussian noise at the
    requested SNR (off by default). Results are independent of thread count.
    """
    acq.validate_inside(model_true.grid)
    freqs = [float(f) for f in freqs]

    def one_frequency(f):
        system = assemble(model_true, 2.0 * math.pi * f, pml_width)
        fact = factorize(
            system.matrix, size_class="full", freq_hz=f, phase="forward", ledger=ledger
        )
        b = acq.source_term(system.padded, f)
        fields = fact.solve(b, phase="forward")
        obs = build_observation(acq, system.padded)
        return obs.sample(fields)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_frequency, freqs))
        records = dict(zip(freqs, results))
    else:
        records = {f: one_frequency(f) for f in freqs}

    if noise_snr_db is not None:
        rng = np.random.default_rng(seed)
        for f in freqs:
            clean = records[f]
            power = np.mean(np.abs(clean) ** 2)
            scale = math.sqrt(power * 10.0 ** (-noise_snr_db / 10.0) / 2.0)
            noise = scale * (
                rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape)
            )
            records[f] = clean + noise

    return DataSet(
        frequencies=tuple(freqs),
        records=records,
        source_positions=acq.sources.copy(),
        receiver_positions=acq.receivers.copy(),
    )
