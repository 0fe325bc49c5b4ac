import numpy as np
import pytest

from tofwi.acquisition import Acquisition, RickerSpectrum, synthesize_data
from tofwi.grid import BoundConstraint, Grid, Model, build_partition
from tofwi.inversion import InversionConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class TinyProblem:
    """Consistent small setup: two-layer model, a target box, ring-ish coverage."""

    def __init__(self, nx=20, nz=14, spacing=50.0, pml=6, freq=4.0,
                 n_sources=2, n_receivers=6):
        self.grid = Grid(nx, nz, spacing, spacing)
        v = np.full((nz, nx), 2000.0)
        v[nz // 2:, :] = 2300.0
        self.model_true = Model.from_velocity(self.grid, v)
        x_max = (nx - 1) * spacing
        z_max = (nz - 1) * spacing
        src_x = np.linspace(0.15 * x_max, 0.85 * x_max, n_sources)
        rec_x = np.linspace(0.1 * x_max, 0.9 * x_max, n_receivers)
        sources = np.column_stack([src_x, np.full(n_sources, 0.12 * z_max)])
        receivers = np.column_stack([rec_x, np.full(n_receivers, 0.85 * z_max)])
        self.acq = Acquisition(sources, receivers, RickerSpectrum(10.0))
        self.freq = freq
        self.pml = pml
        self.partition = build_partition(
            self.grid,
            [(0.3 * x_max, 0.7 * x_max, 0.35 * z_max, 0.7 * z_max)],
        )
        self.data = synthesize_data(self.model_true, self.acq, [freq], pml)
        self.config = InversionConfig(
            bounds=BoundConstraint(1500.0, 3000.0), pml_width=pml,
            iters_per_freq=5,
        )


@pytest.fixture(scope="session")
def tiny():
    return TinyProblem()
