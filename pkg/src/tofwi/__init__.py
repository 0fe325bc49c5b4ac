"""Frequency-domain acoustic FWI with target-localized model updates."""

from .acquisition import (
    Acquisition,
    DataSet,
    FlatSpectrum,
    ObservationOperator,
    RickerSpectrum,
    build_observation,
    ricker_spectrum,
    synthesize_data,
)
from .errors import (
    AssemblyError,
    ConfigError,
    DegeneratePartitionError,
    FactorizationError,
    FormatError,
    GeometryError,
    TofwiError,
)
from .estimators import IRWRI, LocalizedInversion, MultiBlockInversion
from .grid import BoundConstraint, Grid, Model, Partition, Rectangle, build_partition
from .helmholtz import (
    ColumnBlocks,
    HelmholtzSystem,
    PaddedDomain,
    apply_operator,
    assemble,
    split_columns,
)
from .inversion import (
    AugmentedLagrangian,
    DualState,
    InversionConfig,
    IterationReport,
    ScheduleEntry,
    da_wavefield,
    irwri_frequency_batch,
    multiblock_frequency_batch,
    reports_to_csv,
    run_frequency_schedule,
    update_duals,
    update_duals_full,
    update_model_full,
    update_model_target,
)
from .linsolve import (
    Factorization,
    SolveLedger,
    factorize,
    solve_augmented_normal,
    solve_target_normal,
)
from .localized import (
    FrozenBackground,
    extract_target_wavefield_comparison,
    init_frequency,
    lwi_frequency_batch,
    lwi_iteration,
    lwi_multi_frequency,
    redatumed_rhs,
)

__version__ = "0.1.0"
