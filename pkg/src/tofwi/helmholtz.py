"""Discrete Helmholtz operator with absorbing layer, and its column blocks.

The operator is the 5-point Laplacian plus the mass term ``omega^2 * m`` on a
domain padded with a complex coordinate-stretch absorbing layer (quadratic
damping profile). The stretched equation is multiplied through by the product
of the two stretch factors so the assembled matrix is exactly symmetric
(A == A^T, not Hermitian); interior rows are unchanged by this scaling because
the stretch factors are 1 there.

Sign convention: time dependence exp(-i*omega*t), stretch s = 1 + i*sigma/omega,
so the radiating solution of ``A u = delta`` is the outgoing Hankel function
``-(i/4) * H0^(1)(k r)`` in a homogeneous medium.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError
from .grid import Grid, Model, Partition

__all__ = [
    "PaddedDomain",
    "HelmholtzSystem",
    "ColumnBlocks",
    "assemble",
    "split_columns",
    "apply_operator",
]

#: Target theoretical two-way reflection coefficient of the absorbing layer.
PML_REFLECTION = 1.0e-5


@dataclass(frozen=True)
class PaddedDomain:
    """Interior grid extended by ``pml_width`` nodes on all four sides."""

    grid: Grid
    pml_width: int

    def __post_init__(self):
        if self.pml_width < 0:
            raise ValueError("pml_width must be >= 0")

    @property
    def nx_pad(self) -> int:
        return self.grid.nx + 2 * self.pml_width

    @property
    def nz_pad(self) -> int:
        return self.grid.nz + 2 * self.pml_width

    @property
    def n_pad(self) -> int:
        return self.nx_pad * self.nz_pad

    @property
    def interior_map(self) -> np.ndarray:
        """Padded flat index of each interior node (length grid.n)."""
        p = self.pml_width
        iz = np.arange(self.grid.nz) + p
        ix = np.arange(self.grid.nx) + p
        return (iz[:, None] * self.nx_pad + ix[None, :]).ravel()

    def embed_model(self, values: np.ndarray) -> np.ndarray:
        """Extend interior model values into the pad by edge replication."""
        raster = np.asarray(values).reshape(self.grid.nz, self.grid.nx)
        return np.pad(raster, self.pml_width, mode="edge").ravel()

    def restrict_interior(self, x: np.ndarray) -> np.ndarray:
        """Take the interior rows of a padded-domain array."""
        return np.asarray(x)[self.interior_map]

    def lift_indices(self, interior_indices: np.ndarray) -> np.ndarray:
        return self.interior_map[np.asarray(interior_indices)]


def _stretch_arrays(n_pad, pml_width, omega, sigma0):
    """Node- and edge-centered stretch factors along one axis.

    Returns (s_node, s_edge) with ``s_edge[i]`` the factor at position
    ``i - 1/2`` (edges at -1/2 .. n_pad - 1/2, so n_pad + 1 of them).
    """
    if pml_width == 0:
        return np.ones(n_pad, dtype=complex), np.ones(n_pad + 1, dtype=complex)

    def profile(u):
        depth = np.maximum(0.0, pml_width - u)
        depth = np.maximum(depth, u - (n_pad - 1 - pml_width))
        sigma = sigma0 * (depth / pml_width) ** 2
        return 1.0 + 1j * sigma / omega

    s_node = profile(np.arange(n_pad, dtype=float))
    s_edge = profile(np.arange(n_pad + 1, dtype=float) - 0.5)
    return s_node, s_edge


@dataclass(frozen=True)
class HelmholtzSystem:
    """Assembled sparse operator and its model-independent split.

    ``matrix = laplacian + diag(mass_scale * model_padded)`` where
    ``mass_scale`` holds ``omega^2`` times the local stretch product (exactly
    ``omega^2`` at interior nodes).
    """

    omega: float
    padded: PaddedDomain
    matrix: sp.csc_matrix
    laplacian: sp.csc_matrix
    mass_scale: np.ndarray
    model_padded: np.ndarray

    @property
    def n(self) -> int:
        return self.padded.n_pad

    def apply(self, fields: np.ndarray) -> np.ndarray:
        """A @ U for one or more field columns."""
        return self.matrix @ fields

    def apply_with_model(self, model_values: np.ndarray, fields: np.ndarray) -> np.ndarray:
        """A(m') @ U for updated interior model values, without reassembly."""
        m_pad = self.padded.embed_model(model_values)
        mass = (self.mass_scale * m_pad)
        if fields.ndim == 1:
            return self.laplacian @ fields + mass * fields
        return self.laplacian @ fields + mass[:, None] * fields

    def with_model(self, model: Model) -> "HelmholtzSystem":
        """Rebuild only the mass term for a new model.

        Keeps the Laplacian (including the absorbing profile) fixed, so the
        operator stays exactly affine in the model across iterations of one
        frequency batch.
        """
        if not np.all(np.isfinite(model.values)):
            raise AssemblyError("model contains non-finite values")
        m_pad = self.padded.embed_model(model.values)
        matrix = (self.laplacian + sp.diags(self.mass_scale * m_pad)).tocsc()
        return HelmholtzSystem(
            omega=self.omega, padded=self.padded, matrix=matrix,
            laplacian=self.laplacian, mass_scale=self.mass_scale,
            model_padded=m_pad,
        )


def assemble(model: Model, omega: float, pml_width: int) -> HelmholtzSystem:
    """Assemble ``Delta + omega^2 Diag(m)`` with a stretched absorbing pad.

    Deterministic: identical inputs produce bitwise-identical matrices.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    if not np.all(np.isfinite(model.values)):
        raise AssemblyError("model contains non-finite values")
    padded = PaddedDomain(model.grid, pml_width)
    grid = model.grid
    nx, nz = padded.nx_pad, padded.nz_pad
    n = padded.n_pad
    m_pad = padded.embed_model(model.values)

    c_ref = float(np.max(model.velocity))
    if pml_width > 0:
        layer = pml_width * min(grid.dx, grid.dz)
        sigma0 = 1.5 * c_ref * np.log(1.0 / PML_REFLECTION) / layer
    else:
        sigma0 = 0.0

    sx, sx_edge = _stretch_arrays(nx, pml_width, omega, sigma0)
    sz, sz_edge = _stretch_arrays(nz, pml_width, omega, sigma0)

    # Edge couplings of the symmetrized operator s_x*s_z*Delta_stretched:
    # between (ix, iz) and (ix+1, iz) the coefficient is s_z[iz]/s_x(ix+1/2)/dx^2.
    inv_dx2 = 1.0 / grid.dx**2
    inv_dz2 = 1.0 / grid.dz**2
    cx_r = (sz[:, None] / sx_edge[None, 1:]) * inv_dx2  # (nz, nx)
    cx_l = (sz[:, None] / sx_edge[None, :-1]) * inv_dx2
    cz_d = (sx[None, :] / sz_edge[1:, None]) * inv_dz2
    cz_u = (sx[None, :] / sz_edge[:-1, None]) * inv_dz2

    diag = -(cx_r + cx_l + cz_d + cz_u)

    east = cx_r.copy()
    east[:, -1] = 0.0
    west_of_next = east  # symmetry: coupling is shared by both incident rows
    south = cz_d.copy()
    south[-1, :] = 0.0

    lap = sp.diags(
        [
            diag.ravel(),
            east.ravel()[:-1],
            west_of_next.ravel()[:-1],
            south.ravel()[:-nx],
            south.ravel()[:-nx],
        ],
        [0, 1, -1, nx, -nx],
        shape=(n, n),
        format="csc",
        dtype=complex,
    )
    mass_scale = (omega**2) * (sz[:, None] * sx[None, :]).ravel()
    matrix = (lap + sp.diags(mass_scale * m_pad, format="csc")).tocsc()
    return HelmholtzSystem(
        omega=omega,
        padded=padded,
        matrix=matrix,
        laplacian=lap,
        mass_scale=mass_scale,
        model_padded=m_pad,
    )


@dataclass(frozen=True)
class ColumnBlocks:
    """Column split of a Helmholtz matrix by a lifted partition.

    All pad nodes belong to the background block. ``a2(m2) = lap2 + omega^2 *
    e2 @ Diag(m2)`` holds exactly because target nodes are interior, where the
    stretch product is 1.
    """

    partition: Partition
    padded: PaddedDomain
    omega: float
    idx_background: np.ndarray  # padded indices, size N1
    idx_target: np.ndarray  # padded indices, size N2
    a1: sp.csc_matrix  # N x N1
    a2: sp.csc_matrix  # N x N2
    lap2: sp.csc_matrix  # N x N2, model-independent part of a2
    e2: sp.csc_matrix  # N x N2 unit columns
    target_model: np.ndarray  # current m2 (squared slowness at target nodes)

    @property
    def n_background(self) -> int:
        return self.idx_background.size

    @property
    def n_target(self) -> int:
        return self.idx_target.size

    def restrict_background(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.idx_background]

    def restrict_target(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.idx_target]

    def merge(self, background: np.ndarray, target: np.ndarray) -> np.ndarray:
        background = np.asarray(background)
        target = np.asarray(target)
        dtype = np.result_type(background.dtype if background.size else complex,
                               target.dtype)
        out = np.zeros((self.padded.n_pad,) + target.shape[1:], dtype=dtype)
        if background.size:
            out[self.idx_background] = background
        out[self.idx_target] = target
        return out

    def apply(self, fields_background: np.ndarray, fields_target: np.ndarray) -> np.ndarray:
        """A1 @ U1 + A2 @ U2."""
        out = self.a2 @ fields_target
        if self.n_background:
            out = out + self.a1 @ fields_background
        return out

    def with_target_model(self, m2: np.ndarray) -> "ColumnBlocks":
        """Rebuild only the target mass term for new target model values."""
        m2 = np.asarray(m2, dtype=float)
        if m2.shape != (self.n_target,):
            raise ValueError(f"m2 has shape {m2.shape}, expected ({self.n_target},)")
        a2 = (self.lap2 + self.e2 @ sp.diags(self.omega**2 * m2)).tocsc()
        return ColumnBlocks(
            partition=self.partition,
            padded=self.padded,
            omega=self.omega,
            idx_background=self.idx_background,
            idx_target=self.idx_target,
            a1=self.a1,
            a2=a2,
            lap2=self.lap2,
            e2=self.e2,
            target_model=m2,
        )


def split_columns(system: HelmholtzSystem, partition: Partition) -> ColumnBlocks:
    """Split the assembled matrix into background and target column blocks."""
    if partition.grid is not system.padded.grid and partition.grid != system.padded.grid:
        raise ValueError("partition grid does not match system grid")
    padded = system.padded
    idx_target = padded.lift_indices(partition.target_indices)
    mask = np.ones(padded.n_pad, dtype=bool)
    mask[idx_target] = False
    idx_background = np.nonzero(mask)[0]

    if not np.all(system.mass_scale[idx_target] == system.omega**2):
        raise AssemblyError("target nodes must lie outside the absorbing layer")

    a1 = system.matrix[:, idx_background]
    a2 = system.matrix[:, idx_target]
    lap2 = system.laplacian[:, idx_target]
    n2 = idx_target.size
    e2 = sp.csc_matrix(
        (np.ones(n2), (idx_target, np.arange(n2))), shape=(padded.n_pad, n2)
    )
    return ColumnBlocks(
        partition=partition,
        padded=padded,
        omega=system.omega,
        idx_background=idx_background,
        idx_target=idx_target,
        a1=a1.tocsc(),
        a2=a2.tocsc(),
        lap2=lap2.tocsc(),
        e2=e2,
        target_model=system.model_padded[idx_target].copy(),
    )


def apply_operator(operator, fields, fields_target=None) -> np.ndarray:
    """Apply a full system (A @ U) or column blocks (A1 @ U1 + A2 @ U2)."""
    if isinstance(operator, HelmholtzSystem):
        if fields_target is not None:
            raise ValueError("full system takes a single field set")
        return operator.apply(fields)
    if isinstance(operator, ColumnBlocks):
        if fields_target is None:
            raise ValueError("column blocks take background and target field sets")
        return operator.apply(fields, fields_target)
    raise TypeError(f"unsupported operator type {type(operator)!r}")
