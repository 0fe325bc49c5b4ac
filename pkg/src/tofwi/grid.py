"""Regular-grid geometry, physical models, partitions, and bound projection.

Node ordering is global across the package: z-outer (depth), x-inner, so the
flat index of node (ix, iz) is ``iz * nx + ix``. Every vector and matrix in
the package indexes grid nodes this way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePartitionError, GeometryError

__all__ = [
    "Grid",
    "Model",
    "Rectangle",
    "Partition",
    "BoundConstraint",
    "build_partition",
]


@dataclass(frozen=True)
class Grid:
    """Regular 2D grid: ``nx`` nodes along x, ``nz`` along z, spacing in meters."""

    nx: int
    nz: int
    dx: float
    dz: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 3 or self.nz < 3:
            raise ValueError(f"grid must be at least 3x3, got {self.nx}x{self.nz}")
        if self.dx <= 0 or self.dz <= 0:
            raise ValueError("grid spacing must be positive")

    @property
    def n(self) -> int:
        return self.nx * self.nz

    @property
    def x_coords(self) -> np.ndarray:
        return self.origin[0] + self.dx * np.arange(self.nx)

    @property
    def z_coords(self) -> np.ndarray:
        return self.origin[1] + self.dz * np.arange(self.nz)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(x_min, x_max, z_min, z_max) of the node hull."""
        x0, z0 = self.origin
        return (x0, x0 + (self.nx - 1) * self.dx, z0, z0 + (self.nz - 1) * self.dz)

    def node_index(self, ix, iz):
        return np.asarray(iz) * self.nx + np.asarray(ix)

    def contains(self, x: float, z: float) -> bool:
        """True when (x, z) lies strictly inside the node hull."""
        x_min, x_max, z_min, z_max = self.extent
        return x_min < x < x_max and z_min < z < z_max


def _read_only(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Model:
    """Squared slowness (s^2/m^2) on a grid, with velocity-domain views."""

    grid: Grid
    values: np.ndarray  # length grid.n, squared slowness

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ValueError(
                f"model length {values.shape} does not match grid n={self.grid.n}"
            )
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ValueError("squared slowness must be finite and strictly positive")
        object.__setattr__(self, "values", _read_only(values))

    @classmethod
    def from_velocity(cls, grid: Grid, velocity) -> "Model":
        velocity = np.asarray(velocity, dtype=float)
        if velocity.shape == (grid.nz, grid.nx):
            velocity = velocity.ravel()
        return cls(grid, 1.0 / velocity**2)

    @property
    def velocity(self) -> np.ndarray:
        """Velocity view in m/s."""
        return 1.0 / np.sqrt(self.values)

    def as_raster(self) -> np.ndarray:
        """(nz, nx) view of squared slowness."""
        return self.values.reshape(self.grid.nz, self.grid.nx)

    def with_values(self, values) -> "Model":
        return Model(self.grid, values)


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle in physical coordinates (meters)."""

    x_min: float
    x_max: float
    z_min: float
    z_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.z_min < self.z_max):
            raise ValueError(f"degenerate rectangle {self}")


@dataclass(frozen=True)
class Partition:
    """Disjoint split of grid nodes into a target set and its background complement."""

    grid: Grid
    target_indices: np.ndarray
    background_indices: np.ndarray = field(default=None)

    def __post_init__(self):
        target = np.unique(np.asarray(self.target_indices, dtype=np.int64))
        if target.size == 0:
            raise DegeneratePartitionError("target region captured no grid nodes")
        if target[0] < 0 or target[-1] >= self.grid.n:
            raise ValueError("target indices outside grid")
        background = np.setdiff1d(np.arange(self.grid.n, dtype=np.int64), target)
        object.__setattr__(self, "target_indices", _read_only(target))
        object.__setattr__(self, "background_indices", _read_only(background))

    @property
    def n_target(self) -> int:
        return self.target_indices.size

    @property
    def n_background(self) -> int:
        return self.background_indices.size

    def restrict_target(self, x: np.ndarray) -> np.ndarray:
        return _take_rows(x, self.target_indices, self.grid.n)

    def restrict_background(self, x: np.ndarray) -> np.ndarray:
        return _take_rows(x, self.background_indices, self.grid.n)

    def merge(self, background: np.ndarray, target: np.ndarray) -> np.ndarray:
        """Inverse of the two restrictions: scatter both parts back to length n."""
        background = np.asarray(background)
        target = np.asarray(target)
        if background.shape[0] != self.n_background:
            raise ValueError(
                f"background part has {background.shape[0]} rows, expected {self.n_background}"
            )
        if target.shape[0] != self.n_target:
            raise ValueError(
                f"target part has {target.shape[0]} rows, expected {self.n_target}"
            )
        dtype = np.result_type(background.dtype, target.dtype)
        out = np.empty((self.grid.n,) + background.shape[1:], dtype=dtype)
        out[self.background_indices] = background
        out[self.target_indices] = target
        return out


def _take_rows(x: np.ndarray, idx: np.ndarray, n: int) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[0] != n:
        raise ValueError(f"array has {x.shape[0]} rows, expected {n}")
    return x[idx]


def build_partition(grid: Grid, rectangles) -> Partition:
    """Partition grid nodes by membership in the union of rectangles.

    A node belongs to the target set when its center lies in a half-open
    rectangle [x_min, x_max) x [z_min, z_max). Rectangles must lie inside the
    grid's cell hull ``[x0, x0 + nx*dx) x [z0, z0 + nz*dz)``; they may overlap
    or be disjoint.
    """
    rectangles = [r if isinstance(r, Rectangle) else Rectangle(*r) for r in rectangles]
    if not rectangles:
        raise ValueError("at least one rectangle required")
    x0, z0 = grid.origin
    x_hull = x0 + grid.nx * grid.dx
    z_hull = z0 + grid.nz * grid.dz
    for r in rectangles:
        if r.x_min < x0 or r.x_max > x_hull or r.z_min < z0 or r.z_max > z_hull:
            raise GeometryError(f"rectangle {r} outside grid hull")
    xs = grid.x_coords
    zs = grid.z_coords
    mask = np.zeros((grid.nz, grid.nx), dtype=bool)
    for r in rectangles:
        in_x = (xs >= r.x_min) & (xs < r.x_max)
        in_z = (zs >= r.z_min) & (zs < r.z_max)
        mask |= in_z[:, None] & in_x[None, :]
    target = np.nonzero(mask.ravel())[0]
    if target.size == 0:
        raise DegeneratePartitionError("no node center falls inside the rectangles")
    return Partition(grid, target)


@dataclass(frozen=True)
class BoundConstraint:
    """Velocity box bounds, applied as a squared-slowness clip."""

    v_min: float
    v_max: float

    def __post_init__(self):
        if not (0 < self.v_min < self.v_max):
            raise ValueError(f"require 0 < v_min < v_max, got {self.v_min}, {self.v_max}")

    @property
    def slowness_sq_min(self) -> float:
        return 1.0 / self.v_max**2

    @property
    def slowness_sq_max(self) -> float:
        return 1.0 / self.v_min**2

    def project(self, values: np.ndarray) -> np.ndarray:
        """Elementwise clip of squared slowness into the box; idempotent."""
        return np.clip(values, self.slowness_sq_min, self.slowness_sq_max)
