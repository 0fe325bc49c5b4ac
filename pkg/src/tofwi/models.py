"""Synthetic velocity model builders for experiments and the CLI."""

from __future__ import annotations

import numpy as np

from .grid import Grid, Model, Rectangle

__all__ = [
    "homogeneous_model",
    "inclusion_model",
    "layered_model",
    "add_box_perturbations",
    "smooth_model",
]


def homogeneous_model(grid: Grid, velocity: float) -> Model:
    return Model.from_velocity(grid, np.full(grid.n, float(velocity)))


def inclusion_model(grid: Grid, velocity: float, inclusion_velocity: float,
                    center: tuple[float, float], radius: float) -> Model:
    """Homogeneous background with one circular velocity inclusion."""
    v = np.full((grid.nz, grid.nx), float(velocity))
    xx = grid.x_coords[None, :]
    zz = grid.z_coords[:, None]
    inside = (xx - center[0]) ** 2 + (zz - center[1]) ** 2 <= radius**2
    v[inside] = float(inclusion_velocity)
    return Model.from_velocity(grid, v)


def layered_model(grid: Grid, interfaces, velocities) -> Model:
    """Flat layers: ``velocities[i]`` above ``interfaces[i]``, last below all."""
    interfaces = list(interfaces)
    velocities = list(velocities)
    if len(velocities) != len(interfaces) + 1:
        raise ValueError("need exactly one more velocity than interfaces")
    if sorted(interfaces) != interfaces:
        raise ValueError("interfaces must be increasing depths")
    v = np.full((grid.nz, grid.nx), float(velocities[-1]))
    zz = grid.z_coords
    upper = np.full(grid.nz, True)
    for depth, vel in zip(interfaces, velocities[:-1]):
        layer = upper & (zz < depth)
        v[layer, :] = float(vel)
        upper &= zz >= depth
    return Model.from_velocity(grid, v)


def add_box_perturbations(model: Model, boxes) -> Model:
    """Add velocity offsets inside axis-aligned boxes: [(Rectangle, delta_v), ...]."""
    grid = model.grid
    v = model.velocity.reshape(grid.nz, grid.nx).copy()
    xs = grid.x_coords
    zs = grid.z_coords
    for rect, delta_v in boxes:
        rect = rect if isinstance(rect, Rectangle) else Rectangle(*rect)
        in_x = (xs >= rect.x_min) & (xs < rect.x_max)
        in_z = (zs >= rect.z_min) & (zs < rect.z_max)
        v[np.ix_(in_z, in_x)] += float(delta_v)
    return Model.from_velocity(grid, v)


def smooth_model(model: Model, sigma_m: float) -> Model:
    """Gaussian-smoothed velocity; the standard deviation is in meters."""
    from scipy.ndimage import gaussian_filter

    grid = model.grid
    v = model.velocity.reshape(grid.nz, grid.nx)
    smoothed = gaussian_filter(v, sigma=(sigma_m / grid.dz, sigma_m / grid.dx),
                               mode="nearest")
    return Model.from_velocity(grid, smoothed)
