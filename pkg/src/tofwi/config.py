"""Experiment configuration: JSON schema, defaults, and object resolution.

Configs are strict JSON documents: unknown keys are rejected anywhere in the
tree. Every run writes its fully resolved configuration (defaults filled in)
next to its outputs so results are reproducible from the artifact alone.
"""

from __future__ import annotations

import copy
import json

import numpy as np

from .acquisition import Acquisition, RickerSpectrum
from .errors import ConfigError
from .grid import BoundConstraint, Grid, Model, Rectangle
from .inversion import InversionConfig, ScheduleEntry
from . import models as _models

__all__ = [
    "CONFIG_SCHEMA",
    "validate_config",
    "merge_config",
    "default_forward_config",
    "default_invert_config",
    "default_inclusion_config",
    "default_timelapse_config",
    "grid_from_config",
    "acquisition_from_config",
    "bounds_from_config",
    "rectangles_from_config",
    "schedule_from_config",
    "inversion_config_from",
    "resolve_positions",
    "resolve_model",
    "write_resolved_config",
]

_POSITION = {"type": "array", "minItems": 2, "maxItems": 2,
             "items": {"type": "number"}}

_POSITIONS_SPEC = {
    "oneOf": [
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "points"],
            "properties": {
                "kind": {"const": "explicit"},
                "points": {"type": "array", "minItems": 1, "items": _POSITION},
            },
        },
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "center", "radius", "count"],
            "properties": {
                "kind": {"const": "ring"},
                "center": _POSITION,
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "count": {"type": "integer", "minimum": 1},
            },
        },
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "start", "stop", "count"],
            "properties": {
                "kind": {"const": "line"},
                "start": _POSITION,
                "stop": _POSITION,
                "count": {"type": "integer", "minimum": 1},
            },
        },
    ]
}

_RECTANGLE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["x_min", "x_max", "z_min", "z_max"],
    "properties": {
        "x_min": {"type": "number"}, "x_max": {"type": "number"},
        "z_min": {"type": "number"}, "z_max": {"type": "number"},
    },
}

_SCHEDULE = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "object",
        "additionalProperties": False,
        "required": ["freqs_hz"],
        "properties": {
            "freqs_hz": {"type": "array", "minItems": 1,
                         "items": {"type": "number", "exclusiveMinimum": 0}},
            "passes": {"type": "integer", "minimum": 1},
            "iters_per_freq": {"type": "integer", "minimum": 1},
        },
    },
}

_MODEL_SPEC = {
    "oneOf": [
        {
            "type": "object", "additionalProperties": False,
            "required": ["kind", "velocity"],
            "properties": {"kind": {"const": "homogeneous"},
                           "velocity": {"type": "number", "exclusiveMinimum": 0}},
        },
        {
            "type": "object", "additionalProperties": False,
            "required": ["kind", "path"],
            "properties": {"kind": {"const": "file"}, "path": {"type": "string"}},
        },
        {
            "type": "object", "additionalProperties": False,
            "required": ["kind", "velocity", "inclusion_velocity", "center", "radius"],
            "properties": {
                "kind": {"const": "inclusion"},
                "velocity": {"type": "number", "exclusiveMinimum": 0},
                "inclusion_velocity": {"type": "number", "exclusiveMinimum": 0},
                "center": _POSITION,
                "radius": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        {
            "type": "object", "additionalProperties": False,
            "required": ["kind", "interfaces", "velocities"],
            "properties": {
                "kind": {"const": "layered"},
                "interfaces": {"type": "array", "items": {"type": "number"}},
                "velocities": {"type": "array", "minItems": 1,
                               "items": {"type": "number", "exclusiveMinimum": 0}},
            },
        },
        {
            "type": "object", "additionalProperties": False,
            "required": ["kind", "base", "boxes"],
            "properties": {
                "kind": {"const": "perturbed"},
                "base": {"$ref": "#/$defs/model_spec"},
                "boxes": {
                    "type": "array", "minItems": 1,
                    "items": {
                        "type": "object", "additionalProperties": False,
                        "required": ["rectangle", "delta_v"],
                        "properties": {"rectangle": _RECTANGLE,
                                       "delta_v": {"type": "number"}},
                    },
                },
            },
        },
        {
            "type": "object", "additionalProperties": False,
            "required": ["kind", "base", "sigma_m"],
            "properties": {
                "kind": {"const": "smoothed"},
                "base": {"$ref": "#/$defs/model_spec"},
                "sigma_m": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "$defs": {"model_spec": _MODEL_SPEC},
    "properties": {
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["nx", "nz", "dx", "dz"],
            "properties": {
                "nx": {"type": "integer", "minimum": 3},
                "nz": {"type": "integer", "minimum": 3},
                "dx": {"type": "number", "exclusiveMinimum": 0},
                "dz": {"type": "number", "exclusiveMinimum": 0},
                "x0": {"type": "number"},
                "z0": {"type": "number"},
            },
        },
        "pml_width": {"type": "integer", "minimum": 0},
        "acquisition": {
            "type": "object",
            "additionalProperties": False,
            "required": ["sources", "receivers"],
            "properties": {
                "sources": _POSITIONS_SPEC,
                "receivers": _POSITIONS_SPEC,
                "ricker_f0_hz": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "schedule": _SCHEDULE,
        "lambda_rel": {"type": "number", "exclusiveMinimum": 0},
        "lambda_fixed": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "bounds": {
            "type": "object",
            "additionalProperties": False,
            "required": ["v_min", "v_max"],
            "properties": {
                "v_min": {"type": "number", "exclusiveMinimum": 0},
                "v_max": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "rectangles": {"type": "array", "minItems": 1, "items": _RECTANGLE},
        "flags": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "update_background_once": {"type": "boolean"},
                "algorithm": {"enum": ["irwri", "lwi", "multiblock"]},
            },
        },
        "output_dir": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "model": {"$ref": "#/$defs/model_spec"},
        "data_path": {"type": "string"},
        "noise_snr_db": {"type": ["number", "null"]},
        "inclusion": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "velocity": {"type": "number", "exclusiveMinimum": 0},
                "inclusion_velocity": {"type": "number", "exclusiveMinimum": 0},
                "center": _POSITION,
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "freq_hz": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "timelapse": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "baseline_model": {"$ref": "#/$defs/model_spec"},
                "initial_model": {"$ref": "#/$defs/model_spec"},
                "baseline_receivers": _POSITIONS_SPEC,
                "perturbation_boxes": {
                    "type": "array", "minItems": 1,
                    "items": {
                        "type": "object", "additionalProperties": False,
                        "required": ["rectangle", "delta_v"],
                        "properties": {"rectangle": _RECTANGLE,
                                       "delta_v": {"type": "number"}},
                    },
                },
                "baseline_schedule": _SCHEDULE,
                "monitor_schedule": _SCHEDULE,
            },
        },
    },
}


def validate_config(cfg: dict) -> dict:
    import jsonschema

    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {path}: {exc.message}") from exc
    return cfg


def merge_config(defaults: dict, overrides: dict | None) -> dict:
    """Deep-merge overrides into defaults; lists replace wholesale."""
    merged = copy.deepcopy(defaults)
    if overrides:
        _merge_into(merged, overrides)
    return merged


def _merge_into(base: dict, overrides: dict):
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge_into(base[key], value)
        else:
            base[key] = copy.deepcopy(value)


# ----------------------------------------------------------------------------
# Defaults


def default_forward_config() -> dict:
    return {
        "grid": {"nx": 101, "nz": 101, "dx": 30.0, "dz": 30.0, "x0": 0.0, "z0": 0.0},
        "pml_width": 20,
        "acquisition": {
            "sources": {"kind": "explicit", "points": [[1500.0, 1500.0]]},
            "receivers": {"kind": "ring", "center": [1500.0, 1500.0],
                          "radius": 1200.0, "count": 60},
            "ricker_f0_hz": 10.0,
        },
        "schedule": [{"freqs_hz": [5.0], "passes": 1, "iters_per_freq": 5}],
        "model": {"kind": "homogeneous", "velocity": 2000.0},
        "noise_snr_db": None,
        "seed": 0,
        "threads": 1,
        "output_dir": "out_forward",
    }


def default_invert_config() -> dict:
    cfg = default_forward_config()
    cfg.update({
        "lambda_rel": 0.1,
        "lambda_fixed": None,
        "bounds": {"v_min": 1000.0, "v_max": 4000.0},
        "flags": {"algorithm": "irwri", "update_background_once": False},
        "output_dir": "out_invert",
    })
    return cfg


def default_inclusion_config() -> dict:
    """Desk defaults for the circular-inclusion extraction test."""
    return {
        "grid": {"nx": 141, "nz": 141, "dx": 30.0, "dz": 30.0, "x0": 0.0, "z0": 0.0},
        "pml_width": 20,
        "acquisition": {
            "sources": {"kind": "explicit", "points": [[200.0, 2100.0]]},
            "receivers": {"kind": "ring", "center": [2100.0, 2100.0],
                          "radius": 1900.0, "count": 120},
            "ricker_f0_hz": 10.0,
        },
        "lambda_rel": 0.1,
        "lambda_fixed": None,
        "rectangles": [{"x_min": 1400.0, "x_max": 2800.0,
                        "z_min": 1400.0, "z_max": 2800.0}],
        "inclusion": {"velocity": 2000.0, "inclusion_velocity": 2800.0,
                      "center": [2100.0, 2100.0], "radius": 500.0,
                      "freq_hz": 5.0},
        "seed": 0,
        "threads": 1,
        "output_dir": "out_inclusion",
    }


def default_timelapse_config() -> dict:
    """Desk-scale graded-layer baseline with one box perturbation.

    3 km x 1.5 km, 25 m spacing, 15 near-surface sources, receivers every
    50 m along the surface plus two monitoring-well strings bracketing the
    target, box perturbation of +200 m/s, monitor band [5, 10, 15] Hz swept
    twice with five iterations per frequency. The four-layer profile is
    vertically graded (smoothed interfaces) so diving waves sample the target
    depth; purely constant layers leave it illuminated by reflections alone.
    """
    layered = {"kind": "layered",
               "interfaces": [400.0, 800.0, 1100.0],
               "velocities": [1500.0, 2100.0, 2700.0, 3500.0]}
    baseline = {"kind": "smoothed", "base": layered, "sigma_m": 200.0}
    perturbation = [{"rectangle": {"x_min": 1200.0, "x_max": 1800.0,
                                   "z_min": 450.0, "z_max": 750.0},
                     "delta_v": 200.0}]
    surface = [[50.0 + 50.0 * i, 25.0] for i in range(59)]
    wells = [[x, 75.0 + 50.0 * j] for x in (900.0, 2100.0) for j in range(28)]
    return {
        "grid": {"nx": 121, "nz": 61, "dx": 25.0, "dz": 25.0, "x0": 0.0, "z0": 0.0},
        "pml_width": 20,
        "acquisition": {
            "sources": {"kind": "line", "start": [100.0, 25.0],
                        "stop": [2900.0, 25.0], "count": 15},
            "receivers": {"kind": "explicit", "points": surface + wells},
            "ricker_f0_hz": 10.0,
        },
        "lambda_rel": 0.1,
        "lambda_fixed": None,
        "bounds": {"v_min": 1400.0, "v_max": 3600.0},
        "rectangles": [{"x_min": 1050.0, "x_max": 1950.0,
                        "z_min": 300.0, "z_max": 900.0}],
        "flags": {"algorithm": "lwi", "update_background_once": False},
        "timelapse": {
            "baseline_model": baseline,
            "initial_model": {"kind": "smoothed", "base": layered, "sigma_m": 500.0},
            # The legacy baseline survey predates the monitoring wells: it
            # records on the surface line only, so the inverted baseline
            # carries genuine errors for the monitor stage to cope with.
            "baseline_receivers": {"kind": "line", "start": [50.0, 25.0],
                                   "stop": [2950.0, 25.0], "count": 59},
            "perturbation_boxes": perturbation,
            "baseline_schedule": [
                {"freqs_hz": [3.0, 4.0, 5.0], "passes": 1, "iters_per_freq": 5},
                {"freqs_hz": [3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
                 "passes": 1, "iters_per_freq": 5},
                {"freqs_hz": [5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0],
                 "passes": 1, "iters_per_freq": 5},
            ],
            "monitor_schedule": [
                {"freqs_hz": [5.0, 10.0, 15.0], "passes": 2, "iters_per_freq": 5},
            ],
        },
        "seed": 0,
        "threads": 1,
        "output_dir": "out_timelapse",
    }


# ----------------------------------------------------------------------------
# Resolution to domain objects


def grid_from_config(cfg: dict) -> Grid:
    g = cfg["grid"]
    return Grid(g["nx"], g["nz"], g["dx"], g["dz"],
                (g.get("x0", 0.0), g.get("z0", 0.0)))


def resolve_positions(spec: dict) -> np.ndarray:
    kind = spec["kind"]
    if kind == "explicit":
        return np.asarray(spec["points"], dtype=float)
    if kind == "ring":
        cx, cz = spec["center"]
        angles = 2.0 * np.pi * np.arange(spec["count"]) / spec["count"]
        return np.column_stack([cx + spec["radius"] * np.cos(angles),
                                cz + spec["radius"] * np.sin(angles)])
    if kind == "line":
        start = np.asarray(spec["start"], dtype=float)
        stop = np.asarray(spec["stop"], dtype=float)
        t = np.linspace(0.0, 1.0, spec["count"])[:, None]
        return start[None, :] * (1 - t) + stop[None, :] * t
    raise ConfigError(f"unknown position spec kind {kind!r}")


def acquisition_from_config(cfg: dict) -> Acquisition:
    acq = cfg["acquisition"]
    return Acquisition(
        sources=resolve_positions(acq["sources"]),
        receivers=resolve_positions(acq["receivers"]),
        spectrum=RickerSpectrum(acq.get("ricker_f0_hz", 10.0)),
    )


def bounds_from_config(cfg: dict) -> BoundConstraint:
    try:
        b = cfg["bounds"]
    except KeyError:
        raise ConfigError("config requires a 'bounds' section for inversion")
    return BoundConstraint(b["v_min"], b["v_max"])


def rectangles_from_config(cfg: dict) -> list[Rectangle]:
    try:
        rects = cfg["rectangles"]
    except KeyError:
        raise ConfigError("config requires a 'rectangles' section for a partition")
    return [Rectangle(r["x_min"], r["x_max"], r["z_min"], r["z_max"]) for r in rects]


def schedule_from_config(entries) -> tuple[ScheduleEntry, ...]:
    return tuple(
        ScheduleEntry(
            freqs_hz=tuple(e["freqs_hz"]),
            passes=e.get("passes", 1),
            iters_per_freq=e.get("iters_per_freq", 5),
        )
        for e in entries
    )


def inversion_config_from(cfg: dict, schedule=None) -> InversionConfig:
    flags = cfg.get("flags", {})
    if schedule is None:
        schedule = schedule_from_config(cfg["schedule"]) if "schedule" in cfg else ()
    return InversionConfig(
        bounds=bounds_from_config(cfg),
        pml_width=cfg.get("pml_width", 20),
        lambda_rel=cfg.get("lambda_rel", 0.1),
        lambda_fixed=cfg.get("lambda_fixed"),
        update_background_once=flags.get("update_background_once", False),
        spectrum_f0=cfg.get("acquisition", {}).get("ricker_f0_hz", 10.0),
        schedule=schedule,
    )


def resolve_model(spec: dict, grid: Grid) -> Model:
    kind = spec["kind"]
    if kind == "homogeneous":
        return _models.homogeneous_model(grid, spec["velocity"])
    if kind == "file":
        from .fileio import read_model_file

        mf = read_model_file(spec["path"])
        model = mf.to_model()
        if (model.grid.nx, model.grid.nz) != (grid.nx, grid.nz):
            raise ConfigError(
                f"model file grid {model.grid.nx}x{model.grid.nz} does not match "
                f"config grid {grid.nx}x{grid.nz}"
            )
        return model
    if kind == "inclusion":
        return _models.inclusion_model(grid, spec["velocity"],
                                       spec["inclusion_velocity"],
                                       tuple(spec["center"]), spec["radius"])
    if kind == "layered":
        return _models.layered_model(grid, spec["interfaces"], spec["velocities"])
    if kind == "perturbed":
        base = resolve_model(spec["base"], grid)
        boxes = [
            (Rectangle(b["rectangle"]["x_min"], b["rectangle"]["x_max"],
                       b["rectangle"]["z_min"], b["rectangle"]["z_max"]),
             b["delta_v"])
            for b in spec["boxes"]
        ]
        return _models.add_box_perturbations(base, boxes)
    if kind == "smoothed":
        return _models.smooth_model(resolve_model(spec["base"], grid), spec["sigma_m"])
    raise ConfigError(f"unknown model kind {kind!r}")


def write_resolved_config(cfg: dict, path):
    with open(path, "w") as fh:
        json.dump(cfg, fh, sort_keys=True, indent=2)
        fh.write("\n")
