"""Binary model/data file formats and raster export.

Both formats are little-endian with a 4-byte magic and a u32 version. Readers
are strict: any structural violation raises FormatError naming the byte
offset, and a file is never partially accepted. Valid files round-trip
byte-identically through read followed by write.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .acquisition import DataSet
from .errors import FormatError
from .grid import Grid, Model

__all__ = [
    "ModelFile",
    "read_model_file",
    "write_model_file",
    "read_data_file",
    "write_data_file",
    "export_raster",
]

MODEL_MAGIC = b"LWIM"
DATA_MAGIC = b"LWID"
FORMAT_VERSION = 1
VELOCITY_MAX = 2.0e4  # m/s, exclusive upper bound on stored velocities

_HEADER_MODEL = struct.Struct("<4sIIIdddd")  # magic, version, nx, nz, dx, dz, x0, z0
_HEADER_DATA = struct.Struct("<4sIIII")  # magic, version, n_f, n_s, n_r


@dataclass(frozen=True)
class ModelFile:
    """Raw velocity raster record: exactly what the file stores."""

    nx: int
    nz: int
    dx: float
    dz: float
    x0: float
    z0: float
    velocity: np.ndarray  # (nx*nz,) m/s, z-outer/x-inner order

    def to_model(self) -> Model:
        grid = Grid(self.nx, self.nz, self.dx, self.dz, (self.x0, self.z0))
        return Model.from_velocity(grid, self.velocity)

    @classmethod
    def from_model(cls, model: Model) -> "ModelFile":
        g = model.grid
        return cls(nx=g.nx, nz=g.nz, dx=g.dx, dz=g.dz,
                   x0=g.origin[0], z0=g.origin[1],
                   velocity=np.asarray(model.velocity, dtype="<f8"))


def _check_remaining(data: bytes, offset: int, needed: int, what: str):
    if len(data) - offset < needed:
        raise FormatError(f"truncated {what} (need {needed} bytes, have {len(data) - offset})",
                          offset)


def read_model_file(path) -> ModelFile:
    with open(path, "rb") as fh:
        data = fh.read()
    _check_remaining(data, 0, _HEADER_MODEL.size, "model header")
    magic, version, nx, nz, dx, dz, x0, z0 = _HEADER_MODEL.unpack_from(data, 0)
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if nx < 1 or nz < 1:
        raise FormatError(f"invalid grid counts {nx}x{nz}", 8)
    for off, name, value in ((16, "dx", dx), (24, "dz", dz)):
        if not np.isfinite(value) or value <= 0:
            raise FormatError(f"invalid spacing {name}={value}", off)
    for off, name, value in ((32, "x0", x0), (40, "z0", z0)):
        if not np.isfinite(value):
            raise FormatError(f"invalid origin {name}={value}", off)
    payload_offset = _HEADER_MODEL.size
    expected = nx * nz * 8
    if len(data) - payload_offset != expected:
        raise FormatError(
            f"payload length {len(data) - payload_offset} != declared {expected}",
            payload_offset,
        )
    velocity = np.frombuffer(data, dtype="<f8", count=nx * nz, offset=payload_offset)
    bad = ~(np.isfinite(velocity) & (velocity > 0) & (velocity < VELOCITY_MAX))
    if np.any(bad):
        first = int(np.argmax(bad))
        raise FormatError(
            f"velocity value {velocity[first]!r} outside (0, {VELOCITY_MAX})",
            payload_offset + 8 * first,
        )
    return ModelFile(nx=nx, nz=nz, dx=dx, dz=dz, x0=x0, z0=z0, velocity=velocity)


def write_model_file(mf: ModelFile, path):
    velocity = np.ascontiguousarray(mf.velocity, dtype="<f8")
    if velocity.size != mf.nx * mf.nz:
        raise ValueError(f"velocity length {velocity.size} != nx*nz = {mf.nx * mf.nz}")
    header = _HEADER_MODEL.pack(MODEL_MAGIC, FORMAT_VERSION, mf.nx, mf.nz,
                                mf.dx, mf.dz, mf.x0, mf.z0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(velocity.tobytes())


def read_data_file(path) -> DataSet:
    with open(path, "rb") as fh:
        data = fh.read()
    _check_remaining(data, 0, _HEADER_DATA.size, "data header")
    magic, version, n_f, n_s, n_r = _HEADER_DATA.unpack_from(data, 0)
    if magic != DATA_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if n_f < 1 or n_s < 1 or n_r < 1:
        raise FormatError(f"invalid counts n_f={n_f}, n_s={n_s}, n_r={n_r}", 8)
    offset = _HEADER_DATA.size
    expected_total = offset + 8 * n_f + 16 * n_s + 16 * n_r + 16 * n_f * n_s * n_r
    if len(data) != expected_total:
        raise FormatError(
            f"file length {len(data)} != declared layout {expected_total}", offset
        )
    freqs = np.frombuffer(data, dtype="<f8", count=n_f, offset=offset)
    if not np.all(np.isfinite(freqs)) or np.any(np.diff(freqs) <= 0):
        raise FormatError("frequencies must be finite and strictly increasing", offset)
    offset += 8 * n_f
    sources = np.frombuffer(data, dtype="<f8", count=2 * n_s, offset=offset)
    if not np.all(np.isfinite(sources)):
        raise FormatError("non-finite source position", offset)
    offset += 16 * n_s
    receivers = np.frombuffer(data, dtype="<f8", count=2 * n_r, offset=offset)
    if not np.all(np.isfinite(receivers)):
        raise FormatError("non-finite receiver position", offset)
    offset += 16 * n_r
    payload = np.frombuffer(data, dtype="<f8", count=2 * n_f * n_s * n_r, offset=offset)
    if not np.all(np.isfinite(payload)):
        first = int(np.argmax(~np.isfinite(payload)))
        raise FormatError("non-finite record value", offset + 8 * first)
    complex_records = payload[0::2] + 1j * payload[1::2]
    # layout: frequency-outer, source-middle, receiver-inner
    cube = complex_records.reshape(n_f, n_s, n_r)
    records = {float(freqs[i]): np.ascontiguousarray(cube[i].T) for i in range(n_f)}
    return DataSet(
        frequencies=tuple(float(f) for f in freqs),
        records=records,
        source_positions=sources.reshape(n_s, 2),
        receiver_positions=receivers.reshape(n_r, 2),
    )


def write_data_file(dataset: DataSet, path):
    n_f = len(dataset.frequencies)
    n_s = dataset.n_sources
    n_r = dataset.n_receivers
    header = _HEADER_DATA.pack(DATA_MAGIC, FORMAT_VERSION, n_f, n_s, n_r)
    cube = np.empty((n_f, n_s, n_r), dtype=complex)
    for i, f in enumerate(dataset.frequencies):
        cube[i] = dataset.records[f].T
    payload = np.empty(2 * cube.size, dtype="<f8")
    flat = cube.ravel()
    payload[0::2] = flat.real
    payload[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(dataset.frequencies, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.source_positions, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.receiver_positions, dtype="<f8").tobytes())
        fh.write(payload.tobytes())


def export_raster(field, grid: Grid, path, fmt: str = "csv"):
    """Write a real-valued grid field as csv, raw f64, or 16-bit PGM.

    csv: one line per z row, comma-separated decimals. f64: raw little-endian
    doubles in canonical order plus a JSON sidecar describing the shape. pgm16:
    linear map of [min, max] to [0, 65535]; a constant field maps to all 0.
    """
    raster = np.asarray(field, dtype=float)
    if raster.ndim == 1:
        raster = raster.reshape(grid.nz, grid.nx)
    if raster.shape != (grid.nz, grid.nx):
        raise ValueError(f"field shape {raster.shape} != grid ({grid.nz}, {grid.nx})")
    if not np.all(np.isfinite(raster)):
        raise ValueError("raster contains non-finite values")
    if fmt == "csv":
        with open(path, "w") as fh:
            for row in raster:
                fh.write(",".join(format(v, ".17g") for v in row))
                fh.write("\n")
    elif fmt == "f64":
        with open(path, "wb") as fh:
            fh.write(np.ascontiguousarray(raster, dtype="<f8").tobytes())
        sidecar = {
            "nx": grid.nx, "nz": grid.nz, "dx": grid.dx, "dz": grid.dz,
            "x0": grid.origin[0], "z0": grid.origin[1],
            "dtype": "<f8", "order": "z-outer,x-inner",
        }
        with open(str(path) + ".json", "w") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=2)
            fh.write("\n")
    elif fmt == "pgm16":
        lo = raster.min()
        hi = raster.max()
        if hi > lo:
            scaled = np.round((raster - lo) / (hi - lo) * 65535.0).astype(">u2")
        else:
            scaled = np.zeros_like(raster, dtype=">u2")
        with open(path, "wb") as fh:
            fh.write(f"P5\n{grid.nx} {grid.nz}\n65535\n".encode())
            fh.write(scaled.tobytes())
    else:
        raise ValueError(f"unknown raster format {fmt!r}")
