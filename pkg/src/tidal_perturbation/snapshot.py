"""TSF1 binary field snapshots.

Layout (all little-endian)::

    b"TSF1"
    u32 nx, u32 ny, u32 ncomp
    f64 Lx, f64 Ly, f64 time
    ncomp * nx * ny f64 values, component-major, then row-major (nx, ny)
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import DomainError
from .spectral import TorusGrid

MAGIC = b"TSF1"
_HEADER = struct.Struct("<4s3I3d")


def encode(grid, time, fields):
    data = np.asarray(fields, dtype="<f8")
    if data.ndim == 2:
        data = data[None]
    if data.shape[1:] != grid.shape:
        raise DomainError(f"snapshot shape {data.shape} does not match grid {grid.shape}")
    header = _HEADER.pack(MAGIC, grid.nx, grid.ny, data.shape[0], grid.Lx, grid.Ly, float(time))
    return header + np.ascontiguousarray(data).tobytes()


def decode(buf):
    """Return ``(grid, time, fields)`` with ``fields`` of shape ``(ncomp, nx, ny)``."""
    if len(buf) < _HEADER.size:
        raise DomainError("truncated TSF1 header")
    magic, nx, ny, ncomp, Lx, Ly, time = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise DomainError(f"bad magic {magic!r}")
    expected = _HEADER.size + 8 * ncomp * nx * ny
    if len(buf) != expected:
        raise DomainError(f"TSF1 payload has {len(buf)} bytes, expected {expected}")
    fields = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size).reshape(ncomp, nx, ny)
    return TorusGrid(nx, ny, Lx, Ly), time, fields.astype(float)


def write(path, grid, time, fields):
    with open(path, "wb") as fh:
        fh.write(encode(grid, time, fields))


def read(path):
    with open(path, "rb") as fh:
        return decode(fh.read())
