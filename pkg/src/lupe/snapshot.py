"""Self-describing binary state snapshots.

Layout (all little-endian):

    bytes 0..4    magic "LUPE1"
    int32 x 4     nx, ny, nz, component count (4)
    float64       time
    payload       nx*ny*nz float64 per component, C order, order vx, vy, T, S

The payload holds physical-space values on the sample grid, making the
format platform-independent and the write/read/write cycle bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .fields import StateU, forward_transform, inverse_transform
from .grid import Grid

MAGIC = b"LUPE1"
N_COMPONENTS = 4
_HEADER = struct.Struct("<4i d")


class SnapshotError(ValueError):
    """Malformed snapshot file (bad magic, truncation, ...)."""


class SnapshotGridMismatch(SnapshotError):
    """Snapshot dimensions differ from the active grid."""


def write_snapshot(state: StateU, t: float, path) -> None:
    g = state.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(g.nx, g.ny, g.nz, N_COMPONENTS, float(t)))
        for f in state.fields():
            vals = np.ascontiguousarray(inverse_transform(f), dtype="<f8")
            fh.write(vals.tobytes())


def read_snapshot(path, grid: Grid):
    """Read a snapshot and rebuild the state; returns (state, t)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(MAGIC)] != MAGIC:
        raise SnapshotError(f"bad magic in {path!s}")
    off = len(MAGIC)
    try:
        nx, ny, nz, ncomp, t = _HEADER.unpack_from(raw, off)
    except struct.error as exc:
        raise SnapshotError(f"truncated header in {path!s}") from exc
    off += _HEADER.size
    if ncomp != N_COMPONENTS:
        raise SnapshotError(f"unexpected component count {ncomp}")
    if (nx, ny, nz) != (grid.nx, grid.ny, grid.nz):
        raise SnapshotGridMismatch(
            f"snapshot is {nx}x{ny}x{nz}, grid is {grid.nx}x{grid.ny}x{grid.nz}"
        )
    need = N_COMPONENTS * nx * ny * nz * 8
    if len(raw) - off != need:
        raise SnapshotError(
            f"truncated payload in {path!s}: {len(raw) - off} bytes, expected {need}"
        )
    fields = []
    for i in range(N_COMPONENTS):
        chunk = raw[off + i * nx * ny * nz * 8 : off + (i + 1) * nx * ny * nz * 8]
        vals = np.frombuffer(chunk, dtype="<f8").reshape(nx, ny, nz).copy()
        fields.append(forward_transform(grid, vals))
    return StateU(*fields), t
