"""Binary field snapshots with a fixed little-endian wire format.

Layout: magic "HYLO" | u32 version=1 | u8 kind | u8 dim |
dim x u64 point counts | dim*dim f64 cell matrix (row major) |
f64 payload.  Kind 0 is a real field, kind 1 a complex field (interleaved
re, im), kind 2 a Klein-Gordon pair (psi payload then psi_dot payload,
both complex).  Round trips are bit exact; writes go through a temp file
and an atomic rename.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .lattice import Field, Grid, NkgState

MAGIC = b"HYLO"
VERSION = 1
KIND_REAL = 0
KIND_COMPLEX = 1
KIND_NKG = 2


class SnapshotFormatError(ValueError):
    """Malformed snapshot file."""


@dataclass
class RawSnapshot:
    """Decoded snapshot before attachment to a grid."""

    kind: int
    dim: int
    counts: tuple[int, ...]
    matrix: np.ndarray
    payload: tuple[np.ndarray, ...]  # one array per field


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".hylo-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_snapshot(path: str, obj: Union[Field, NkgState]) -> None:
    """Serialize a Field or NkgState; complex unless the values are real dtype."""
    if isinstance(obj, NkgState):
        kind = KIND_NKG
        grid = obj.grid
        arrays = [obj.psi.values.astype(np.complex128), obj.psi_dot.values.astype(np.complex128)]
    elif isinstance(obj, Field):
        grid = obj.grid
        if obj.values.dtype.kind == "f":
            kind = KIND_REAL
            arrays = [obj.values.astype(np.float64)]
        else:
            kind = KIND_COMPLEX
            arrays = [obj.values.astype(np.complex128)]
    else:
        raise TypeError(f"cannot snapshot object of type {type(obj).__name__}")

    dim = grid.dim
    header = MAGIC
    header += struct.pack("<I", VERSION)
    header += struct.pack("<BB", kind, dim)
    header += struct.pack(f"<{dim}Q", *grid.shape)
    header += grid.lattice.matrix.astype("<f8").tobytes(order="C")
    payload = b"".join(
        a.astype("<c16" if a.dtype.kind == "c" else "<f8").tobytes(order="C")
        for a in arrays
    )
    _atomic_write(path, header + payload)


def _payload_floats(kind: int, npoints: int) -> int:
    if kind == KIND_REAL:
        return npoints
    if kind == KIND_COMPLEX:
        return 2 * npoints
    return 4 * npoints  # NKG: two interleaved complex fields


def read_raw_snapshot(path: str) -> RawSnapshot:
    """Decode and validate a snapshot file without grid context."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 10 or data[:4] != MAGIC:
        raise SnapshotFormatError(
            f"bad magic at byte 0: expected {MAGIC!r}, got {data[:4]!r}"
        )
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise SnapshotFormatError(
            f"unsupported version {version} at byte 4 (expected {VERSION})"
        )
    kind, dim = struct.unpack_from("<BB", data, 8)
    if kind not in (KIND_REAL, KIND_COMPLEX, KIND_NKG):
        raise SnapshotFormatError(f"unknown kind {kind} at byte 8")
    if dim not in (1, 2, 3):
        raise SnapshotFormatError(f"invalid dim {dim} at byte 9")
    offset = 10
    need = dim * 8
    if len(data) < offset + need:
        raise SnapshotFormatError(f"truncated point counts at byte {offset}")
    counts = struct.unpack_from(f"<{dim}Q", data, offset)
    offset += need
    need = dim * dim * 8
    if len(data) < offset + need:
        raise SnapshotFormatError(f"truncated lattice matrix at byte {offset}")
    matrix = np.frombuffer(data, dtype="<f8", count=dim * dim, offset=offset)
    matrix = matrix.reshape(dim, dim).copy()
    offset += need

    npoints = int(np.prod(counts))
    expected = _payload_floats(kind, npoints) * 8
    actual = len(data) - offset
    if actual != expected:
        raise SnapshotFormatError(
            f"payload size mismatch: expected {expected} bytes, got {actual}"
        )
    shape = tuple(int(c) for c in counts)
    if kind == KIND_REAL:
        payload = (np.frombuffer(data, dtype="<f8", count=npoints, offset=offset)
                   .reshape(shape).copy(),)
    elif kind == KIND_COMPLEX:
        payload = (np.frombuffer(data, dtype="<c16", count=npoints, offset=offset)
                   .reshape(shape).copy(),)
    else:
        psi = np.frombuffer(data, dtype="<c16", count=npoints, offset=offset)
        psi_dot = np.frombuffer(
            data, dtype="<c16", count=npoints, offset=offset + 16 * npoints
        )
        payload = (psi.reshape(shape).copy(), psi_dot.reshape(shape).copy())
    return RawSnapshot(kind, dim, shape, matrix, payload)


def read_snapshot(path: str, grid: Optional[Grid] = None):
    """Read a snapshot back as a Field or NkgState.

    Snapshots store total point counts and the cell matrix; the cell/points
    split needed for a typed Field comes from the caller's grid.  Without a
    grid the decoded RawSnapshot is returned.
    """
    raw = read_raw_snapshot(path)
    if grid is None:
        return raw
    if raw.counts != grid.shape:
        raise SnapshotFormatError(
            f"snapshot counts {raw.counts} do not match grid shape {grid.shape}"
        )
    if not np.array_equal(raw.matrix, grid.lattice.matrix):
        raise SnapshotFormatError("snapshot lattice matrix does not match the grid")
    if raw.kind == KIND_NKG:
        return NkgState(Field(grid, raw.payload[0]), Field(grid, raw.payload[1]))
    return Field(grid, raw.payload[0])
