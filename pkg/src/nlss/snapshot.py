"""Binary field snapshots and JSON helpers.

Layout (little endian): 4-byte magic ``NLSS``, u32 version (1), u32 n,
f64 L, u32 component count, i32 first index, then for each component an
n x n row-major block of interleaved f64 (re, im) pairs.  A first index of
1 marks finite mode; a first index <= 0 marks resonant mode.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, SnapshotFormatError
from .grid import FieldVec, Grid2D

MAGIC = b"NLSS"
VERSION = 1
_HEADER = struct.Struct("<4sIIdIi")


def write_snapshot(path, u):
    """Write ``u`` to ``path`` in the snapshot format."""
    g = u.grid
    header = _HEADER.pack(MAGIC, VERSION, g.n, g.L, u.ncomp, int(u.first_index))
    body = np.ascontiguousarray(u.data, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes())


def read_snapshot(path):
    """Read a snapshot; malformed input raises SnapshotFormatError with the byte offset."""
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise SnapshotFormatError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}", 0)
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError("truncated header", len(raw))
    _, version, n, L, count, first = _HEADER.unpack_from(raw, 0)
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported version {version}", 4)
    try:
        grid = Grid2D(L, n)
    except ConfigurationError as exc:
        raise SnapshotFormatError(f"invalid grid header: {exc}", 8) from exc
    if count < 1:
        raise SnapshotFormatError("component count must be positive", 20)
    need = _HEADER.size + count * n * n * 16
    if len(raw) != need:
        raise SnapshotFormatError(f"payload size {len(raw)} != expected {need}", min(len(raw), need))
    data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape(count, n, n)
    mode = "finite" if first >= 1 else "resonant"
    try:
        return FieldVec(grid, data.astype(np.complex128), mode, first)
    except ConfigurationError as exc:
        raise SnapshotFormatError(f"inconsistent indexing: {exc}", 24) from exc


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def dumps(obj):
    """Deterministic JSON: sorted keys, fixed indentation, numpy aware."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_default, allow_nan=True) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())
