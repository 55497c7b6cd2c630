"""Reading and writing fields as CSV tables or compact binary dumps.

CSV columns are ``t, k, y, component, re, im`` for Fourier coefficients
(``k`` is the flat mode index of the tangential grid) and
``t, x, y, component, re, im`` for physical samples (``x`` is the flat
sample index).  Boundary fields have an empty ``y`` column.

The binary layout is little-endian throughout::

    magic      8 bytes  b"QSFIELD\\0"
    version    uint8    (currently 1)
    kind       uint8    0 boundary, 1 interior
    dim        uint16   tangential dimension
    K          uint32
    L          float64
    n_t        uint32
    n_y        uint32   (0 for boundary fields)
    comps      uint32
    times      n_t float64
    heights    n_y float64
    values     complex128, C order, shape (n_t, n_modes[, n_y], comps)

All writers go through a temporary file in the target directory followed
by :func:`os.replace`, so readers never see a partial file.
"""
from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .halfspace import BoundaryField, DiscreteField, TangentialGrid

__all__ = [
    "MAGIC",
    "VERSION",
    "FieldFormatError",
    "atomic_write",
    "write_field_csv",
    "read_field_csv",
    "write_field_binary",
    "read_field_binary",
]

MAGIC = b"QSFIELD\0"
VERSION = 1
_HEADER = struct.Struct("<8sBBHIdIII")


class FieldFormatError(ValueError):
    """A field file is malformed or has an unsupported version."""


def atomic_write(path, data: bytes | str) -> None:
    """Write ``data`` to ``path`` via a sibling temporary file and rename."""
    path = Path(path)
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _layout(field):
    interior = isinstance(field, DiscreteField)
    values = field.values if interior else field.values[:, :, None, :]
    heights = field.heights if interior else None
    return interior, values, heights


def write_field_csv(path, field, physical: bool = False) -> None:
    """Write ``field`` as a CSV table (coefficients unless ``physical``)."""
    interior, values, heights = _layout(field)
    if physical:
        samples = field.to_physical()
        values = samples.reshape((samples.shape[0], -1) + samples.shape[1 + field.grid.dim:])
        if not interior:
            values = values[:, :, None, :]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "x" if physical else "k", "y", "component", "re", "im"])
    n_t, n_k, n_y, comps = values.shape
    for it in range(n_t):
        t = repr(float(field.times[it]))
        for ik in range(n_k):
            for iy in range(n_y):
                y = repr(float(heights[iy])) if interior else ""
                for c in range(comps):
                    z = values[it, ik, iy, c]
                    writer.writerow([t, ik, y, c, repr(float(z.real)), repr(float(z.imag))])
    atomic_write(path, buf.getvalue())


def read_field_csv(path, grid: TangentialGrid):
    """Read a coefficient CSV written by :func:`write_field_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t", "k", "y", "component", "re", "im"]:
            raise FieldFormatError(f"unexpected CSV header {header!r}")
        rows = list(reader)
    if not rows:
        raise FieldFormatError("empty field table")
    interior = rows[0][2] != ""
    times = sorted({float(r[0]) for r in rows})
    heights = sorted({float(r[2]) for r in rows}) if interior else [0.0]
    comps = max(int(r[3]) for r in rows) + 1
    t_idx = {t: i for i, t in enumerate(times)}
    y_idx = {y: i for i, y in enumerate(heights)}
    values = np.zeros((len(times), grid.n_modes, len(heights), comps), dtype=complex)
    for r in rows:
        k = int(r[1])
        if not 0 <= k < grid.n_modes:
            raise FieldFormatError(f"mode index {k} outside the grid")
        iy = y_idx[float(r[2])] if interior else 0
        values[t_idx[float(r[0])], k, iy, int(r[3])] = complex(float(r[4]), float(r[5]))
    times = np.array(times)
    if interior:
        return DiscreteField(values, times, grid, np.array(heights))
    return BoundaryField(values[:, :, 0, :], times, grid)


def write_field_binary(path, field) -> None:
    """Write ``field`` in the binary layout described in the module docstring."""
    interior, values, heights = _layout(field)
    grid = field.grid
    n_t, _, n_y, comps = values.shape
    header = _HEADER.pack(MAGIC, VERSION, int(interior), grid.dim, grid.K, float(grid.L), n_t, n_y if interior else 0, comps)
    parts = [header, np.asarray(field.times, dtype="<f8").tobytes()]
    if interior:
        parts.append(np.asarray(heights, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(field.values, dtype="<c16").tobytes())
    atomic_write(path, b"".join(parts))


def read_field_binary(path):
    """Read a field written by :func:`write_field_binary`."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FieldFormatError("file too short for header")
    magic, version, kind, dim, K, L, n_t, n_y, comps = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FieldFormatError("bad magic header")
    if version != VERSION:
        raise FieldFormatError(f"unsupported version {version}")
    grid = TangentialGrid(dim, K, L)
    off = _HEADER.size
    times = np.frombuffer(raw, "<f8", n_t, off).copy()
    off += 8 * n_t
    heights = np.frombuffer(raw, "<f8", n_y, off).copy()
    off += 8 * n_y
    shape = (n_t, grid.n_modes) + ((n_y,) if kind else ()) + (comps,)
    count = int(np.prod(shape))
    if len(raw) != off + 16 * count:
        raise FieldFormatError("payload size does not match header")
    values = np.frombuffer(raw, "<c16", count, off).reshape(shape).astype(complex)
    if kind:
        return DiscreteField(values, times, grid, heights)
    return BoundaryField(values, times, grid)
