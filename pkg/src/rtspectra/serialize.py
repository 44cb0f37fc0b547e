"""Field snapshot persistence.

Binary layout (little-endian, see docs/FORMATS.md for the byte table):

    offset  0: 8-byte magic "RTSFLD01"
    offset  8: uint16 version (1)
    offset 10: uint8 dim (2 or 3)
    offset 11: uint8 kind (0 = cell scalar, 1 = face vector)
    offset 12: uint8 gravity axis
    offset 13: 3 zero bytes (padding)
    offset 16: dim x uint32 cell counts
    then     : dim x float64 box lengths
    then     : float64 payload, C order; scalars store prod(cells) values,
               vectors store each face component in axis order

CSV export is for small grids: one row per cell (or face) with
coordinates and value.
"""

from __future__ import annotations

import struct

import numpy as np

from .core import BoxDomain, ScalarField, StaggeredGrid, VectorField

FIELD_MAGIC = b"RTSFLD01"


class FieldFormatError(ValueError):
    """Malformed field file; `offset` is the failing byte."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _header(grid: StaggeredGrid, kind: int) -> bytes:
    parts = [FIELD_MAGIC,
             struct.pack("<HBBB3x", 1, grid.dim, kind, grid.gravity_axis),
             struct.pack(f"<{grid.dim}I", *grid.cells),
             struct.pack(f"<{grid.dim}d", *grid.domain.lengths)]
    return b"".join(parts)


def save_field(path, field) -> None:
    if isinstance(field, ScalarField):
        kind, payload = 0, field.values.ravel()
    elif isinstance(field, VectorField):
        kind, payload = 1, field.flat()
    else:
        raise TypeError(f"cannot serialize {type(field).__name__}")
    with open(path, "wb") as f:
        f.write(_header(field.grid, kind))
        payload.astype("<f8").tofile(f)


def load_field(path, grid: StaggeredGrid | None = None):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 8 or raw[:8] != FIELD_MAGIC:
        raise FieldFormatError(f"bad magic in {path}", 0)
    if len(raw) < 16:
        raise FieldFormatError(f"truncated header in {path}", len(raw))
    version, dim, kind, gaxis = struct.unpack_from("<HBBB", raw, 8)
    if version != 1:
        raise FieldFormatError(f"unsupported version {version}", 8)
    if dim not in (2, 3):
        raise FieldFormatError(f"bad dimension {dim}", 10)
    if kind not in (0, 1):
        raise FieldFormatError(f"bad field kind {kind}", 11)
    base = 16
    need = base + 4 * dim + 8 * dim
    if len(raw) < need:
        raise FieldFormatError(f"truncated grid header in {path}", len(raw))
    cells = struct.unpack_from(f"<{dim}I", raw, base)
    lengths = struct.unpack_from(f"<{dim}d", raw, base + 4 * dim)
    file_grid = StaggeredGrid(BoxDomain(dim, lengths, gaxis), cells)
    if grid is not None:
        if (grid.cells != file_grid.cells
                or grid.domain.lengths != file_grid.domain.lengths
                or grid.gravity_axis != file_grid.gravity_axis):
            raise FieldFormatError(
                f"grid in {path} is {cells}, expected {grid.cells}", base)
        file_grid = grid
    count = file_grid.n_cells if kind == 0 else file_grid.total_faces
    if len(raw) != need + 8 * count:
        off = min(len(raw), need + 8 * count)
        raise FieldFormatError(
            f"payload length mismatch in {path}: have {len(raw)}, "
            f"need {need + 8 * count}", off)
    payload = np.frombuffer(raw, dtype="<f8", offset=need).copy()
    if not np.all(np.isfinite(payload)):
        bad = int(np.argmin(np.isfinite(payload)))
        raise FieldFormatError(f"non-finite payload value {bad}",
                               need + 8 * bad)
    if kind == 0:
        return ScalarField(file_grid, payload.reshape(file_grid.cells))
    return VectorField.from_flat(file_grid, payload)


def scalar_to_csv(field: ScalarField) -> str:
    grid = field.grid
    axes = [grid.cell_coords(i) for i in range(grid.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    header = ",".join(f"x{i + 1}" for i in range(grid.dim)) + ",value"
    rows = [header]
    flat = [m.ravel() for m in mesh] + [field.values.ravel()]
    for vals in zip(*flat):
        rows.append(",".join(f"{v:.17g}" for v in vals))
    return "\n".join(rows) + "\n"
