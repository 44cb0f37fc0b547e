"""Box domain, MAC staggered grid and field containers.

Scalars live at cell centers, vector components on the faces normal to
their axis.  Faces on the domain boundary whose normal matches the
component axis ("pinned" faces) carry the no-penetration value 0 for
no-slip fields; all quadratures give them trapezoid weight 1/2 so they
never contribute for admissible fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BoxDomain",
    "StaggeredGrid",
    "ScalarField",
    "VectorField",
    "GridMismatchError",
]


class GridMismatchError(ValueError):
    """A field was combined with an operator or field on a different grid."""


@dataclass(frozen=True)
class BoxDomain:
    dim: int
    lengths: tuple[float, ...]
    gravity_axis: int = -1

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if len(self.lengths) != self.dim:
            raise ValueError("lengths must have one entry per axis")
        if any(L <= 0 for L in self.lengths):
            raise ValueError("all box lengths must be positive")
        g = self.gravity_axis % self.dim
        object.__setattr__(self, "gravity_axis", g)
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))


@dataclass(frozen=True)
class StaggeredGrid:
    domain: BoxDomain
    cells: tuple[int, ...]
    h: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if len(self.cells) != self.domain.dim:
            raise ValueError("cells must have one entry per axis")
        if any(n < 4 for n in self.cells):
            raise ValueError("need at least 4 cells per axis")
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))
        h = tuple(L / n for L, n in zip(self.domain.lengths, self.cells))
        object.__setattr__(self, "h", h)

    # -- basic geometry -------------------------------------------------
    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def gravity_axis(self) -> int:
        return self.domain.gravity_axis

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    def comp_shape(self, i: int) -> tuple[int, ...]:
        s = list(self.cells)
        s[i] += 1
        return tuple(s)

    def n_faces(self, i: int) -> int:
        return int(np.prod(self.comp_shape(i)))

    @property
    def total_faces(self) -> int:
        return sum(self.n_faces(i) for i in range(self.dim))

    def comp_offsets(self) -> list[int]:
        offs = [0]
        for i in range(self.dim):
            offs.append(offs[-1] + self.n_faces(i))
        return offs

    # -- coordinates ----------------------------------------------------
    def cell_coords(self, axis: int) -> np.ndarray:
        """1D coordinates of cell centers along `axis`."""
        n, h = self.cells[axis], self.h[axis]
        return (np.arange(n) + 0.5) * h

    def face_coords(self, axis: int) -> np.ndarray:
        """1D coordinates of faces staggered along `axis`."""
        n, h = self.cells[axis], self.h[axis]
        return np.arange(n + 1) * h

    def cell_height(self) -> np.ndarray:
        """Vertical coordinate broadcast over the cell array."""
        g = self.gravity_axis
        shape = [1] * self.dim
        shape[g] = self.cells[g]
        return self.cell_coords(g).reshape(shape)

    def face_height(self, comp: int) -> np.ndarray:
        """Vertical coordinate broadcast over the face array of `comp`."""
        g = self.gravity_axis
        shape = [1] * self.dim
        if comp == g:
            shape[g] = self.cells[g] + 1
            x = self.face_coords(g)
        else:
            shape[g] = self.cells[g]
            x = self.cell_coords(g)
        return x.reshape(shape)

    # -- pinned-face bookkeeping -----------------------------------------
    def interior_mask(self) -> np.ndarray:
        """Flat boolean mask, False on boundary-normal (pinned) faces."""
        parts = []
        for i in range(self.dim):
            m = np.ones(self.comp_shape(i), dtype=bool)
            sl = [slice(None)] * self.dim
            sl[i] = 0
            m[tuple(sl)] = False
            sl[i] = -1
            m[tuple(sl)] = False
            parts.append(m.ravel())
        return np.concatenate(parts)

    def face_weights(self) -> np.ndarray:
        """Flat trapezoid quadrature weights (1/2 on pinned faces)."""
        w = np.ones(self.total_faces)
        w[~self.interior_mask()] = 0.5
        return w


def _check_grid(a, b):
    if a.grid is not b.grid and a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")


@dataclass
class ScalarField:
    grid: StaggeredGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.cells:
            raise GridMismatchError(
                f"scalar values shape {self.values.shape} != cells {self.grid.cells}"
            )

    @classmethod
    def zeros(cls, grid: StaggeredGrid) -> "ScalarField":
        return cls(grid, np.zeros(grid.cells))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def norm_l2(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(self.values**2)))

    def mean(self) -> float:
        return float(np.mean(self.values))


@dataclass
class VectorField:
    grid: StaggeredGrid
    components: list[np.ndarray]

    def __post_init__(self):
        if len(self.components) != self.grid.dim:
            raise GridMismatchError("one component per axis required")
        comps = []
        for i, c in enumerate(self.components):
            c = np.asarray(c, dtype=np.float64)
            if c.shape != self.grid.comp_shape(i):
                raise GridMismatchError(
                    f"component {i} shape {c.shape} != {self.grid.comp_shape(i)}"
                )
            comps.append(c)
        self.components = comps

    @classmethod
    def zeros(cls, grid: StaggeredGrid) -> "VectorField":
        return cls(grid, [np.zeros(grid.comp_shape(i)) for i in range(grid.dim)])

    @classmethod
    def from_flat(cls, grid: StaggeredGrid, vec: np.ndarray) -> "VectorField":
        offs = grid.comp_offsets()
        comps = [
            vec[offs[i] : offs[i + 1]].reshape(grid.comp_shape(i)).copy()
            for i in range(grid.dim)
        ]
        return cls(grid, comps)

    def flat(self) -> np.ndarray:
        return np.concatenate([c.ravel() for c in self.components])

    def copy(self) -> "VectorField":
        return VectorField(self.grid, [c.copy() for c in self.components])

    def zero_normal_boundary(self) -> None:
        """Pin boundary-normal faces to zero (no-penetration)."""
        for i, c in enumerate(self.components):
            sl = [slice(None)] * self.grid.dim
            sl[i] = 0
            c[tuple(sl)] = 0.0
            sl[i] = -1
            c[tuple(sl)] = 0.0

    @property
    def vertical(self) -> np.ndarray:
        return self.components[self.grid.gravity_axis]

    def norm_l2(self) -> float:
        g = self.grid
        w = g.face_weights()
        return float(np.sqrt(g.cell_volume * np.sum(w * self.flat() ** 2)))

    def scaled(self, t: float) -> "VectorField":
        return VectorField(self.grid, [t * c for c in self.components])

    def __add__(self, other: "VectorField") -> "VectorField":
        _check_grid(self, other)
        return VectorField(
            self.grid, [a + b for a, b in zip(self.components, other.components)]
        )

    def __sub__(self, other: "VectorField") -> "VectorField":
        _check_grid(self, other)
        return VectorField(
            self.grid, [a - b for a, b in zip(self.components, other.components)]
        )
