"""Discrete vector calculus on the staggered grid.

Field-level wrappers delegate to the stencil kernels; sparse matrices are
assembled once per grid for the pressure solves and eigenvalue pencils.
The pair (div, grad) is an exact adjoint pair under the mesh inner
products, and the componentwise Laplacian is symmetric negative definite
on non-pinned faces.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .core import ScalarField, StaggeredGrid, VectorField


# ---------------------------------------------------------------------------
# field-level wrappers
# ---------------------------------------------------------------------------

def div(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, kernels.divergence(v.components, v.grid.h))


def grad(p: ScalarField) -> VectorField:
    return VectorField(p.grid, kernels.gradient(p.values, p.grid.h))


def lap(v: VectorField) -> VectorField:
    return VectorField(v.grid, kernels.laplacian(v.components, v.grid.h))


def avg_vertical_to_cells(v: VectorField) -> np.ndarray:
    """Gravity-direction velocity averaged from faces to cell centers."""
    g = v.grid.domain.gravity_axis
    return kernels.avg_faces_to_cells(v.components[g], g)


def avg_adjoint_to_vertical(grid: StaggeredGrid, c: np.ndarray) -> VectorField:
    """Transpose of avg_vertical_to_cells, landing on the vertical component."""
    g = grid.domain.gravity_axis
    comps = [np.zeros(grid.comp_shape(i)) for i in range(grid.dim)]
    comps[g] = kernels.avg_adjoint_cells_to_faces(c, g)
    return VectorField(grid, comps)


def inner_cells(grid: StaggeredGrid, a: np.ndarray, b: np.ndarray) -> float:
    return grid.cell_volume * float(np.sum(a * b))


def inner_faces(grid: StaggeredGrid, u: np.ndarray, v: np.ndarray,
                weight: np.ndarray | None = None) -> float:
    """Mesh inner product on flat face vectors; optional pointwise weight."""
    w = u * v if weight is None else u * v * weight
    return grid.cell_volume * float(np.sum(w))


def h1_seminorm_sq(v: VectorField) -> float:
    """Discrete integral of |grad v|^2 via -<lap v, v>."""
    lv = lap(v)
    return -inner_faces(v.grid, lv.flat(), v.flat())


# ---------------------------------------------------------------------------
# sparse assembly
# ---------------------------------------------------------------------------

def _kron_chain(mats) -> sp.csr_matrix:
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


def _diff_block(n: int, h: float) -> sp.csr_matrix:
    """n x (n+1) face-difference block, rows are cells."""
    d = sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1))
    return (d / h).tocsr()


def _stiff_block(n: int, h: float, dirichlet_nodes: bool) -> sp.csr_matrix:
    """1D stiffness (second difference, negated).

    dirichlet_nodes: unknowns sit on interior nodes of a face line
    (size n-1, classic Dirichlet tridiagonal).  Otherwise unknowns sit at
    cell centers with ghost-reflection wall closure (3 on the end diagonal).
    """
    if dirichlet_nodes:
        m = n - 1
        main = np.full(m, 2.0)
    else:
        m = n
        main = np.full(m, 2.0)
        main[0] = 3.0
        main[-1] = 3.0
    off = -np.ones(m - 1)
    return (sp.diags([off, main, off], [-1, 0, 1]) / (h * h)).tocsr()


class GridOperators:
    """Sparse matrices and factorizations tied to one grid."""

    def __init__(self, grid: StaggeredGrid):
        self.grid = grid
        dim = grid.dim
        n = grid.cells
        h = grid.h

        self.div_blocks = []
        for i in range(dim):
            mats = [sp.identity(n[j], format="csr") for j in range(dim)]
            mats[i] = _diff_block(n[i], h[i])
            self.div_blocks.append(_kron_chain(mats))
        self.D = sp.hstack(self.div_blocks, format="csr")

        self.mask = grid.interior_mask()
        self._poisson = {}

        # -lap restricted to interior faces, per component (SPD)
        self.K_int = []
        self.int_masks = []
        for i in range(dim):
            blocks = []
            dofs = [n[j] - 1 if j == i else n[j] for j in range(dim)]
            for j in range(dim):
                mats = [sp.identity(dofs[k], format="csr") for k in range(dim)]
                mats[j] = _stiff_block(n[j], h[j], dirichlet_nodes=(j == i))
                blocks.append(_kron_chain(mats))
            self.K_int.append(sum(blocks).tocsc())
            m = np.zeros(grid.comp_shape(i), dtype=bool)
            sl = [slice(None)] * dim
            sl[i] = slice(1, -1)
            m[tuple(sl)] = True
            self.int_masks.append(m.ravel())

    # -- interior packing ---------------------------------------------------

    def pack_interior(self, flat: np.ndarray) -> list[np.ndarray]:
        offs = self.grid.comp_offsets()
        out = []
        for i, m in enumerate(self.int_masks):
            lo, sz = offs[i], self.grid.n_faces(i)
            out.append(flat[lo:lo + sz][m])
        return out

    def unpack_interior(self, parts: list[np.ndarray]) -> np.ndarray:
        offs = self.grid.comp_offsets()
        flat = np.zeros(self.grid.total_faces)
        for i, m in enumerate(self.int_masks):
            lo, sz = offs[i], self.grid.n_faces(i)
            seg = np.zeros(sz)
            seg[m] = parts[i]
            flat[lo:lo + sz] = seg
        return flat

    def lap_flat(self, flat: np.ndarray) -> np.ndarray:
        v = VectorField.from_flat(self.grid, flat)
        return lap(v).flat()

    # -- pressure solves ----------------------------------------------------

    def poisson_factor(self, beta: np.ndarray | None = None):
        """LU of the (pinned) face-weighted Poisson operator D diag(b) D^T.

        beta is a flat face vector of mobility coefficients; pinned faces
        are excluded regardless.  The one-dimensional constant nullspace is
        removed by pinning the first cell, which is exact for zero-mean
        right-hand sides.
        """
        key = None if beta is None else id(beta)
        if key in self._poisson:
            return self._poisson[key]
        b = self.mask.astype(float) if beta is None else self.mask * beta
        A = (self.D @ sp.diags(b) @ self.D.T).tolil()
        A[0, 0] += 1.0
        lu = splu(A.tocsc())
        if beta is None:
            self._poisson[key] = lu
        return lu

    def poisson_solve(self, rhs: np.ndarray, lu=None) -> np.ndarray:
        """Solve D diag(b) D^T phi = rhs for zero-mean rhs; phi zero-mean."""
        if lu is None:
            lu = self.poisson_factor()
        r = rhs - rhs.mean()
        phi = lu.solve(r.ravel())
        return phi - phi.mean()


class LerayProjector:
    """Orthogonal projection onto discretely divergence-free fields.

    With a face weight beta (e.g. 1/density) the projection is orthogonal
    in the beta^{-1}-weighted inner product; beta=None gives the plain
    L2 projection.
    """

    def __init__(self, ops: GridOperators, beta: np.ndarray | None = None):
        self.ops = ops
        self.grid = ops.grid
        self.beta = beta
        self.lu = ops.poisson_factor(beta)
        self._bmask = ops.mask.astype(float) if beta is None else ops.mask * beta

    def project_flat(self, flat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Returns (projected flat field, cell potential phi).

        The removed part is beta * grad(-phi), i.e. the input decomposes
        as output + beta * grad(q) with q = -phi.
        """
        flat = flat * self.ops.mask  # the projector acts on no-slip fields
        d = self.ops.D @ flat
        phi = self.ops.poisson_solve(d, self.lu)
        return flat - self._bmask * (self.ops.D.T @ phi), phi.reshape(self.grid.cells)

    def project(self, v: VectorField) -> VectorField:
        flat, _ = self.project_flat(v.flat())
        return VectorField.from_flat(self.grid, flat)
