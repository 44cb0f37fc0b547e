"""Stencil kernels on raw MAC arrays.

Dimension-generic numpy implementations are the reference; 2D hot paths
have numba twins in `_numba_kernels`.  Selection is controlled by the
environment variable RTSPECTRA_BACKEND in {"auto", "numba", "numpy"}
(default "auto": numba when importable and the grid is 2D).
"""

from __future__ import annotations

import os

import numpy as np

_BACKEND = None


def backend() -> str:
    """Resolved kernel backend, "numba" or "numpy"."""
    global _BACKEND
    if _BACKEND is None:
        want = os.environ.get("RTSPECTRA_BACKEND", "auto").lower()
        if want not in ("auto", "numba", "numpy"):
            raise ValueError(f"RTSPECTRA_BACKEND={want!r} not in auto|numba|numpy")
        if want == "numpy":
            _BACKEND = "numpy"
        else:
            try:
                from . import _numba_kernels  # noqa: F401

                _BACKEND = "numba"
            except ImportError:
                if want == "numba":
                    raise
                _BACKEND = "numpy"
    return _BACKEND


def _use_numba(arrs) -> bool:
    return backend() == "numba" and arrs[0].ndim == 2


def _sl(dim: int, axis: int, s) -> tuple:
    idx = [slice(None)] * dim
    idx[axis] = s
    return tuple(idx)


# ---------------------------------------------------------------------------
# first-order operators
# ---------------------------------------------------------------------------

def divergence(comps: list[np.ndarray], h) -> np.ndarray:
    if _use_numba(comps):
        from ._numba_kernels import div2d

        return div2d(comps[0], comps[1], h[0], h[1])
    out = np.diff(comps[0], axis=0) / h[0]
    for i in range(1, len(comps)):
        out += np.diff(comps[i], axis=i) / h[i]
    return out


def gradient(p: np.ndarray, h) -> list[np.ndarray]:
    """Face-centered differences; boundary-normal faces get 0."""
    if backend() == "numba" and p.ndim == 2:
        from ._numba_kernels import grad2d

        return list(grad2d(p, h[0], h[1]))
    dim = p.ndim
    comps = []
    for i in range(dim):
        shape = list(p.shape)
        shape[i] += 1
        c = np.zeros(shape)
        c[_sl(dim, i, slice(1, -1))] = np.diff(p, axis=i) / h[i]
        comps.append(c)
    return comps


def laplacian_comp(a: np.ndarray, normal: int, h) -> np.ndarray:
    """Componentwise Laplacian with no-slip closure.

    Along the normal axis the boundary faces are Dirichlet unknowns
    (output pinned to 0); tangential walls use linear ghost reflection
    (ghost = -first interior value).
    """
    if _use_numba([a]):
        from ._numba_kernels import lap2d

        return lap2d(a, normal, h[0], h[1])
    dim = a.ndim
    out = np.zeros_like(a)
    for j in range(dim):
        hj2 = h[j] * h[j]
        if j == normal:
            lo = _sl(dim, j, slice(0, -2))
            mid = _sl(dim, j, slice(1, -1))
            hi = _sl(dim, j, slice(2, None))
            out[mid] += (a[lo] - 2.0 * a[mid] + a[hi]) / hj2
        else:
            t = np.empty_like(a)
            lo = _sl(dim, j, slice(0, -2))
            mid = _sl(dim, j, slice(1, -1))
            hi = _sl(dim, j, slice(2, None))
            t[mid] = a[lo] - 2.0 * a[mid] + a[hi]
            t[_sl(dim, j, 0)] = a[_sl(dim, j, 1)] - 3.0 * a[_sl(dim, j, 0)]
            t[_sl(dim, j, -1)] = a[_sl(dim, j, -2)] - 3.0 * a[_sl(dim, j, -1)]
            out += t / hj2
    out[_sl(dim, normal, 0)] = 0.0
    out[_sl(dim, normal, -1)] = 0.0
    return out


def laplacian(comps: list[np.ndarray], h) -> list[np.ndarray]:
    return [laplacian_comp(c, i, h) for i, c in enumerate(comps)]


# ---------------------------------------------------------------------------
# staggering transfers
# ---------------------------------------------------------------------------

def avg_faces_to_cells(a: np.ndarray, axis: int) -> np.ndarray:
    dim = a.ndim
    return 0.5 * (a[_sl(dim, axis, slice(0, -1))] + a[_sl(dim, axis, slice(1, None))])


def avg_adjoint_cells_to_faces(c: np.ndarray, axis: int) -> np.ndarray:
    """Exact transpose of avg_faces_to_cells (half values at boundary faces)."""
    dim = c.ndim
    shape = list(c.shape)
    shape[axis] += 1
    out = np.zeros(shape)
    out[_sl(dim, axis, slice(1, -1))] = 0.5 * (
        c[_sl(dim, axis, slice(0, -1))] + c[_sl(dim, axis, slice(1, None))]
    )
    out[_sl(dim, axis, 0)] = 0.5 * c[_sl(dim, axis, 0)]
    out[_sl(dim, axis, -1)] = 0.5 * c[_sl(dim, axis, -1)]
    return out


def cells_to_faces_mean(c: np.ndarray, axis: int) -> np.ndarray:
    """Coefficient averaging: interior faces mean of neighbors, boundary copies."""
    dim = c.ndim
    shape = list(c.shape)
    shape[axis] += 1
    out = np.empty(shape)
    out[_sl(dim, axis, slice(1, -1))] = 0.5 * (
        c[_sl(dim, axis, slice(0, -1))] + c[_sl(dim, axis, slice(1, None))]
    )
    out[_sl(dim, axis, 0)] = c[_sl(dim, axis, 0)]
    out[_sl(dim, axis, -1)] = c[_sl(dim, axis, -1)]
    return out


# ---------------------------------------------------------------------------
# advection
# ---------------------------------------------------------------------------

def donor_cell_update(rho: np.ndarray, comps: list[np.ndarray], h, dt: float) -> np.ndarray:
    """One donor-cell (upwind) advection step of a cell scalar.

    Face velocities must be discretely divergence-free for the max
    principle; pinned boundary faces carry zero flux.
    """
    if _use_numba([rho]):
        from ._numba_kernels import donor2d

        return donor2d(rho, comps[0], comps[1], h[0], h[1], dt)
    dim = rho.ndim
    out = rho.copy()
    for i in range(dim):
        u = comps[i][_sl(dim, i, slice(1, -1))]
        up = np.where(u > 0.0, rho[_sl(dim, i, slice(0, -1))], rho[_sl(dim, i, slice(1, None))])
        flux = np.zeros(comps[i].shape)
        flux[_sl(dim, i, slice(1, -1))] = u * up
        out -= dt * np.diff(flux, axis=i) / h[i]
    return out


def advect_velocity_comp(comps: list[np.ndarray], i: int, h) -> np.ndarray:
    """Upwind evaluation of (u . grad) u_i at the faces of component i."""
    if _use_numba(comps):
        from ._numba_kernels import advect2d

        return advect2d(comps[0], comps[1], i, h[0], h[1])
    dim = len(comps)
    ui = comps[i]
    adv = np.zeros_like(ui)
    for j in range(dim):
        if j == i:
            vel = ui
            dm = np.zeros_like(ui)
            dp = np.zeros_like(ui)
            lo = _sl(dim, j, slice(0, -2))
            mid = _sl(dim, j, slice(1, -1))
            hi = _sl(dim, j, slice(2, None))
            dm[mid] = (ui[mid] - ui[lo]) / h[j]
            dp[mid] = (ui[hi] - ui[mid]) / h[j]
        else:
            aj = avg_faces_to_cells(comps[j], j)
            vel = cells_to_faces_mean(aj, i)
            # ghost reflection across tangential walls: ghost = -edge
            gneg = -ui[_sl(dim, j, slice(0, 1))]
            gpos = -ui[_sl(dim, j, slice(-1, None))]
            gp = np.concatenate([gneg, ui, gpos], axis=j)
            nj = ui.shape[j]
            dm = (ui - gp[_sl(dim, j, slice(0, nj))]) / h[j]
            dp = (gp[_sl(dim, j, slice(2, None))] - ui) / h[j]
        adv += vel * np.where(vel > 0.0, dm, dp)
    adv[_sl(dim, i, 0)] = 0.0
    adv[_sl(dim, i, -1)] = 0.0
    return adv
