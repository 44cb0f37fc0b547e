"""Projected block eigensolver for symmetric pencils A v = theta M v.

The pencil is only symmetric on a constraint subspace (discretely
divergence-free fields), so the solver re-applies the supplied projector
every iteration: to start vectors, preconditioned residuals, and the
updated block.  Locally optimal block preconditioned CG recurrence with a
three-term search space [X, W, P] and Rayleigh-Ritz on an M-orthonormal
basis.  Start vectors come from a fixed linear congruential stream so
runs are reproducible for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh


class EigenError(RuntimeError):
    pass


_LCG_A = 6364136223846793005
_LCG_C = 1442695040888963407
_LCG_MASK = (1 << 64) - 1


def lcg_stream(seed: int, count: int) -> np.ndarray:
    """Deterministic uniform(-0.5, 0.5) draws from a 64-bit LCG."""
    state = (int(seed) * _LCG_A + _LCG_C) & _LCG_MASK
    out = np.empty(count)
    for i in range(count):
        state = (state * _LCG_A + _LCG_C) & _LCG_MASK
        out[i] = (state >> 11) / float(1 << 53) - 0.5
    return out


@dataclass
class EigenResult:
    value: float
    vector: np.ndarray          # M-normalized (vector^T M vector = 1)
    residual: float
    iterations: int
    converged: bool
    block_values: np.ndarray


def _colapply(op: Callable, V: np.ndarray) -> np.ndarray:
    return np.column_stack([op(V[:, j]) for j in range(V.shape[1])])


def _ortho_m(V, MV, against=None, against_m=None):
    """M-orthonormalize columns of V, optionally against an M-orthonormal
    block first; drops nearly dependent columns.  Returns (V, MV)."""
    for _ in range(2):
        if against is not None and against.shape[1]:
            coef = against_m.T @ V
            V = V - against @ coef
            MV = MV - against_m @ coef
        G = V.T @ MV
        G = 0.5 * (G + G.T)
        w, U = eigh(G)
        keep = w > max(w.max(), 0.0) * 1e-12
        if not np.any(keep):
            return V[:, :0], MV[:, :0]
        T = U[:, keep] / np.sqrt(w[keep])
        V = V @ T
        MV = MV @ T
    return V, MV


def projected_lobpcg(
    op_a: Callable[[np.ndarray], np.ndarray],
    op_m: Callable[[np.ndarray], np.ndarray],
    project: Callable[[np.ndarray], np.ndarray],
    n: int,
    *,
    block: int = 2,
    x0: np.ndarray | None = None,
    seed: int = 0,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-9,
    maxiter: int = 1000,
) -> EigenResult:
    """Largest eigenpair of A v = theta M v restricted to range(project).

    Converged when the leading residual ||A x - theta M x|| drops below
    tol * max(1, |theta|).
    """
    m = block
    X = np.empty((n, m))
    j0 = 0
    if x0 is not None:
        x0 = np.atleast_2d(x0.T).T if x0.ndim == 1 else x0
        j0 = min(m, x0.shape[1])
        X[:, :j0] = x0[:, :j0]
    for j in range(j0, m):
        X[:, j] = lcg_stream(seed + 1013 * j + 1, n)
    X = _colapply(project, X)
    X, MX = _ortho_m(X, _colapply(op_m, X))
    if X.shape[1] == 0:
        raise EigenError("start block lies in the projector's null space")

    P = np.empty((n, 0))
    MP = np.empty((n, 0))
    theta = np.zeros(m)
    res = np.inf
    for it in range(1, maxiter + 1):
        AX = _colapply(op_a, X)
        H = X.T @ AX
        H = 0.5 * (H + H.T)
        tv, Y = eigh(H)
        order = np.argsort(tv)[::-1]
        k = min(m, X.shape[1])
        tv, Y = tv[order[:k]], Y[:, order[:k]]
        X, AX, MX = X @ Y, AX @ Y, MX @ Y
        theta = tv
        R = AX - MX * tv
        res = float(np.linalg.norm(R[:, 0]))
        if res <= tol * max(1.0, abs(theta[0])):
            return EigenResult(float(theta[0]), X[:, 0], res, it, True, theta.copy())

        W = R if precond is None else _colapply(precond, R)
        W = _colapply(project, W)
        W, MW = _ortho_m(W, _colapply(op_m, W), against=X, against_m=MX)
        blocks = [X, W]
        mblocks = [MX, MW]
        if P.shape[1]:
            XW = np.hstack([X, W])
            MXW = np.hstack([MX, MW])
            Pn, MPn = _ortho_m(P, MP, against=XW, against_m=MXW)
            if Pn.shape[1]:
                blocks.append(Pn)
                mblocks.append(MPn)
        B = np.hstack(blocks)
        MB = np.hstack(mblocks)
        AB = _colapply(op_a, B)
        Hb = B.T @ AB
        Hb = 0.5 * (Hb + Hb.T)
        tvb, Yb = eigh(Hb)
        order = np.argsort(tvb)[::-1]
        k = min(m, B.shape[1])
        Yt = Yb[:, order[:k]]
        Xn = B @ Yt
        nx = X.shape[1]
        P = B[:, nx:] @ Yt[nx:, :]
        MP = MB[:, nx:] @ Yt[nx:, :]
        X = _colapply(project, Xn)
        X, MX = _ortho_m(X, _colapply(op_m, X))
        if X.shape[1] == 0:
            raise EigenError("iteration block collapsed into the null space")

    return EigenResult(float(theta[0]), X[:, 0], res, maxiter, False, theta.copy())
