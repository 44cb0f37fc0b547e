"""Independent dense reference for the constrained quadratic-form maximum.

Everything here is rebuilt from first principles with dense linear algebra
and deliberately shares no code with the package: staggered-face bookkeeping
is done with explicit index maps, the divergence-free constraint is removed
with a null-space basis from scipy, and the maximization is an exact dense
symmetric generalized eigensolve. The only shared inputs are the grid sizes
and the density profile callables.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh, null_space


class DenseMac2D:
    """Dense MAC operators on an nx-by-nz unit-spacing-agnostic box.

    Faces of component 0 sit at (i*hx, (k+1/2)*hz) for i in 0..nx,
    faces of component 1 at ((i+1/2)*hx, k*hz). Normal boundary faces are
    pinned to zero (no-slip walls).
    """

    def __init__(self, nx: int, nz: int, lx: float = 1.0, lz: float = 1.0):
        self.nx, self.nz = nx, nz
        self.hx, self.hz = lx / nx, lz / nz
        self.n0 = (nx + 1) * nz
        self.n1 = nx * (nz + 1)
        self.nf = self.n0 + self.n1
        self.nc = nx * nz
        self.vol = self.hx * self.hz
        self._build()

    def idx0(self, i, k):
        return i * self.nz + k

    def idx1(self, i, k):
        return self.n0 + i * (self.nz + 1) + k

    def idxc(self, i, k):
        return i * self.nz + k

    def _build(self):
        nx, nz, hx, hz = self.nx, self.nz, self.hx, self.hz
        D = np.zeros((self.nc, self.nf))
        for i in range(nx):
            for k in range(nz):
                c = self.idxc(i, k)
                D[c, self.idx0(i + 1, k)] += 1.0 / hx
                D[c, self.idx0(i, k)] -= 1.0 / hx
                D[c, self.idx1(i, k + 1)] += 1.0 / hz
                D[c, self.idx1(i, k)] -= 1.0 / hz
        self.D = D

        mask = np.ones(self.nf)
        for k in range(nz):
            mask[self.idx0(0, k)] = 0.0
            mask[self.idx0(nx, k)] = 0.0
        for i in range(nx):
            mask[self.idx1(i, 0)] = 0.0
            mask[self.idx1(i, nz)] = 0.0
        self.mask = mask

        # vector Laplacian, one block per component; normal-direction rows
        # for pinned faces stay zero, tangential walls close with a ghost
        # reflection u_ghost = -u_edge.
        L = np.zeros((self.nf, self.nf))
        for i in range(1, nx):
            for k in range(nz):
                r = self.idx0(i, k)
                L[r, self.idx0(i - 1, k)] += 1.0 / hx ** 2
                L[r, self.idx0(i + 1, k)] += 1.0 / hx ** 2
                L[r, r] -= 2.0 / hx ** 2
                L[r, r] -= 2.0 / hz ** 2
                if k > 0:
                    L[r, self.idx0(i, k - 1)] += 1.0 / hz ** 2
                else:
                    L[r, r] -= 1.0 / hz ** 2
                if k < nz - 1:
                    L[r, self.idx0(i, k + 1)] += 1.0 / hz ** 2
                else:
                    L[r, r] -= 1.0 / hz ** 2
        for i in range(nx):
            for k in range(1, nz):
                r = self.idx1(i, k)
                L[r, self.idx1(i, k - 1)] += 1.0 / hz ** 2
                L[r, self.idx1(i, k + 1)] += 1.0 / hz ** 2
                L[r, r] -= 2.0 / hz ** 2
                L[r, r] -= 2.0 / hx ** 2
                if i > 0:
                    L[r, self.idx1(i - 1, k)] += 1.0 / hx ** 2
                else:
                    L[r, r] -= 1.0 / hx ** 2
                if i < nx - 1:
                    L[r, self.idx1(i + 1, k)] += 1.0 / hx ** 2
                else:
                    L[r, r] -= 1.0 / hx ** 2
        self.L = L

        # averaging of the vertical component onto cell centers
        Av = np.zeros((self.nc, self.nf))
        for i in range(nx):
            for k in range(nz):
                c = self.idxc(i, k)
                Av[c, self.idx1(i, k)] += 0.5
                Av[c, self.idx1(i, k + 1)] += 0.5
        self.Av = Av

    def constraint_basis(self):
        """Orthonormal basis of {v : D v = 0, pinned entries = 0}."""
        free = np.where(self.mask > 0)[0]
        Dfree = self.D[:, free]
        Z = null_space(Dfree)
        B = np.zeros((self.nf, Z.shape[1]))
        B[free, :] = Z
        return B

    def pencil(self, profile, mu, g, s):
        """Dense (A, M) for the modified quadratic form at viscosity weight s.

        A v = g * Av^T diag(rhobar'_cells) Av v + s*mu*L v restricted to the
        constraint space; M v = diag(rhobar_faces) v. rhobar on vertical
        faces is the mean of the two adjacent cell values so that the form
        matches cell-centered quadrature exactly.
        """
        nx, nz, hz = self.nx, self.nz, self.hz
        zc = (np.arange(nz) + 0.5) * hz
        drho_c = profile.drho(zc)
        rho_c = profile.rho(zc)
        W = np.repeat(drho_c[None, :], nx, axis=0).reshape(-1)
        A = g * self.Av.T @ np.diag(W) @ self.Av + s * mu * self.L
        rho_f = np.zeros(self.nf)
        zf0 = (np.arange(nz) + 0.5) * hz
        for i in range(nx + 1):
            for k in range(nz):
                rho_f[self.idx0(i, k)] = profile.rho(zf0[k])
        rho_ext = profile.rho(np.concatenate(([zc[0]], zc, [zc[-1]])))
        rho_vert = 0.5 * (rho_ext[:-1] + rho_ext[1:])
        rho_vert[0] = rho_c[0]
        rho_vert[-1] = rho_c[-1]
        for i in range(nx):
            for k in range(nz + 1):
                rho_f[self.idx1(i, k)] = rho_vert[k]
        M = np.diag(rho_f)
        return A, M

    def alpha(self, profile, mu, g, s):
        """Exact maximum of <A v, v>/<M v, v> over the constraint space."""
        A, M = self.pencil(profile, mu, g, s)
        B = self.constraint_basis()
        Ar = B.T @ A @ B
        Mr = B.T @ M @ B
        vals = eigh(Ar, Mr, eigvals_only=True)
        return float(vals[-1])


def dense_lambda(mac: DenseMac2D, profile, mu: float, g: float,
                 s_hi: float, n_points: int = 10000) -> float:
    """Fixed point of s = sqrt(alpha(s)) by brute tabulation plus refinement.

    Tabulates phi(s) = s^2 - alpha(s) on a coarse grid to find the sign
    change, then bisects the bracketing interval with fresh dense solves.
    """
    ss = np.linspace(0.0, s_hi, n_points // 100 + 2)
    prev = 0.0 - mac.alpha(profile, mu, g, 0.0)
    if prev >= 0:
        raise ValueError("no instability at s=0")
    lo, hi = None, None
    for s in ss[1:]:
        cur = s * s - mac.alpha(profile, mu, g, s)
        if cur >= 0:
            lo, hi = s - (ss[1] - ss[0]), s
            break
        prev = cur
    if lo is None:
        raise ValueError("no sign change found; raise s_hi")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mid * mid - mac.alpha(profile, mu, g, mid) >= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)
