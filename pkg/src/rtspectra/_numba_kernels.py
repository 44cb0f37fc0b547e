"""Numba twins of the 2D hot kernels.  Semantics match kernels.py exactly."""

import numpy as np
from numba import njit


@njit(cache=True)
def div2d(u, w, hx, hz):
    nx = u.shape[0] - 1
    nz = u.shape[1]
    out = np.empty((nx, nz))
    for ix in range(nx):
        for iz in range(nz):
            out[ix, iz] = (u[ix + 1, iz] - u[ix, iz]) / hx + (
                w[ix, iz + 1] - w[ix, iz]
            ) / hz
    return out


@njit(cache=True)
def grad2d(p, hx, hz):
    nx, nz = p.shape
    gu = np.zeros((nx + 1, nz))
    gw = np.zeros((nx, nz + 1))
    for ix in range(1, nx):
        for iz in range(nz):
            gu[ix, iz] = (p[ix, iz] - p[ix - 1, iz]) / hx
    for ix in range(nx):
        for iz in range(1, nz):
            gw[ix, iz] = (p[ix, iz] - p[ix, iz - 1]) / hz
    return gu, gw


@njit(cache=True)
def lap2d(a, normal, hx, hz):
    n0, n1 = a.shape
    out = np.zeros((n0, n1))
    hx2 = hx * hx
    hz2 = hz * hz
    for ix in range(n0):
        for iz in range(n1):
            acc = 0.0
            # axis 0
            if normal == 0:
                if 0 < ix < n0 - 1:
                    acc += (a[ix - 1, iz] - 2.0 * a[ix, iz] + a[ix + 1, iz]) / hx2
            else:
                if ix == 0:
                    acc += (a[1, iz] - 3.0 * a[0, iz]) / hx2
                elif ix == n0 - 1:
                    acc += (a[n0 - 2, iz] - 3.0 * a[n0 - 1, iz]) / hx2
                else:
                    acc += (a[ix - 1, iz] - 2.0 * a[ix, iz] + a[ix + 1, iz]) / hx2
            # axis 1
            if normal == 1:
                if 0 < iz < n1 - 1:
                    acc += (a[ix, iz - 1] - 2.0 * a[ix, iz] + a[ix, iz + 1]) / hz2
            else:
                if iz == 0:
                    acc += (a[ix, 1] - 3.0 * a[ix, 0]) / hz2
                elif iz == n1 - 1:
                    acc += (a[ix, n1 - 2] - 3.0 * a[ix, n1 - 1]) / hz2
                else:
                    acc += (a[ix, iz - 1] - 2.0 * a[ix, iz] + a[ix, iz + 1]) / hz2
            out[ix, iz] = acc
    if normal == 0:
        for iz in range(n1):
            out[0, iz] = 0.0
            out[n0 - 1, iz] = 0.0
    else:
        for ix in range(n0):
            out[ix, 0] = 0.0
            out[ix, n1 - 1] = 0.0
    return out


@njit(cache=True)
def donor2d(rho, u, w, hx, hz, dt):
    nx, nz = rho.shape
    out = rho.copy()
    for ix in range(1, nx):
        for iz in range(nz):
            vel = u[ix, iz]
            up = rho[ix - 1, iz] if vel > 0.0 else rho[ix, iz]
            f = vel * up * dt / hx
            out[ix - 1, iz] -= f
            out[ix, iz] += f
    for ix in range(nx):
        for iz in range(1, nz):
            vel = w[ix, iz]
            up = rho[ix, iz - 1] if vel > 0.0 else rho[ix, iz]
            f = vel * up * dt / hz
            out[ix, iz - 1] -= f
            out[ix, iz] += f
    return out


@njit(cache=True)
def advect2d(u, w, comp, hx, hz):
    if comp == 0:
        n0, n1 = u.shape  # (nx+1, nz)
        out = np.zeros((n0, n1))
        for ix in range(1, n0 - 1):
            for iz in range(n1):
                vel = u[ix, iz]
                if vel > 0.0:
                    d = (u[ix, iz] - u[ix - 1, iz]) / hx
                else:
                    d = (u[ix + 1, iz] - u[ix, iz]) / hx
                acc = vel * d
                # cross velocity: w averaged to u faces
                wl = 0.5 * (w[ix - 1, iz] + w[ix - 1, iz + 1])
                wr = 0.5 * (w[ix, iz] + w[ix, iz + 1])
                vel2 = 0.5 * (wl + wr)
                um = -u[ix, iz] if iz == 0 else u[ix, iz - 1]
                up = -u[ix, iz] if iz == n1 - 1 else u[ix, iz + 1]
                if vel2 > 0.0:
                    d2 = (u[ix, iz] - um) / hz
                else:
                    d2 = (up - u[ix, iz]) / hz
                acc += vel2 * d2
                out[ix, iz] = acc
        return out
    else:
        n0, n1 = w.shape  # (nx, nz+1)
        out = np.zeros((n0, n1))
        for ix in range(n0):
            for iz in range(1, n1 - 1):
                vel = w[ix, iz]
                if vel > 0.0:
                    d = (w[ix, iz] - w[ix, iz - 1]) / hz
                else:
                    d = (w[ix, iz + 1] - w[ix, iz]) / hz
                acc = vel * d
                ul = 0.5 * (u[ix, iz - 1] + u[ix, iz])
                ur = 0.5 * (u[ix + 1, iz - 1] + u[ix + 1, iz])
                vel2 = 0.5 * (ul + ur)
                wm = -w[ix, iz] if ix == 0 else w[ix - 1, iz]
                wp = -w[ix, iz] if ix == n0 - 1 else w[ix + 1, iz]
                if vel2 > 0.0:
                    d2 = (w[ix, iz] - wm) / hx
                else:
                    d2 = (wp - w[ix, iz]) / hx
                acc += vel2 * d2
                out[ix, iz] = acc
        return out
