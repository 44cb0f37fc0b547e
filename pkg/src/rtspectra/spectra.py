"""Variational spectra for the stratified flow problem.

The central object is the constrained Rayleigh quotient

    alpha(s) = max { g I[rho' (Av3)^2] - s mu I[|grad v|^2] : I[rho |v|^2] = 1 }

over discretely divergence-free no-slip fields, where I[.] is the mesh
quadrature and A averages the vertical velocity from faces to cell
centers.  Buoyancy is integrated cellwise through that average so the
velocity pencil and the coupled density-velocity pencil below share
their spectrum exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .core import ScalarField, StaggeredGrid, VectorField
from .eigen import EigenResult, projected_lobpcg
from .operators import (GridOperators, LerayProjector, h1_seminorm_sq,
                        inner_cells, inner_faces)
from .profiles import (UNIFORMLY_UNSTABLE, DensityProfile, ProfileError,
                       drho_cells, rho_cells, rho_faces_flat)


@dataclass(frozen=True)
class PhysicalParams:
    mu: float
    g: float

    def __post_init__(self):
        if self.mu <= 0 or self.g <= 0:
            raise ValueError("viscosity mu and gravity g must be positive")


@dataclass
class EnergyBreakdown:
    buoyancy: float       # g * integral of rho' (avg v3)^2
    dissipation: float    # mu * integral of |grad v|^2
    j_norm: float         # integral of rho |v|^2

    def value(self, s: float) -> float:
        return self.buoyancy - s * self.dissipation


@dataclass
class EigenSolution:
    v: VectorField
    alpha: float
    s: float
    residual: float
    iterations: int
    converged: bool
    seed: int
    rho: ScalarField | None = None


def energy_E(v: VectorField, s: float, profile: DensityProfile,
             params: PhysicalParams) -> EnergyBreakdown:
    grid = v.grid
    av3 = kernels.avg_faces_to_cells(v.vertical, grid.gravity_axis)
    buoy = params.g * inner_cells(grid, drho_cells(grid, profile), av3 * av3)
    diss = params.mu * h1_seminorm_sq(v)
    j = inner_faces(grid, v.flat(), v.flat(), weight=rho_faces_flat(grid, profile))
    return EnergyBreakdown(buoy, diss, j)


# ---------------------------------------------------------------------------
# assembled context shared by the eigensolves
# ---------------------------------------------------------------------------

class SpectralContext:
    """Grid operators plus profile samples, reused across s values."""

    def __init__(self, grid: StaggeredGrid, profile: DensityProfile,
                 params: PhysicalParams):
        self.grid = grid
        self.profile = profile
        self.params = params
        self.ops = GridOperators(grid)
        self.proj = LerayProjector(self.ops)
        self.rho_c = rho_cells(grid, profile)
        self.drho_c = drho_cells(grid, profile)
        self.rho_f = rho_faces_flat(grid, profile)
        self.gaxis = grid.gravity_axis
        self._offs = grid.comp_offsets()
        self._precond_cache = {}

    # buoyancy operator: vertical faces -> cells -> vertical faces
    def avg_v3(self, flat: np.ndarray) -> np.ndarray:
        g = self.gaxis
        lo, hi = self._offs[g], self._offs[g + 1]
        return kernels.avg_faces_to_cells(
            flat[lo:hi].reshape(self.grid.comp_shape(g)), g)

    def buoyancy_flat(self, c: np.ndarray) -> np.ndarray:
        """Adjoint of avg_v3 landing on non-pinned vertical faces."""
        g = self.gaxis
        out = np.zeros(self.grid.total_faces)
        lo, hi = self._offs[g], self._offs[g + 1]
        adj = kernels.avg_adjoint_cells_to_faces(c, g)
        sl = [slice(None)] * self.grid.dim
        sl[g] = 0
        adj[tuple(sl)] = 0.0
        sl[g] = -1
        adj[tuple(sl)] = 0.0
        out[lo:hi] = adj.ravel()
        return out

    def op_a(self, s: float):
        mu, g = self.params.mu, self.params.g

        def apply(x):
            y = g * self.buoyancy_flat(self.drho_c * self.avg_v3(x))
            y += s * mu * self.ops.lap_flat(x)
            out, _ = self.proj.project_flat(y)
            return out

        return apply

    def op_m(self):
        def apply(x):
            out, _ = self.proj.project_flat(self.rho_f * x)
            return out

        return apply

    def project(self, x):
        out, _ = self.proj.project_flat(x)
        return out

    def precond(self, s: float):
        """Factorized shifted viscous operator per velocity component."""
        key = round(float(s), 14)
        if key not in self._precond_cache:
            sigma = self.params.g * max(float(np.max(np.abs(self.drho_c))), 1e-8)
            rho_int = np.concatenate(self.ops.pack_interior(self.rho_f))
            K = sp.block_diag(self.ops.K_int, format="csc")
            lu = splu((sigma * sp.diags(rho_int) + s * self.params.mu * K).tocsc())
            self._precond_cache[key] = lu
        lu = self._precond_cache[key]

        def apply(r):
            parts = self.ops.pack_interior(r)
            sizes = [p.size for p in parts]
            sol = lu.solve(np.concatenate(parts))
            out, at = [], 0
            for sz in sizes:
                out.append(sol[at:at + sz])
                at += sz
            return self.ops.unpack_interior(out)

        return apply


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    return -vec if vec[k] < 0 else vec


def alpha(s: float, ctx: SpectralContext, *, seed: int = 0,
          tol: float = 1e-10, x0: np.ndarray | None = None,
          maxiter: int = 2000) -> tuple[float, EigenSolution]:
    """Largest constrained Rayleigh-quotient value alpha(s) and maximizer.

    The maximizer is returned with unit weighted mass I[rho |v|^2] = 1 and
    a deterministic sign.
    """
    grid = ctx.grid
    res = projected_lobpcg(
        ctx.op_a(s), ctx.op_m(), ctx.project, grid.total_faces,
        block=2, seed=seed, x0=x0, precond=ctx.precond(s),
        tol=tol, maxiter=maxiter)
    vec = _fix_sign(res.vector) / np.sqrt(grid.cell_volume)
    v = VectorField.from_flat(grid, vec)
    sol = EigenSolution(v, float(res.value), s, res.residual,
                        res.iterations, res.converged, seed)
    return float(res.value), sol


def upper_bound(ctx: SpectralContext) -> float:
    """alpha(s) <= g * sup(rho'/rho) for every s >= 0."""
    return ctx.params.g * float(np.max(ctx.drho_c / ctx.rho_c))


# ---------------------------------------------------------------------------
# explicit test field on a ball where rho' > 0
# ---------------------------------------------------------------------------

def _bump_f(r: np.ndarray, a: float) -> np.ndarray:
    """Odd C^1 bump, f(r) = r (a - r^2)^2 inside r^2 < a, 0 outside."""
    r = np.asarray(r, dtype=float)
    inside = r * r < a
    return np.where(inside, r * (a - r * r) ** 2, 0.0)


def _bump_F(r: np.ndarray, a: float) -> np.ndarray:
    """Compactly supported antiderivative of _bump_f: -(a - r^2)^3 / 6
    inside the support and identically zero outside, so that products of
    these factors stay localized in every direction."""
    r = np.asarray(r, dtype=float)
    q = np.clip(a - r * r, 0.0, None)
    return -q ** 3 / 6.0


def _unstable_interval(profile: DensityProfile, height: float) -> tuple[float, float]:
    x = np.linspace(0.0, height, 8193)
    pos = np.asarray(profile.drho(x)) > 0.0
    if not np.any(pos):
        raise ProfileError("no positive density-gradient region: profile is not "
                           "unstably stratified")
    best, cur = (0, -1), None
    for i, p in enumerate(pos):
        if p and cur is None:
            cur = i
        if (not p or i == len(pos) - 1) and cur is not None:
            j = i if p else i - 1
            if j - cur > best[1] - best[0]:
                best = (cur, j)
            cur = None
    return float(x[best[0]]), float(x[best[1]])


@dataclass
class BumpCertificate:
    c3: float
    c4: float
    v: VectorField
    center: tuple[float, ...]
    delta: float


def bump_certificate(profile: DensityProfile, params: PhysicalParams,
                     grid: StaggeredGrid) -> BumpCertificate:
    """Explicit divergence-free field supported where rho' > 0.

    Its Rayleigh quotient gives the certified lower bound
    alpha(s) >= c3 - c4 * s, with c3 > 0 for unstably stratified profiles.
    In 2D the field is a discrete curl of a nodal stream function, so its
    discrete divergence vanishes identically; in 3D the analytic field is
    sampled and projected.
    """
    g = grid.gravity_axis
    L = grid.domain.lengths
    lo, hi = _unstable_interval(profile, L[g])
    width = hi - lo
    delta = 4.0 * min(min(Lj / 2.0 for Lj in L), width / 2.0) * 0.98
    center = [Lj / 2.0 for Lj in L]
    center[g] = 0.5 * (lo + hi)
    a = delta * delta / 16.0

    if grid.dim == 2:
        # nodal stream function, exact discrete curl
        hx = g ^ 1  # the horizontal axis
        ax0 = grid.face_coords(0) - center[0]
        ax1 = grid.face_coords(1) - center[1]
        psi = np.outer(_bump_F(ax0, a), _bump_F(ax1, a))
        comps = [np.zeros(grid.comp_shape(i)) for i in range(2)]
        comps[hx] = np.diff(psi, axis=g) / grid.h[g] * (1 if hx == 0 else -1)
        comps[g] = -np.diff(psi, axis=hx) / grid.h[hx] * (1 if hx == 0 else -1)
        v = VectorField(grid, comps)
    else:
        axes = [j for j in range(3) if j != g]
        t, u = axes
        coords = {}
        for i in range(3):
            coords[i] = [grid.face_coords(j) - center[j] if j == i
                         else grid.cell_coords(j) - center[j] for j in range(3)]

        def sample(i, fn_by_axis):
            xs = np.meshgrid(*coords[i], indexing="ij")
            out = np.ones(grid.comp_shape(i))
            for j in range(3):
                out *= fn_by_axis[j](xs[j])
            return out

        fa = lambda r: _bump_f(r, a)
        Fa = lambda r: _bump_F(r, a)
        comps = [np.zeros(grid.comp_shape(i)) for i in range(3)]
        comps[u] = -sample(u, {t: fa, u: Fa, g: fa})
        comps[g] = sample(g, {t: fa, u: fa, g: Fa})
        v = VectorField(grid, comps)
        v.zero_normal_boundary()
        ops = GridOperators(grid)
        v = LerayProjector(ops).project(v)

    e = energy_E(v, 0.0, profile, params)
    if e.j_norm <= 0:
        raise ProfileError("degenerate test field: unstable region unresolved "
                           "on this grid")
    c3 = e.buoyancy / e.j_norm
    c4 = e.dissipation / e.j_norm
    return BumpCertificate(c3, c4, v, tuple(center), delta)


def s_upper_bracket(ctx: SpectralContext, *, seed: int = 0,
                    tol: float = 1e-10) -> tuple[float, list]:
    """Smallest power-of-two multiple of the analytic scale with
    alpha(s_hat) <= 0; returns (s_hat, [(s, alpha(s)) history])."""
    history = []
    a0, _ = alpha(0.0, ctx, seed=seed, tol=tol)
    history.append((0.0, a0))
    if a0 <= 0.0:
        return 0.0, history
    s_hat = max(1.0, upper_bound(ctx))
    for _ in range(60):
        a_s, _ = alpha(s_hat, ctx, seed=seed, tol=tol)
        history.append((s_hat, a_s))
        if a_s <= 0.0:
            return s_hat, history
        s_hat *= 2.0
    raise RuntimeError("could not bracket alpha(s) <= 0; growth appears unbounded")


# ---------------------------------------------------------------------------
# coupled density-velocity pencil
# ---------------------------------------------------------------------------

def energy_EN(rho: ScalarField, v: VectorField, profile: DensityProfile,
              params: PhysicalParams) -> tuple[float, float]:
    """Quadratic forms (E_N, J_N) of the coupled pencil.

    E_N = -2 I[rho (avg v3)] - (mu/g) I[|grad v|^2]
    J_N = I[rho^2 / rho'] + (1/g) I[rhobar |v|^2]

    J_N is positive definite only when rho' > 0 everywhere, which is
    required.
    """
    grid = v.grid
    cls = profile.classify(grid.domain.lengths[grid.gravity_axis])
    if cls != UNIFORMLY_UNSTABLE:
        raise ProfileError("coupled quadratic form needs rho' > 0 everywhere; "
                           f"profile is {cls}")
    dr = drho_cells(grid, profile)
    av3 = kernels.avg_faces_to_cells(v.vertical, grid.gravity_axis)
    en = (-2.0 * inner_cells(grid, rho.values, av3)
          - (params.mu / params.g) * h1_seminorm_sq(v))
    jn = (inner_cells(grid, rho.values, rho.values / dr)
          + inner_faces(grid, v.flat(), v.flat(),
                        weight=rho_faces_flat(grid, profile)) / params.g)
    return en, jn


def lambda_N(ctx: SpectralContext, *, seed: int = 0, tol: float = 1e-10,
             maxiter: int = 2000) -> tuple[float, EigenSolution]:
    """Largest eigenvalue of the coupled density-velocity pencil.

    Composite unknown z = (rho at cells, v at faces); the pencil reads

        A_N z = Lambda M_N z,
        A_N z = (-avg v3,  P((mu/g) lap v - adj(rho) e3)),
        M_N z = (rho / rho',  (1/g) rhobar v),

    which is the first-order eigenvalue form of the coupled linearized
    system; its top eigenvalue coincides with the fixed point of
    s -> sqrt(alpha(s)).
    """
    grid = ctx.grid
    cls = ctx.profile.classify(grid.domain.lengths[grid.gravity_axis])
    if cls != UNIFORMLY_UNSTABLE:
        raise ProfileError("coupled pencil needs rho' > 0 everywhere; "
                           f"profile is {cls}")
    nc = grid.n_cells
    nf = grid.total_faces
    mu, g = ctx.params.mu, ctx.params.g
    dr = ctx.drho_c.ravel()

    def op_a(z):
        rho, vf = z[:nc], z[nc:]
        top = -ctx.avg_v3(vf).ravel()
        y = (mu / g) * ctx.ops.lap_flat(vf) - ctx.buoyancy_flat(
            rho.reshape(grid.cells))
        bot, _ = ctx.proj.project_flat(y)
        return np.concatenate([top, bot])

    def op_m(z):
        rho, vf = z[:nc], z[nc:]
        bot, _ = ctx.proj.project_flat(ctx.rho_f * vf)
        return np.concatenate([rho / dr, bot / g])

    def project(z):
        rho, vf = z[:nc], z[nc:]
        bot, _ = ctx.proj.project_flat(vf)
        return np.concatenate([rho, bot])

    visc = ctx.precond(1.0)

    def precond(z):
        rho, vf = z[:nc], z[nc:]
        return np.concatenate([rho * dr, g * visc(vf)])

    res = projected_lobpcg(op_a, op_m, project, nc + nf, block=2, seed=seed,
                           precond=precond, tol=tol, maxiter=maxiter)
    vec = _fix_sign(res.vector) / np.sqrt(grid.cell_volume)
    v = VectorField.from_flat(grid, vec[nc:])
    rho = ScalarField(grid, vec[:nc].reshape(grid.cells))
    sol = EigenSolution(v, float(res.value), float("nan"), res.residual,
                        res.iterations, res.converged, seed, rho=rho)
    return float(res.value), sol


# ---------------------------------------------------------------------------
# alpha curve export
# ---------------------------------------------------------------------------

@dataclass
class AlphaCurve:
    s_values: list[float] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    c3: float = float("nan")
    c4: float = float("nan")
    bound: float = float("nan")

    def add(self, s: float, a: float, residual: float) -> None:
        self.s_values.append(float(s))
        self.alphas.append(float(a))
        self.residuals.append(float(residual))

    def to_csv(self) -> str:
        lines = ["s,alpha,residual,c3_minus_c4s,upper_bound"]
        for s, a, r in zip(self.s_values, self.alphas, self.residuals):
            low = self.c3 - self.c4 * s if np.isfinite(self.c3) else float("nan")
            lines.append(f"{s:.17g},{a:.17g},{r:.17g},{low:.17g},{self.bound:.17g}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "s": self.s_values,
            "alpha": self.alphas,
            "residual": self.residuals,
            "certificate": {"c3": self.c3, "c4": self.c4,
                            "upper_bound": self.bound},
        }
