"""Time integration of the linearized and nonlinear perturbed systems.

Both steppers are first-order operator splits on the staggered grid:
density update, implicit viscous solve, density-weighted pressure
projection.  The linear stepper couples the buoyancy force implicitly to
the mass update, which makes the stability energy balance dissipative
term by term: on a stably stratified profile the Lyapunov functional

    L = I[g rho_pert^2 / (-rhobar') + rhobar |u|^2]

is nonincreasing at every step, with identity residual O(dt^2).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .core import ScalarField, StaggeredGrid, VectorField
from .operators import GridOperators, LerayProjector, _kron_chain, h1_seminorm_sq
from .profiles import DensityProfile, drho_cells, rho_cells, rho_faces_flat
from .spectra import PhysicalParams


class CFLError(RuntimeError):
    pass


@dataclass
class SimState:
    t: float
    rho_pert: ScalarField
    velocity: VectorField
    pressure: ScalarField
    mode: str  # "linear" | "nonlinear"

    @classmethod
    def zeros(cls, grid: StaggeredGrid, mode: str) -> "SimState":
        return cls(0.0, ScalarField.zeros(grid), VectorField.zeros(grid),
                   ScalarField.zeros(grid), mode)

    def copy(self) -> "SimState":
        return SimState(self.t, self.rho_pert.copy(), self.velocity.copy(),
                        self.pressure.copy(), self.mode)


_TRACE_COLUMNS = ("t", "rho_l2", "u_l2", "gradu_l2", "ut_l2",
                  "lyapunov", "dual_energy", "dissipation")


@dataclass
class MonitorTrace:
    rows: list[dict] = field(default_factory=list)

    def add(self, **kw) -> None:
        if self.rows and kw["t"] <= self.rows[-1]["t"]:
            raise ValueError("trace times must be strictly increasing")
        self.rows.append({c: float(kw.get(c, float("nan")))
                          for c in _TRACE_COLUMNS})

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(_TRACE_COLUMNS) + "\n")
        for r in self.rows:
            buf.write(",".join(f"{r[c]:.17g}" for c in _TRACE_COLUMNS) + "\n")
        return buf.getvalue()


def default_dt(grid: StaggeredGrid, profile: DensityProfile,
               params: PhysicalParams, u_max: float = 0.0) -> float:
    hmin = min(grid.h)
    rho_min = float(np.min(rho_cells(grid, profile)))
    dt = 0.25 * hmin * hmin * rho_min / params.mu
    if u_max > 0.0:
        dt = min(dt, 0.25 * hmin / u_max)
    return dt


def _avg_matrix(grid: StaggeredGrid) -> sp.csr_matrix:
    """Sparse faces->cells average for the gravity-direction component."""
    g = grid.gravity_axis
    mats = []
    for j in range(grid.dim):
        if j == g:
            n = grid.cells[g]
            mats.append(sp.diags([np.full(n, 0.5), np.full(n, 0.5)], [0, 1],
                                 shape=(n, n + 1)).tocsr())
        else:
            mats.append(sp.identity(grid.cells[j], format="csr"))
    return _kron_chain(mats)


class _Monitors:
    def __init__(self, grid: StaggeredGrid, profile: DensityProfile,
                 params: PhysicalParams):
        self.grid = grid
        self.params = params
        self.drho = drho_cells(grid, profile)
        self.rho_f = rho_faces_flat(grid, profile)
        self.vol = grid.cell_volume
        d = self.drho
        self.stable = bool(np.max(d) < 0.0)
        self.uniform = bool(np.min(d) > 0.0)

    def record(self, trace: MonitorTrace, state: SimState,
               prev_u: np.ndarray | None, dt: float,
               diss: float | None = None) -> None:
        """Append one row; `diss` overrides the dissipation entry with the
        integrator's own quadrature (taken at the pre-projection velocity,
        where the discrete energy identity is exact)."""
        g = self.params.g
        r = state.rho_pert.values
        uf = state.velocity.flat()
        gradsq = h1_seminorm_sq(state.velocity)
        ke = self.vol * float(np.sum(self.rho_f * uf * uf))
        lyap = dual = float("nan")
        if self.stable:
            lyap = self.vol * float(np.sum(g * r * r / (-self.drho))) + ke
        if self.uniform:
            dual = self.vol * float(np.sum(r * r / self.drho)) + ke / g
        ut = float("nan")
        if prev_u is not None and dt > 0:
            d = (uf - prev_u) / dt
            ut = float(np.sqrt(self.vol * np.sum(d * d)))
        trace.add(t=state.t,
                  rho_l2=state.rho_pert.norm_l2(),
                  u_l2=float(np.sqrt(self.vol * np.sum(uf * uf))),
                  gradu_l2=float(np.sqrt(max(gradsq, 0.0))),
                  ut_l2=ut, lyapunov=lyap, dual_energy=dual,
                  dissipation=self.params.mu * gradsq if diss is None
                  else diss)


class LinearStepper:
    """Fixed-dt integrator of the linearized system."""

    def __init__(self, grid: StaggeredGrid, profile: DensityProfile,
                 params: PhysicalParams, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.grid = grid
        self.profile = profile
        self.params = params
        self.dt = dt
        self.ops = GridOperators(grid)
        self.drho_c = drho_cells(grid, profile)
        self.rho_f = rho_faces_flat(grid, profile)
        self.beta = 1.0 / self.rho_f
        self.proj = LerayProjector(self.ops, beta=self.beta)
        self.gaxis = grid.gravity_axis
        self.monitors = _Monitors(grid, profile, params)

        # implicit viscous + buoyancy-coupled matrix on interior faces
        rho_int = np.concatenate(self.ops.pack_interior(self.rho_f))
        K = sp.block_diag(self.ops.K_int, format="csr")
        A = sp.diags(rho_int) + dt * params.mu * K
        Ag = _avg_matrix(grid)[:, self.ops.int_masks[self.gaxis]]
        B = (Ag.T @ sp.diags(self.drho_c.ravel()) @ Ag).tocsr()
        sizes = [k.shape[0] for k in self.ops.K_int]
        off = sum(sizes[:self.gaxis])
        rest = sum(sizes) - off - sizes[self.gaxis]
        pad = sp.block_diag(
            [sp.csr_matrix((off, off)), B, sp.csr_matrix((rest, rest))],
            format="csr")
        A = (A - dt * dt * params.g * pad).tocsc()
        self.lu = splu(A)

    def _solve_interior(self, rhs_flat: np.ndarray) -> np.ndarray:
        parts = self.ops.pack_interior(rhs_flat)
        sizes = [p.size for p in parts]
        sol = self.lu.solve(np.concatenate(parts))
        out, at = [], 0
        for sz in sizes:
            out.append(sol[at:at + sz])
            at += sz
        return self.ops.unpack_interior(out)

    def step(self, state: SimState) -> SimState:
        grid, dt, g = self.grid, self.dt, self.params.g
        uflat = state.velocity.flat()
        rho = state.rho_pert.values
        # momentum with buoyancy from the updated density folded in
        force = kernels.avg_adjoint_cells_to_faces(rho, self.gaxis).ravel()
        rhs = self.rho_f * uflat
        lo = grid.comp_offsets()[self.gaxis]
        rhs[lo:lo + grid.n_faces(self.gaxis)] -= dt * g * force
        ustar = self._solve_interior(rhs)
        # mass update with the same (pre-projection) vertical velocity
        av3 = kernels.avg_faces_to_cells(
            ustar[lo:lo + grid.n_faces(self.gaxis)].reshape(
                grid.comp_shape(self.gaxis)), self.gaxis)
        rho_new = rho - dt * self.drho_c * av3
        self.last_dissipation = -self.params.mu * grid.cell_volume * float(
            np.dot(self.ops.lap_flat(ustar), ustar))
        unew, phi = self.proj.project_flat(ustar)
        q = -phi / dt
        q -= q.mean()
        return SimState(state.t + dt, ScalarField(grid, rho_new),
                        VectorField.from_flat(grid, unew),
                        ScalarField(grid, q), "linear")

    def run(self, state: SimState, n_steps: int,
            trace: MonitorTrace | None = None) -> SimState:
        if trace is not None:
            self.monitors.record(trace, state, None, self.dt)
        for _ in range(n_steps):
            prev = state.velocity.flat()
            state = self.step(state)
            if trace is not None:
                self.monitors.record(trace, state, prev, self.dt,
                                     diss=self.last_dissipation)
        return state


class NonlinearStepper:
    """Integrator of the full perturbed system with donor-cell transport."""

    def __init__(self, grid: StaggeredGrid, profile: DensityProfile,
                 params: PhysicalParams, dt: float | None = None,
                 max_principle_tol: float = 1e-10):
        self.grid = grid
        self.profile = profile
        self.params = params
        self.dt_fixed = dt
        self.tol = max_principle_tol
        self.ops = GridOperators(grid)
        self.rho_bar_c = rho_cells(grid, profile)
        self.gaxis = grid.gravity_axis
        self.K = sp.block_diag(self.ops.K_int, format="csc")
        self.monitors = _Monitors(grid, profile, params)

    def _face_density(self, rho_c: np.ndarray) -> np.ndarray:
        return np.concatenate([
            kernels.cells_to_faces_mean(rho_c, i).ravel()
            for i in range(self.grid.dim)])

    def pick_dt(self, state: SimState) -> float:
        if self.dt_fixed is not None:
            return self.dt_fixed
        umax = max(float(np.max(np.abs(c))) for c in state.velocity.components)
        return default_dt(self.grid, self.profile, self.params, umax)

    def step(self, state: SimState, dt: float | None = None) -> SimState:
        grid, g, mu = self.grid, self.params.g, self.params.mu
        dt = self.pick_dt(state) if dt is None else dt
        rho_tot = state.rho_pert.values + self.rho_bar_c
        lo_b, hi_b = float(rho_tot.min()), float(rho_tot.max())
        if lo_b <= 0:
            raise CFLError("total density lost positivity")

        rho_tot_new = kernels.donor_cell_update(
            rho_tot, state.velocity.components, grid.h, dt)
        if (rho_tot_new.min() < lo_b - self.tol
                or rho_tot_new.max() > hi_b + self.tol):
            raise CFLError(
                f"density bounds violated: [{rho_tot_new.min():.6g}, "
                f"{rho_tot_new.max():.6g}] vs [{lo_b:.6g}, {hi_b:.6g}]; "
                "reduce dt")
        pert_new = rho_tot_new - self.rho_bar_c

        rho_f_old = self._face_density(rho_tot)
        rho_f_new = self._face_density(rho_tot_new)
        adv = np.concatenate([
            kernels.advect_velocity_comp(state.velocity.components, i, grid.h).ravel()
            for i in range(grid.dim)])
        rhs = rho_f_new * state.velocity.flat() - dt * rho_f_old * adv
        force = kernels.avg_adjoint_cells_to_faces(pert_new, self.gaxis).ravel()
        lo = grid.comp_offsets()[self.gaxis]
        rhs[lo:lo + grid.n_faces(self.gaxis)] -= dt * g * force

        rho_int = np.concatenate(self.ops.pack_interior(rho_f_new))
        lu = splu((sp.diags(rho_int) + dt * mu * self.K).tocsc())
        parts = self.ops.pack_interior(rhs)
        sizes = [p.size for p in parts]
        sol = lu.solve(np.concatenate(parts))
        out, at = [], 0
        for sz in sizes:
            out.append(sol[at:at + sz])
            at += sz
        ustar = self.ops.unpack_interior(out)
        self.last_dissipation = -mu * grid.cell_volume * float(
            np.dot(self.ops.lap_flat(ustar), ustar))

        proj = LerayProjector(self.ops, beta=1.0 / rho_f_new)
        unew, phi = proj.project_flat(ustar)
        q = -phi / dt
        q -= q.mean()
        return SimState(state.t + dt, ScalarField(grid, pert_new),
                        VectorField.from_flat(grid, unew),
                        ScalarField(grid, q), "nonlinear")

    def run(self, state: SimState, t_end: float,
            trace: MonitorTrace | None = None,
            callback=None) -> SimState:
        dt = self.pick_dt(state)
        if trace is not None:
            self.monitors.record(trace, state, None, dt)
        while state.t < t_end - 1e-14:
            dt = min(self.pick_dt(state), t_end - state.t)
            prev = state.velocity.flat()
            state = self.step(state, dt)
            if trace is not None:
                self.monitors.record(trace, state, prev, dt,
                                     diss=self.last_dissipation)
            if callback is not None and callback(state):
                break
        return state


# ---------------------------------------------------------------------------
# trace analysis
# ---------------------------------------------------------------------------

def measure_growth_rate(trace: MonitorTrace, window: tuple[float, float]) -> float:
    """Least-squares slope of log ||(rho, u)||_{L2} over the time window."""
    t = trace.column("t")
    amp = np.sqrt(trace.column("rho_l2") ** 2 + trace.column("u_l2") ** 2)
    sel = (t >= window[0]) & (t <= window[1]) & (amp > 0)
    if int(np.sum(sel)) < 10:
        raise ValueError("need at least 10 trace records in the fit window")
    A = np.vstack([t[sel], np.ones(int(np.sum(sel)))]).T
    slope, _ = np.linalg.lstsq(A, np.log(amp[sel]), rcond=None)[0]
    return float(slope)


def stable_decay_report(trace: MonitorTrace, params: PhysicalParams,
                        dt: float) -> dict:
    """Audit a stable-profile run against the decay identities.

    Checks (a) the per-step Lyapunov identity L_k - L_{k-1} =
    -2 mu dt |grad u_k|^2 within 5*dt*(energy scale), (b) boundedness of
    the cumulative dissipation by a reported constant times the initial
    energy, (c) terminal discrete-H1 velocity below 1% of initial.
    """
    L = trace.column("lyapunov")
    diss = trace.column("dissipation")
    gradu = trace.column("gradu_l2")
    u = trace.column("u_l2")
    if not np.all(np.isfinite(L)):
        raise ValueError("trace lacks the Lyapunov functional: profile not stable")
    if L[0] == 0.0:
        return {"zero_init": True, "identity_ok": True, "h1_decay_ok": True,
                "dissipation_constant": float("nan")}
    resid = np.abs(np.diff(L) + 2.0 * dt * diss[1:])
    scale = np.maximum(L[:-1], L[1:])
    identity_ok = bool(np.all(resid <= 5.0 * dt * scale))
    monotone = bool(np.all(np.diff(L) <= 1e-12 * L[:-1]))
    cum_diss = float(np.sum(diss[1:]) * dt / params.mu)
    c_hat = cum_diss / L[0]
    h1 = np.sqrt(u ** 2 + gradu ** 2)
    h1_ok = bool(h1[-1] <= 0.01 * h1[0]) if h1[0] > 0 else True
    return {
        "zero_init": False,
        "identity_ok": identity_ok,
        "identity_max_residual": float(resid.max()),
        "identity_budget": float(5.0 * dt * scale.min()),
        "monotone": monotone,
        "dissipation_constant": c_hat,
        "h1_initial": float(h1[0]),
        "h1_final": float(h1[-1]),
        "h1_decay_ok": h1_ok,
    }


def dual_energy_audit(trace: MonitorTrace, lam: float, dt: float,
                      eps_step: float = 1e-3) -> dict:
    """Check D(t+dt) <= D(t) e^{2 lam dt} (1 + eps_step) along the trace."""
    D = trace.column("dual_energy")
    if not np.all(np.isfinite(D)):
        raise ValueError("trace lacks the dual energy: profile not uniformly "
                         "unstable")
    if np.all(D == 0.0):
        return {"zero_init": True, "ok": True, "max_ratio": 0.0}
    grow = np.exp(2.0 * lam * dt) * (1.0 + eps_step)
    prev, nxt = D[:-1], D[1:]
    ok = nxt <= prev * grow + 1e-300
    ratios = np.divide(nxt, prev, out=np.zeros_like(nxt), where=prev != 0)
    return {"zero_init": False, "ok": bool(np.all(ok)),
            "max_ratio": float(ratios.max()),
            "allowed_ratio": float(grow)}
