"""Fixed-point solve for the instability growth rate.

The growth rate is the unique positive solution of Lambda = sqrt(alpha(Lambda)),
found by bisecting phi(s) = s^2 - alpha(s), which is strictly increasing
because alpha is nonincreasing in s.  The returned eigenpair is certified
three ways: fixed-point gap, discrete boundary-problem residual with
recovered pressure, and (when defined) agreement with the coupled pencil.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ScalarField, StaggeredGrid, VectorField
from .operators import inner_faces
from .profiles import RT_UNSTABLE, UNIFORMLY_UNSTABLE, DensityProfile
from .spectra import (EigenSolution, PhysicalParams, SpectralContext, alpha,
                      lambda_N, s_upper_bracket, upper_bound)


class BracketError(RuntimeError):
    """alpha(0) <= 0 although the profile classified as unstable."""


class DegenerateInputError(ValueError):
    pass


@dataclass
class GrowthOptions:
    fp_tol: float = 1e-8          # |Lambda^2 - alpha(Lambda)| <= fp_tol*max(1, Lambda^2)
    seed: int = 0
    max_bisect: int = 200
    cross_check: bool = True

    @property
    def eig_tol(self) -> float:
        return 0.01 * self.fp_tol


@dataclass
class GrowthRateResult:
    verdict: str                   # "unstable" | "no_instability"
    lambda_: float | None
    alpha_at_lambda: float
    pde_residual: float
    nondegeneracy: dict
    bracket_history: list = field(default_factory=list)
    lambda_N: float | None = None
    lambda_gap: float | None = None
    eigen: EigenSolution | None = None
    classification: str = ""

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "lambda": self.lambda_,
            "alpha_at_lambda": self.alpha_at_lambda,
            "residual": self.pde_residual,
            "flags": self.nondegeneracy,
            "bracket_history": [[s, a] for s, a in self.bracket_history],
            "lambda_N": self.lambda_N,
            "lambda_vs_lambdaN_gap": self.lambda_gap,
            "classification": self.classification,
        }


def pde_residual(sol: EigenSolution, lam: float, ctx: SpectralContext) -> float:
    """Relative residual of the discrete boundary problem

        lam^2 rho v + lam grad(q) = lam mu lap v + g buoyancy(v)

    with the pressure q recovered from the projection Poisson solve and
    normalized to zero mean.
    """
    vflat = sol.v.flat()
    scale = lam * lam * np.sqrt(
        inner_faces(ctx.grid, vflat, vflat, weight=ctx.rho_f ** 2))
    if scale == 0.0:
        raise DegenerateInputError("zero eigenfield: relative residual undefined")
    mu, g = ctx.params.mu, ctx.params.g
    r0 = (lam * lam * ctx.rho_f * vflat
          - lam * mu * ctx.ops.lap_flat(vflat)
          - g * ctx.buoyancy_flat(ctx.drho_c * ctx.avg_v3(vflat)))
    r0 *= ctx.ops.mask  # momentum balance holds on non-pinned faces only
    pr0, _ = ctx.proj.project_flat(r0)
    return float(np.sqrt(inner_faces(ctx.grid, pr0, pr0))) / float(scale)


def recover_pressure(sol: EigenSolution, lam: float, ctx: SpectralContext) -> ScalarField:
    """Zero-mean pressure mode q with lam*grad(q) closing the momentum balance."""
    vflat = sol.v.flat()
    mu, g = ctx.params.mu, ctx.params.g
    r0 = (lam * lam * ctx.rho_f * vflat
          - lam * mu * ctx.ops.lap_flat(vflat)
          - g * ctx.buoyancy_flat(ctx.drho_c * ctx.avg_v3(vflat)))
    r0 *= ctx.ops.mask
    phi = ctx.ops.poisson_solve(ctx.ops.D @ (r0 / lam))
    return ScalarField(ctx.grid, phi.reshape(ctx.grid.cells))


def check_nondegeneracy(sol: EigenSolution, *, rel: float = 1e-8) -> dict:
    grid = sol.v.grid
    g = grid.gravity_axis
    total = sol.v.norm_l2()
    v3 = float(np.sqrt(grid.cell_volume * np.sum(sol.v.vertical ** 2)))
    horiz_sq = sum(float(np.sum(c ** 2)) for i, c in enumerate(sol.v.components)
                   if i != g)
    horiz = float(np.sqrt(grid.cell_volume * horiz_sq))
    return {
        "v3_nonzero": v3 >= rel * total,
        "horizontal_nonzero": horiz >= rel * total,
    }


def solve_growth_rate(grid: StaggeredGrid, profile: DensityProfile,
                      params: PhysicalParams,
                      opts: GrowthOptions | None = None) -> GrowthRateResult:
    opts = opts or GrowthOptions()
    ctx = SpectralContext(grid, profile, params)
    cls = profile.classify(grid.domain.lengths[grid.gravity_axis])
    history: list[tuple[float, float]] = []

    s_hat, hist = s_upper_bracket(ctx, seed=opts.seed, tol=opts.eig_tol)
    history.extend(hist)
    a0 = hist[0][1]
    if a0 <= opts.eig_tol:
        if cls in (RT_UNSTABLE, UNIFORMLY_UNSTABLE):
            raise BracketError(
                f"profile classified {cls} but alpha(0) = {a0:.3e} <= 0; "
                "the unstable region is unresolved on this grid")
        return GrowthRateResult("no_instability", None, a0, 0.0,
                                {"v3_nonzero": False, "horizontal_nonzero": False},
                                history, classification=cls)

    lo, hi = 0.0, s_hat
    x0 = None
    mid, a_mid, sol = 0.0, a0, None
    for _ in range(opts.max_bisect):
        mid = 0.5 * (lo + hi)
        a_mid, sol = alpha(mid, ctx, seed=opts.seed, tol=opts.eig_tol, x0=x0)
        history.append((mid, a_mid))
        x0 = sol.v.flat()
        phi = mid * mid - a_mid
        # the relative boundary-problem residual scales like |phi| / mid^2,
        # so demand extra accuracy when the rate is small
        phi_tol = min(opts.fp_tol * max(1.0, mid * mid),
                      1e-7 * mid * mid + 1e-14)
        if abs(phi) <= phi_tol:
            break
        if phi < 0.0:
            lo = mid
        else:
            hi = mid
    else:
        raise RuntimeError(
            f"bisection did not certify the fixed point: |phi| = "
            f"{abs(mid * mid - a_mid):.3e} at s = {mid:.6e}")

    lam = mid
    residual = pde_residual(sol, lam, ctx)
    flags = check_nondegeneracy(sol)
    result = GrowthRateResult("unstable", lam, a_mid, residual, flags,
                              history, eigen=sol, classification=cls)
    if opts.cross_check and cls == UNIFORMLY_UNSTABLE:
        ln, _ = lambda_N(ctx, seed=opts.seed, tol=opts.eig_tol)
        result.lambda_N = ln
        result.lambda_gap = abs(lam - ln)
    return result


def cross_check_lambda_N(grid: StaggeredGrid, profile: DensityProfile,
                         params: PhysicalParams, *, seed: int = 0,
                         fp_tol: float = 1e-8) -> tuple[float, float, float]:
    """(Lambda, Lambda_N, gap) computed independently on the same grid."""
    res = solve_growth_rate(grid, profile, params,
                            GrowthOptions(fp_tol=fp_tol, seed=seed,
                                          cross_check=True))
    if res.lambda_ is None or res.lambda_N is None:
        raise ValueError("cross-check needs an unstable, uniformly "
                         "stratified profile")
    return res.lambda_, res.lambda_N, res.lambda_gap


def growth_upper_bound(ctx: SpectralContext) -> float:
    """Lambda <= sqrt(g sup(rho'/rho))."""
    return float(np.sqrt(max(upper_bound(ctx), 0.0)))
