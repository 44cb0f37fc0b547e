"""Top-level acceptance suite.

Each test exercises one advertised guarantee of the package end to end and
prints exactly one PASS/FAIL line (bypassing capture) before asserting.
Tolerances are part of the contract and are pinned as constants here.
"""

import sys

import numpy as np
import pytest

from rtspectra import (BoxDomain, GrowthOptions, LinearStepper, MonitorTrace,
                       NonlinearStepper, PhysicalParams, SimState,
                       SpectralContext, StaggeredGrid, alpha,
                       bump_certificate, eigenmode_pair, measure_growth_rate,
                       parse_profile, random_divfree_state, rate_resolving_dt,
                       run_escape_time, run_sharp_growth, solve_growth_rate,
                       stable_decay_report, EscapeTimeConfig)
from rtspectra.core import ScalarField, VectorField
from rtspectra.operators import (GridOperators, LerayProjector, div, grad,
                                 inner_cells, inner_faces, lap)
from rtspectra.spectra import s_upper_bracket, upper_bound

from oracle_dense import DenseMac2D, dense_lambda

MU, G = 0.1, 1.0
PARAMS = PhysicalParams(MU, G)

TOL_ALGEBRA = 1e-12          # exact operator identities
TOL_POISSON = 1e-10          # identities routed through a Poisson solve
TOL_ORACLE_ALPHA = 1e-8      # iterative vs dense maximizer
TOL_ORACLE_LAMBDA = 1e-6     # fixed point vs dense tabulation
TOL_FIXED_POINT = 1e-8       # |Lambda^2 - alpha(Lambda)|
TOL_DUALITY = 1e-6           # relative |Lambda - Lambda_N|
TOL_RESIDUAL = 1e-6          # relative momentum-balance residual
TOL_RATE = 0.02              # relative error of fitted growth rates
TOL_SLOPE = 0.10             # relative error of the escape-time slope
IDENTITY_BUDGET = 5.0        # Lyapunov identity residual <= this * dt * scale
MIN_ORDER = 1.5              # Richardson order of Lambda in h
TOL_MAXPRINCIPLE = 1e-10     # per-step density bound slack


_CAPTURE = None


@pytest.fixture(autouse=True)
def _live_report(capfd):
    global _CAPTURE
    _CAPTURE = capfd
    yield
    _CAPTURE = None


def _report(num: int, name: str, ok: bool, detail: str) -> None:
    verdict = "PASS" if ok else "FAIL"
    line = f"CRITERION {num:2d} [{name}]: {verdict} ({detail})"
    if _CAPTURE is not None:
        with _CAPTURE.disabled():
            print(line, flush=True)
    else:
        print(line, file=sys.__stdout__, flush=True)
    assert ok, f"criterion {num} ({name}): {detail}"


def grid2d(n, lengths=(1.0, 1.0)):
    return StaggeredGrid(BoxDomain(2, lengths), (n, n))


@pytest.fixture(scope="module")
def growth16():
    grid = grid2d(16)
    profile = parse_profile("linear(1,1)")
    res = solve_growth_rate(grid, profile, PARAMS, GrowthOptions(seed=0))
    return grid, profile, res


def test_criterion_1_operator_algebra():
    worst_dual = worst_sym = worst_proj = 0.0
    for case in range(100):
        rng = np.random.default_rng(10_000 + case)
        n = (int(rng.integers(4, 14)), int(rng.integers(4, 14)))
        L = (float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)))
        grid = StaggeredGrid(BoxDomain(2, L), n)
        v = VectorField(grid, [rng.standard_normal(grid.comp_shape(i))
                               for i in range(2)])
        v.zero_normal_boundary()
        p = ScalarField(grid, rng.standard_normal(grid.cells))

        lhs = inner_faces(grid, grad(p).flat(), v.flat())
        rhs = -inner_cells(grid, p.values, div(v).values)
        worst_dual = max(worst_dual,
                         abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1.0))

        w = VectorField(grid, [rng.standard_normal(grid.comp_shape(i))
                               for i in range(2)])
        w.zero_normal_boundary()
        a = inner_faces(grid, lap(v).flat(), w.flat())
        b = inner_faces(grid, v.flat(), lap(w).flat())
        worst_sym = max(worst_sym, abs(a - b) / max(abs(a), 1.0))

        proj = LerayProjector(GridOperators(grid))
        pv = proj.project(v)
        worst_proj = max(
            worst_proj,
            div(pv).norm_l2() / max(v.norm_l2(), 1.0),
            (proj.project(pv) - pv).norm_l2() / max(pv.norm_l2(), 1.0))
    ok = (worst_dual <= TOL_ALGEBRA and worst_sym <= TOL_ALGEBRA
          and worst_proj <= TOL_POISSON)
    _report(1, "operator algebra", ok,
            f"duality {worst_dual:.2e}, symmetry {worst_sym:.2e}, "
            f"projection {worst_proj:.2e} over 100 cases")


def test_criterion_2_dense_oracle():
    grid = grid2d(8)
    profile = parse_profile("linear(1,1)")
    mac = DenseMac2D(8, 8)
    ctx = SpectralContext(grid, profile, PARAMS)
    worst = 0.0
    for s in np.linspace(0.0, 1.0, 20):
        a_dense = mac.alpha(profile, MU, G, float(s))
        a_iter, _ = alpha(float(s), ctx, seed=1)
        worst = max(worst, abs(a_dense - a_iter))
    res = solve_growth_rate(grid, profile, PARAMS,
                            GrowthOptions(cross_check=False))
    lam_dense = dense_lambda(mac, profile, MU, G, s_hi=1.0)
    gap = abs(res.lambda_ - lam_dense)
    ok = worst <= TOL_ORACLE_ALPHA and gap <= TOL_ORACLE_LAMBDA
    _report(2, "dense oracle equivalence", ok,
            f"max |alpha gap| {worst:.2e} over 20 s-values, "
            f"|Lambda gap| {gap:.2e}")


def test_criterion_3_variational_certificates(growth16):
    grid, profile, res = growth16
    ctx = SpectralContext(grid, profile, PARAMS)
    s_hat, _ = s_upper_bracket(ctx, seed=0)
    ss = np.linspace(0.0, s_hat, 9)
    vals = [alpha(float(s), ctx, seed=0)[0] for s in ss]
    monotone = all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
    cert = bump_certificate(profile, PARAMS, grid)
    lower_ok = all(v >= cert.c3 - cert.c4 * s - 1e-8
                   for s, v in zip(ss, vals))
    bound = upper_bound(ctx)
    upper_ok = all(v <= bound + 1e-10 for v in vals)
    fp_gap = abs(res.lambda_ ** 2 - res.alpha_at_lambda)
    ok = monotone and lower_ok and upper_ok and fp_gap <= TOL_FIXED_POINT
    _report(3, "variational certificates", ok,
            f"monotone={monotone}, lower bound (c3={cert.c3:.3f}, "
            f"c4={cert.c4:.3f}) held={lower_ok}, upper bound held={upper_ok}, "
            f"|Lambda^2-alpha| {fp_gap:.2e}")


def test_criterion_4_primal_dual_agreement():
    worst = 0.0
    cases = []
    for spec in ("linear(1,1)", "exponential(1,1)"):
        for n in (12, 16):
            grid = grid2d(n)
            profile = parse_profile(spec)
            res = solve_growth_rate(grid, profile, PARAMS,
                                    GrowthOptions(cross_check=True))
            rel = res.lambda_gap / res.lambda_
            worst = max(worst, rel)
            cases.append(f"{spec}@{n}x{n}:{rel:.1e}")
    ok = worst <= TOL_DUALITY
    _report(4, "primal-dual growth rates", ok,
            "relative gaps " + ", ".join(cases))


def test_criterion_5_pde_residual(growth16):
    _, _, res = growth16
    flags = res.nondegeneracy
    ok = (res.pde_residual <= TOL_RESIDUAL and flags["v3_nonzero"]
          and flags["horizontal_nonzero"])
    _report(5, "boundary-problem residual", ok,
            f"residual {res.pde_residual:.2e}, flags {flags}")


def test_criterion_6_linear_growth_sharpness(growth16):
    grid, profile, res = growth16
    rep = run_sharp_growth(profile, PARAMS, grid, n_random=20, growth=res,
                           seed=0)
    eig_err = abs(rep.eigen_rate - res.lambda_) / res.lambda_
    excess = (rep.max_random_rate - res.lambda_) / res.lambda_
    ok = eig_err <= TOL_RATE and excess <= TOL_RATE
    _report(6, "linear growth sharpness", ok,
            f"eigenmode rate error {eig_err:.2%}, worst random excess "
            f"{excess:+.2%} over 20 runs")


def test_criterion_7_stable_decay():
    grid = grid2d(12)
    profile = parse_profile("linear(2,-1)")
    dt = 0.01

    stepper = LinearStepper(grid, profile, PARAMS, dt)
    state = random_divfree_state(grid, seed=4, amplitude=1e-2)
    state.mode = "linear"
    trace = MonitorTrace()
    stepper.run(state, int(round(40.0 / dt)), trace)
    lin = stable_decay_report(trace, PARAMS, dt)

    nstepper = NonlinearStepper(grid, profile, PARAMS, dt=dt)
    nstate = random_divfree_state(grid, seed=4, amplitude=1e-3)
    nstate.mode = "nonlinear"
    ntrace = MonitorTrace()
    nstepper.run(nstate, 40.0, ntrace)
    nl = stable_decay_report(ntrace, PARAMS, dt)

    ok = (lin["identity_ok"] and lin["monotone"] and lin["h1_decay_ok"]
          and nl["identity_ok"] and nl["h1_decay_ok"])
    _report(7, "stable-profile decay", ok,
            f"linear: identity residual {lin['identity_max_residual']:.2e} "
            f"(budget {IDENTITY_BUDGET}*dt*L), h1 {lin['h1_final']:.2e} of "
            f"{lin['h1_initial']:.2e}; nonlinear identity_ok="
            f"{nl['identity_ok']}, h1_decay_ok={nl['h1_decay_ok']}")


def test_criterion_8_escape_time_scaling(growth16):
    grid, profile, res = growth16
    cfg = EscapeTimeConfig(profile, PARAMS, grid,
                           deltas=(1e-2, 5e-3, 2.5e-3, 1.25e-3),
                           epsilon0=0.05, seed=0)
    out = run_escape_time(cfg, growth=res)
    rel = abs(out.slope - 1.0 / res.lambda_) * res.lambda_
    crossed = all(np.isfinite(t) for per in out.times_per_norm for t in per)
    ok = rel <= TOL_SLOPE and crossed and out.linearity_ok
    _report(8, "escape-time scaling", ok,
            f"slope {out.slope:.4f} vs 1/Lambda {1 / res.lambda_:.4f} "
            f"({rel:.2%}), all norm targets crossed={crossed}")


def test_criterion_9_mesh_and_time_convergence():
    profile = parse_profile("linear(1,1)")
    lams = [solve_growth_rate(grid2d(n), profile, PARAMS,
                              GrowthOptions(cross_check=False)).lambda_
            for n in (8, 16, 32)]
    order = np.log2(abs(lams[0] - lams[1]) / abs(lams[1] - lams[2]))

    stable = parse_profile("linear(2,-1)")
    grid = grid2d(12)
    worst = []
    for dt in (0.02, 0.01, 0.005):
        st = random_divfree_state(grid, seed=5, amplitude=0.1)
        st.mode = "linear"
        stepper = LinearStepper(grid, stable, PARAMS, dt)
        tr = MonitorTrace()
        stepper.run(st, int(round(1.0 / dt)), tr)
        L = tr.column("lyapunov")
        diss = tr.column("dissipation")
        resid = np.abs(np.diff(L) + 2 * dt * diss[1:])
        worst.append(float(np.max(resid / np.maximum(L[:-1], 1e-300))))
    halves = worst[1] <= 0.5 * worst[0] and worst[2] <= 0.5 * worst[1]
    ok = order >= MIN_ORDER and halves
    _report(9, "mesh and time-step convergence", ok,
            f"Richardson order {order:.2f} from Lambda={lams}, identity "
            f"residuals {[f'{w:.1e}' for w in worst]} halve={halves}")


def test_criterion_10_max_principle(growth16):
    grid, profile, res = growth16
    rho0, v0 = eigenmode_pair(res, grid, profile)
    amp = 1e-2
    state = SimState(0.0, ScalarField(grid, amp * rho0.values),
                     v0.scaled(amp), ScalarField.zeros(grid), "nonlinear")
    rho_bar = profile.rho(grid.cell_height())
    tot = rho_bar + state.rho_pert.values
    lo, hi = float(tot.min()), float(tot.max())
    stepper = NonlinearStepper(grid, profile, PARAMS, dt=0.002)
    worst = 0.0
    steps = 0

    def watch(st):
        nonlocal lo, hi, worst, steps
        t = rho_bar + st.rho_pert.values
        worst = max(worst, lo - float(t.min()), float(t.max()) - hi)
        lo = min(lo, float(t.min()))
        hi = max(hi, float(t.max()))
        steps += 1
        return False

    stepper.run(state, 2.0, callback=watch)
    ok = worst <= TOL_MAXPRINCIPLE and steps >= 100
    _report(10, "advective max principle", ok,
            f"worst per-step bound violation {worst:.2e} over {steps} steps")
