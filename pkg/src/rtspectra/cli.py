"""Command-line entry point.

    rtspectra <command> [--config path] [--set key=value ...] [--out dir]
              [--seed n]

Exit codes: 0 all certificates pass, 1 certificate failure, 2 usage or
configuration error, 3 numerical failure.  Each run writes a directory
with manifest.json (atomic), result.json, and command-specific artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import COMMANDS, ConfigError, RunConfig, apply_override, parse_config
from .core import BoxDomain, StaggeredGrid
from .eigen import EigenError
from .evolution import (CFLError, LinearStepper, MonitorTrace,
                        NonlinearStepper, SimState, default_dt,
                        measure_growth_rate, stable_decay_report)
from .experiments import (EscapeTimeConfig, eigenmode_pair,
                          rate_resolving_dt, run_escape_time,
                          run_sharp_growth, run_stability_suite,
                          random_divfree_state)
from .growth import (BracketError, GrowthOptions, solve_growth_rate)
from .profiles import ProfileError, ProfileFormatError, parse_profile
from .core import ScalarField
from .serialize import save_field
from .spectra import (AlphaCurve, PhysicalParams, SpectralContext, alpha,
                      bump_certificate, s_upper_bracket, upper_bound)

PASS, CERT_FAIL, USAGE, NUMERIC = 0, 1, 2, 3


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _make_rundir(cfg: RunConfig) -> str:
    root = cfg.out or os.environ.get("RTSPECTRA_OUT", "runs")
    stamp = time.strftime("%Y%m%d-%H%M%S")
    base = os.path.join(root, f"{cfg.command}-{stamp}")
    path, k = base, 0
    while os.path.exists(path):
        k += 1
        path = f"{base}-{k}"
    os.makedirs(path)
    return path


def _build(cfg: RunConfig):
    domain = BoxDomain(len(cfg.cells), tuple(cfg.lengths), cfg.gravity_axis)
    grid = StaggeredGrid(domain, cfg.cells)
    profile = parse_profile(cfg.profile)
    params = PhysicalParams(mu=cfg.mu, g=cfg.g)
    return grid, profile, params


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _write_result(rundir: str, payload: dict) -> None:
    _atomic_write(os.path.join(rundir, "result.json"),
                  json.dumps(payload, indent=2, default=_json_default) + "\n")


# ---------------------------------------------------------------------------
# command pipelines: each returns (certificates_pass, result_payload)
# ---------------------------------------------------------------------------

def _cmd_growth_rate(cfg: RunConfig, rundir: str):
    grid, profile, params = _build(cfg)
    res = solve_growth_rate(grid, profile, params,
                            GrowthOptions(fp_tol=cfg.fp_tol, seed=cfg.seed))
    payload = res.to_dict()
    payload["grid"] = cfg.grid
    payload["profile"] = cfg.profile
    payload["params"] = {"mu": cfg.mu, "g": cfg.g}
    ok = True
    if res.verdict == "unstable":
        ok &= res.pde_residual <= cfg.residual_tol
        ok &= res.nondegeneracy["v3_nonzero"]
        ok &= res.nondegeneracy["horizontal_nonzero"]
        if res.lambda_gap is not None:
            ok &= res.lambda_gap <= 1e-6 * res.lambda_
        save_field(os.path.join(rundir, "eigenfield.rtsfld"), res.eigen.v)
    return bool(ok), payload


def _cmd_alpha_sweep(cfg: RunConfig, rundir: str):
    grid, profile, params = _build(cfg)
    ctx = SpectralContext(grid, profile, params)
    s_hat, _ = s_upper_bracket(ctx, seed=cfg.seed, tol=0.01 * cfg.fp_tol)
    s_max = s_hat if s_hat > 0 else 1.0
    curve = AlphaCurve()
    curve.bound = upper_bound(ctx)
    x0 = None
    for s in np.linspace(0.0, s_max, cfg.s_count):
        a, sol = alpha(float(s), ctx, seed=cfg.seed, tol=0.01 * cfg.fp_tol,
                       x0=x0)
        x0 = sol.v.flat()
        curve.add(float(s), a, sol.residual)
    cls = profile.classify(grid.domain.lengths[grid.gravity_axis])
    if cls in ("rt_unstable", "uniformly_unstable"):
        cert = bump_certificate(profile, params, grid)
        curve.c3, curve.c4 = cert.c3, cert.c4
    _atomic_write(os.path.join(rundir, "alpha_curve.csv"), curve.to_csv())
    _atomic_write(os.path.join(rundir, "alpha_curve.json"),
                  json.dumps(curve.to_dict(), indent=2) + "\n")
    a = np.asarray(curve.alphas)
    slack = 10 * cfg.fp_tol * np.maximum(1.0, np.abs(a[:-1]))
    ok = bool(np.all(np.diff(a) <= slack))
    ok &= bool(np.all(a <= curve.bound + 1e-10))
    if np.isfinite(curve.c3):
        lower = curve.c3 - curve.c4 * np.asarray(curve.s_values)
        ok &= bool(np.all(a >= lower - 1e-8 * np.maximum(1.0, np.abs(lower))))
    return ok, curve.to_dict()


def _cmd_evolve(cfg: RunConfig, rundir: str, mode: str):
    grid, profile, params = _build(cfg)
    cls = profile.classify(grid.domain.lengths[grid.gravity_axis])
    trace = MonitorTrace()
    payload: dict = {"mode": mode, "classification": cls,
                     "profile": cfg.profile, "grid": cfg.grid}
    if cls in ("rt_unstable", "uniformly_unstable"):
        res = solve_growth_rate(grid, profile, params,
                                GrowthOptions(fp_tol=cfg.fp_tol, seed=cfg.seed))
        lam = res.lambda_
        dt = cfg.dt or min(default_dt(grid, profile, params),
                           rate_resolving_dt(res, profile, params))
        horizon = cfg.t_end or 3.0 / lam
        rho0, v0 = eigenmode_pair(res, grid, profile)
        state = SimState(0.0, rho0, v0, ScalarField.zeros(grid), mode)
        if mode == "nonlinear":
            amp = 1e-3
            state = SimState(0.0, ScalarField(grid, amp * rho0.values),
                             v0.scaled(amp), ScalarField.zeros(grid), mode)
            stepper = NonlinearStepper(grid, profile, params, dt=dt)
            stepper.run(state, horizon, trace)
            tol = 0.05
        else:
            stepper = LinearStepper(grid, profile, params, dt)
            stepper.run(state, int(np.ceil(horizon / dt)), trace)
            tol = 0.02
        t = trace.column("t")
        rate = measure_growth_rate(trace, (0.5 * t[-1], t[-1]))
        payload.update(lambda_reference=lam, fitted_rate=rate, dt=dt)
        ok = abs(rate - lam) <= tol * lam
    else:
        dt = cfg.dt or default_dt(grid, profile, params)
        horizon = cfg.t_end or 40.0
        state = random_divfree_state(grid, seed=cfg.seed, amplitude=1e-2)
        state.mode = mode
        if mode == "nonlinear":
            stepper = NonlinearStepper(grid, profile, params, dt=dt)
            stepper.run(state, horizon, trace)
        else:
            stepper = LinearStepper(grid, profile, params, dt)
            stepper.run(state, int(np.ceil(horizon / dt)), trace)
        if cls == "stable":
            rep = stable_decay_report(trace, params, dt)
            payload.update(decay_report=rep, dt=dt)
            ok = rep["identity_ok"] and rep["h1_decay_ok"]
        else:
            payload.update(dt=dt, note="indeterminate profile: reported only")
            ok = True
    _atomic_write(os.path.join(rundir, "trace.csv"), trace.to_csv())
    return bool(ok), payload


def _cmd_escape_time(cfg: RunConfig, rundir: str):
    grid, profile, params = _build(cfg)
    res = solve_growth_rate(grid, profile, params,
                            GrowthOptions(fp_tol=cfg.fp_tol, seed=cfg.seed))
    ecfg = EscapeTimeConfig(profile, params, grid, tuple(cfg.deltas),
                            cfg.epsilon0, dt=cfg.dt, seed=cfg.seed)
    out = run_escape_time(ecfg, growth=res)
    lines = ["# ln(1/delta)  T_escape"]
    for d, t in zip(out.deltas, out.times):
        lines.append(f"{np.log(1 / d):.12g} {t:.12g}")
    _atomic_write(os.path.join(rundir, "escape_times.dat"),
                  "\n".join(lines) + "\n")
    for i, tr in enumerate(out.traces):
        _atomic_write(os.path.join(rundir, f"trace_delta{i}.csv"), tr.to_csv())
    ok = abs(out.slope - 1.0 / out.lambda_reference) <= 0.10 / out.lambda_reference
    ok &= all(b > a for a, b in zip(out.times, out.times[1:]))
    return bool(ok), out.to_dict()


def _cmd_stability_suite(cfg: RunConfig, rundir: str):
    grid, profile, params = _build(cfg)
    rep = run_stability_suite(profile, params, grid,
                              tuple(cfg.amplitudes), dt=cfg.dt,
                              t_end=cfg.t_end, seed=cfg.seed)
    ok = all(r["identity_ok"] and r["h1_decay_ok"] for r in rep.linear)
    if rep.nonlinear_hypothesis == "constant":
        ok &= all((not r.get("refused")) and r["identity_ok"]
                  and r["h1_decay_ok"] for r in rep.nonlinear)
    return bool(ok), rep.to_dict()


def _cmd_verify_all(cfg: RunConfig, rundir: str):
    stages = {}
    ok = True
    grid, profile, params = _build(cfg)
    res = solve_growth_rate(grid, profile, params,
                            GrowthOptions(fp_tol=cfg.fp_tol, seed=cfg.seed))
    stages["growth_rate"] = res.to_dict()
    ok &= res.verdict == "unstable" and res.pde_residual <= cfg.residual_tol
    if res.lambda_gap is not None:
        stages["cross_check_gap"] = res.lambda_gap
        ok &= res.lambda_gap <= 1e-6 * res.lambda_
    sharp = run_sharp_growth(profile, params, grid,
                             n_random=min(cfg.n_random, 5), growth=res,
                             seed=cfg.seed)
    stages["sharp_growth"] = sharp.to_dict()
    ok &= abs(sharp.eigen_rate - res.lambda_) <= 0.02 * res.lambda_
    ok &= sharp.max_random_rate <= res.lambda_ * 1.02
    stable = parse_profile("linear(2,-1)")
    srep = run_stability_suite(stable, params, grid, (1e-2,), dt=cfg.dt,
                               t_end=cfg.t_end, seed=cfg.seed)
    stages["stability_suite"] = srep.to_dict()
    ok &= all(r["identity_ok"] and r["h1_decay_ok"] for r in srep.linear)
    return bool(ok), stages


_DISPATCH = {
    "growth-rate": _cmd_growth_rate,
    "alpha-sweep": _cmd_alpha_sweep,
    "evolve-linear": lambda c, d: _cmd_evolve(c, d, "linear"),
    "evolve-nonlinear": lambda c, d: _cmd_evolve(c, d, "nonlinear"),
    "escape-time": _cmd_escape_time,
    "stability-suite": _cmd_stability_suite,
    "verify-all": _cmd_verify_all,
}


def run(cfg: RunConfig) -> int:
    rundir = _make_rundir(cfg)
    t0 = time.time()
    outcome, code, payload = "pass", PASS, {}
    try:
        ok, payload = _DISPATCH[cfg.command](cfg, rundir)
        if not ok:
            outcome, code = "certificate_failure", CERT_FAIL
    except (ProfileFormatError, ProfileError, ConfigError, ValueError) as e:
        outcome, code, payload = "usage_error", USAGE, {"error": str(e)}
    except (CFLError, EigenError, BracketError, RuntimeError,
            np.linalg.LinAlgError) as e:
        outcome, code, payload = "numerical_failure", NUMERIC, {"error": str(e)}
    _write_result(rundir, payload)
    manifest = {
        "config": cfg.to_dict(),
        "tool_version": __version__,
        "wall_time_s": time.time() - t0,
        "outcome": outcome,
        "exit_code": code,
    }
    _atomic_write(os.path.join(rundir, "manifest.json"),
                  json.dumps(manifest, indent=2, default=_json_default) + "\n")
    print(f"[{cfg.command}] outcome={outcome} rundir={rundir}")
    if "error" in payload:
        print(f"  {payload['error']}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rtspectra",
        description="Growth-rate spectra and verified evolution for "
                    "gravity-stratified viscous flow in a box")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--set", action="append", default=[], metavar="K=V",
                        help="override a config key")
    parser.add_argument("--out", help="output root directory")
    parser.add_argument("--seed", type=int)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return USAGE if e.code not in (0, None) else 0
    try:
        data = {}
        if args.config:
            with open(args.config) as f:
                cfg0 = parse_config(f.read())
            data = cfg0.to_dict()
        data["command"] = args.command
        for assignment in args.set:
            apply_override(data, assignment)
        if args.out:
            data["out"] = args.out
        if args.seed is not None:
            data["seed"] = args.seed
        cfg = RunConfig(**{k: v for k, v in data.items()})
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
