"""Command-line entry point: ``shmeta <subcommand> [flags]``.

Every subcommand resolves its configuration (defaults, ``--config`` file,
flags), validates it before running, and writes deterministic JSON/CSV
artifacts with the resolved config embedded. Exit status: 0 success,
2 configuration error, 3 numerical failure, 4 budget exceeded. Failures
print a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as C
from .energy import energy_eps, interpolation_margin
from .errors import ArgumentError, ShmetaError
from .field import Field, Grid, find_zeros, read_field_csv
from .flow import FlowState, evolve
from .io import dumps, write_csv, write_json
from .potential import linearization, sternberg_check, validate_hypotheses
from .profiles import (CLAMPED, ZERO_DIRICHLET, BoundaryData, bound_prediction, estimate_m1,
                       lower_bound_experiment, midpoint_decay_experiment, minimize_interval)
from .slowmotion import JumpFunction, SlowMotionConfig, jump_seed, timescale_experiment

BUILTIN_INITS = ("two-interface", "four-interface", "sine", "random")
# relative slack of the bound-vs-energy comparison: energy sums carry ~1e-15 rounding
BOUND_ROUNDOFF = 64 * np.finfo(float).eps


# --- parser --------------------------------------------------------------------

def _common(sp):
    sp.add_argument("--config", help="TOML configuration file")
    sp.add_argument("--out", dest="output.dir", help="output directory")
    sp.add_argument("--no-figures", dest="output.figures", action="store_const", const=False,
                    help="skip PNG figures")
    sp.add_argument("--seed", dest="output.seed", type=int)
    sp.add_argument("--parallelism", dest="output.parallelism", type=int)


def _physics(sp, epsilon=True, section="energy"):
    if epsilon:
        sp.add_argument("--epsilon", dest="energy.epsilon", type=float)
    sp.add_argument("--q", dest=f"{section}.q", type=float)


def build_parser():
    ap = argparse.ArgumentParser(prog="shmeta", description="1D Swift-Hohenberg metastability lab")
    ap.add_argument("--version", action="version", version=f"shmeta {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("constants", help="linearization constants and non-resonance report")
    _physics(sp, epsilon=False)
    sp.add_argument("--order", dest="constants_order", type=int, default=2)
    _common(sp)

    sp = sub.add_parser("validate-potential", help="check the double-well hypotheses")
    sp.add_argument("--n-samples", dest="validate.n_samples", type=int)
    sp.add_argument("--s-max", dest="validate.s_max", type=float)
    _common(sp)

    sp = sub.add_parser("energy", help="energy of a field stored as x,u CSV")
    _physics(sp)
    sp.add_argument("--input", required=True, help="x,u CSV (torus if x spans [0,1) uniformly)")
    _common(sp)

    sp = sub.add_parser("simulate", help="run the gradient flow on the unit torus")
    _physics(sp)
    sp.add_argument("--tau", dest="flow.tau", type=float)
    sp.add_argument("--t-end", dest="flow.t_end", type=float)
    sp.add_argument("--scheme", dest="flow.scheme", choices=("mm", "si"))
    sp.add_argument("--grid-n", dest="simulate.grid_n", type=int)
    sp.add_argument("--init", dest="simulate.init",
                    help=f"x,u CSV file or one of {', '.join(BUILTIN_INITS)}")
    sp.add_argument("--snap-stride", dest="simulate.snap_stride", type=int)
    sp.add_argument("--history-stride", dest="simulate.history_stride", type=int)
    _common(sp)

    sp = sub.add_parser("m1", help="optimal profile constant")
    _physics(sp, epsilon=False, section="m1")
    sp.add_argument("--L", dest="m1.L", type=float)
    sp.add_argument("--n", dest="m1.n", type=int)
    _common(sp)

    sp = sub.add_parser("minimize-profile", help="energy minimizer on an interval")
    _physics(sp)
    sp.add_argument("--length", dest="minimize_profile.length", type=float)
    sp.add_argument("--constraint", dest="minimize_profile.constraint", choices=(ZERO_DIRICHLET, CLAMPED))
    sp.add_argument("--h-over-eps", dest="minimize_profile.h_over_eps", type=float)
    _common(sp)

    sp = sub.add_parser("midpoint-decay", help="midpoint decay of interval minimizers")
    _physics(sp, epsilon=False, section="midpoint_decay")
    sp.add_argument("--d-over-eps", dest="midpoint_decay.d_over_eps", type=C.parse_float_list)
    _common(sp)

    sp = sub.add_parser("bound-sweep", help="energy defect of glued minimizers over an eps sweep")
    _physics(sp, epsilon=False, section="bound_sweep")
    sp.add_argument("--zeros", dest="bound_sweep.zeros", type=C.parse_float_list)
    sp.add_argument("--eps", dest="bound_sweep.eps", type=C.parse_float_list)
    sp.add_argument("--alpha0", dest="bound_sweep.alpha0", type=float)
    _common(sp)

    sp = sub.add_parser("slow-motion", help="departure times of near-jump initial data")
    sp.add_argument("--q", dest="slow_motion.q", type=float)
    sp.add_argument("--jumps", dest="slow_motion.jumps", type=C.parse_float_list)
    sp.add_argument("--delta", dest="slow_motion.delta", type=float)
    sp.add_argument("--eps", dest="slow_motion.eps", type=C.parse_float_list)
    sp.add_argument("--scheme", dest="slow_motion.scheme", choices=("mm", "si"))
    sp.add_argument("--tau", dest="slow_motion.tau", type=float)
    sp.add_argument("--budget-seconds", dest="slow_motion.budget_seconds", type=float)
    _common(sp)
    return ap


# --- helpers -------------------------------------------------------------------

def _figures_enabled(cfg):
    return bool(cfg["output"]["figures"])


def _emit(payload, cfg):
    body = {"schema_version": 1, "config": cfg}
    body.update(payload)
    sys.stdout.write(dumps(body))


def _table_rows(rows):
    """Scalar columns of a list of dicts, in first-row key order."""
    if not rows:
        return [], []
    header = [k for k, v in rows[0].items() if not isinstance(v, (list, tuple, dict))]
    return header, [[r.get(k) for k in header] for r in rows]


def _init_field(spec_text, n, eps, seed):
    grid = Grid.torus(n)
    if spec_text == "two-interface":
        return Field(grid, jump_seed(grid, JumpFunction((0.25, 0.75)), eps))
    if spec_text == "four-interface":
        return Field(grid, jump_seed(grid, JumpFunction((0.125, 0.375, 0.625, 0.875)), eps))
    if spec_text == "sine":
        return Field(grid, np.sin(2 * np.pi * grid.x))
    if spec_text == "random":
        rng = np.random.default_rng(seed)
        modes = 8
        coef = (rng.standard_normal(modes) + 1j * rng.standard_normal(modes)) / np.arange(1, modes + 1)
        uh = np.zeros(n // 2 + 1, dtype=complex)
        uh[1:modes + 1] = coef * n / 2
        u = np.fft.irfft(uh, n)
        return Field(grid, u / np.max(np.abs(u)))
    path = Path(spec_text)
    if not path.exists():
        raise ArgumentError(f"simulate.init: {spec_text!r} is neither a file nor one of {BUILTIN_INITS}")
    f = read_field_csv(path)
    if not f.grid.periodic:
        raise ArgumentError("simulate.init: the file does not hold a uniform torus grid on [0, 1)")
    return f


def _write_fit(out, result, cfg, xlabel, ylabel, extra=None):
    payload = result.to_dict()
    payload.update(extra or {})
    write_json(out / "fit.json", payload, cfg)
    header, rows = _table_rows(result.rows)
    write_csv(out / "table.csv", header, rows, cfg)
    if _figures_enabled(cfg):
        from .plotting import fit_figure
        fit_figure(result, out / "fit.png", xlabel, ylabel)


# --- subcommands ---------------------------------------------------------------

def cmd_constants(cfg, args):
    spec = C.build_potential(cfg)
    p = C.build_energy(cfg, spec)
    consts = linearization(spec, p.q)
    report = sternberg_check(consts, order=args.constants_order)
    _emit({"linearization": consts, "sternberg": report}, cfg)
    return 0


def cmd_validate(cfg, args):
    spec = C.build_potential(cfg)
    v = cfg["validate"]
    report = validate_hypotheses(spec, int(v["n_samples"]), float(v["s_max"]))
    _emit({"validation": report, "passed": report.passed}, cfg)
    if not report.passed:
        failed = [c.name for c in report.checks if not c.passed]
        raise ArgumentError(f"potential fails hypotheses {failed}")
    return 0


def cmd_energy(cfg, args):
    spec = C.build_potential(cfg)
    p = C.build_energy(cfg, spec)
    path = Path(args.input)
    if not path.exists():
        raise ArgumentError(f"input: file not found: {path}")
    f = read_field_csv(path)
    margin = interpolation_margin(f, p, spec)
    # a negative margin is the empirical sign that q is too large for this field
    _emit({"input": str(path), "grid": {"topology": f.grid.topology, "n": f.grid.n},
           "energy": energy_eps(f, p, spec),
           "interpolation": {"margin": margin, "holds": margin >= 0}}, cfg)
    return 0


def cmd_simulate(cfg, args):
    spec = C.build_potential(cfg)
    p = C.build_energy(cfg, spec)
    fc = C.build_flow(cfg)
    s = cfg["simulate"]
    n = int(s["grid_n"])
    if n < 16:
        raise ArgumentError("simulate.grid_n must be at least 16")
    out = C.output_dir(cfg, "simulate")
    u0 = _init_field(str(s["init"]), n, p.epsilon, cfg["output"]["seed"])
    state = FlowState.initial(u0, p, spec)

    def ledger(st):
        e = st.energy
        return (e.total, e.potential_term, e.gradient_term, e.hessian_term, st.dissipation_accum)

    traj = evolve(state, fc, p, spec, observers={"ledger": ledger},
                  observer_stride=fc.history_stride)
    rows = [[t, *vals] for t, vals in traj.observations["ledger"]]
    if rows[-1][0] != traj.final.time:
        rows.append([traj.final.time, *ledger(traj.final)])
    write_csv(out / "energy.csv", ["t", "total", "potential", "gradient", "hessian", "dissipation"],
              rows, cfg)
    snapdir = out / "snapshots"
    x = u0.grid.x
    for t, u in zip(traj.snapshot_times, traj.snapshots):
        write_csv(snapdir / f"t_{t:.9e}.csv", ["x", "u"], zip(x.tolist(), u.tolist()), cfg)
    E = np.array([r[1] for r in rows])
    summary = {
        "steps": traj.final.step_index,
        "final_time": traj.final.time,
        "E0": E[0],
        "E_final": E[-1],
        "max_relative_energy_increase": float(max(0.0, np.max(np.diff(E)) / abs(E[0]))) if E.size > 1 else 0.0,
        "dissipation": traj.dissipation_accum,
        "dissipation_residual": traj.dissipation_residual(),
        "inner_iterations": traj.inner_iters,
        "final_zeros": find_zeros(traj.final.field).tolist(),
        "snapshots": len(traj.snapshots),
    }
    write_json(out / "run.json", {"summary": summary}, cfg)
    if _figures_enabled(cfg):
        from .plotting import energy_figure, snapshots_figure
        energy_figure([r[0] for r in rows], E, [r[5] for r in rows], out / "energy.png")
        if traj.snapshots:
            snapshots_figure(x, traj.snapshots, traj.snapshot_times, out / "snapshots.png")
    _emit({"out": str(out), "summary": summary}, cfg)
    return 0


def cmd_m1(cfg, args):
    spec = C.build_potential(cfg)
    p = C.build_experiment_params(cfg, "m1", spec)
    m = cfg["m1"]
    consts = estimate_m1(p.q, spec, float(m["L"]), int(m["n"]))
    out = C.output_dir(cfg, "m1")
    write_json(out / "m1.json", {"m1": consts}, cfg)
    _emit({"out": str(out), "m1": consts}, cfg)
    return 0


def cmd_minimize_profile(cfg, args):
    spec = C.build_potential(cfg)
    p = C.build_energy(cfg, spec)
    mp = cfg["minimize_profile"]
    length = float(mp["length"])
    step = float(mp["h_over_eps"]) * p.epsilon
    if length <= 0 or step <= 0:
        raise ArgumentError("minimize_profile.length and h_over_eps must be positive")
    grid = Grid.interval(0.0, length, int(round(length / step)) + 1)
    bdata = None
    if mp["constraint"] == CLAMPED:
        bdata = C._field("minimize_profile", lambda: BoundaryData(
            tuple(mp["alpha"]), tuple(mp["beta"]), int(mp["well"])))
    m = minimize_interval(grid, mp["constraint"], p, spec, bdata)
    out = C.output_dir(cfg, "minimize-profile")
    write_csv(out / "profile.csv", ["x", "u"], zip(grid.x.tolist(), m.field.samples.tolist()), cfg)
    payload = {"report": m.report, "zeros": find_zeros(m.field).tolist()}
    write_json(out / "profile.json", payload, cfg)
    if _figures_enabled(cfg):
        from .plotting import profile_figure
        profile_figure(grid.x, m.field.samples, out / "profile.png")
    _emit({"out": str(out), **payload}, cfg)
    return 0


def cmd_midpoint_decay(cfg, args):
    spec = C.build_potential(cfg)
    p = C.build_experiment_params(cfg, "midpoint_decay", spec)
    D = C._field("midpoint_decay.d_over_eps", lambda: C.parse_float_list(cfg["midpoint_decay"]["d_over_eps"]))
    result = midpoint_decay_experiment(D, p, spec)
    out = C.output_dir(cfg, "midpoint-decay")
    _write_fit(out, result, cfg, "$d/\\varepsilon$", "log midpoint distance",
               {"slope_error": result.slope_error()})
    _emit({"out": str(out), "fit": result.fit, "expected_slope": result.expected_slope}, cfg)
    return 0


def cmd_bound_sweep(cfg, args):
    spec = C.build_potential(cfg)
    p = C.build_experiment_params(cfg, "bound_sweep", spec)
    b = cfg["bound_sweep"]
    zeros = C._field("bound_sweep.zeros", lambda: C.parse_float_list(b["zeros"]))
    eps = C._field("bound_sweep.eps", lambda: C.parse_float_list(b["eps"]))
    if not eps or min(eps) <= 0:
        raise ArgumentError("bound_sweep.eps: values must be positive")
    result = lower_bound_experiment(zeros, eps, p, spec, alpha0=float(b["alpha0"]))
    extra = {"slope_error": result.slope_error()}
    if result.fit is not None:
        gamma = -result.expected_slope
        Cfit = math.exp(result.fit.intercept)
        checks = []
        for r in result.rows:
            bound = bound_prediction(result.extra["gaps"], r["epsilon"], result.extra["m1"], Cfit, gamma)
            checks.append({"epsilon": r["epsilon"], "bound": bound, "energy": r["energy"],
                           "holds": bound <= r["energy"] + BOUND_ROUNDOFF * abs(r["energy"])})
        extra["bound_constant"] = Cfit
        extra["bound_check"] = checks
    out = C.output_dir(cfg, "bound-sweep")
    _write_fit(out, result, cfg, "$\\min_k d_k/\\varepsilon$", "log energy defect", extra)
    _emit({"out": str(out), "fit": result.fit, "expected_slope": result.expected_slope,
           **{k: v for k, v in extra.items() if k != "bound_check"}}, cfg)
    return 0


def cmd_slow_motion(cfg, args):
    spec = C.build_potential(cfg)
    q = C.build_experiment_params(cfg, "slow_motion", spec).q
    sm = cfg["slow_motion"]
    jumps = C._field("slow_motion.jumps", lambda: JumpFunction(tuple(C.parse_float_list(sm["jumps"]))))
    smc = C._field("slow_motion", lambda: SlowMotionConfig(
        delta=float(sm["delta"]), eps_values=tuple(C.parse_float_list(sm["eps"])), q=q,
        h_kind=sm["h_kind"], h_power=float(sm["h_power"]), scheme=sm["scheme"], tau=float(sm["tau"]),
        t_max=float(sm["t_max"]), budget_seconds=float(sm["budget_seconds"]),
        parallelism=int(cfg["output"]["parallelism"])))
    C._field("slow_motion.delta", lambda: smc.check_against(jumps))
    result = timescale_experiment(jumps, smc, spec)
    out = C.output_dir(cfg, "slow-motion")
    header, rows = _table_rows(result.rows)
    write_csv(out / "departures.csv", header, rows, cfg)
    write_json(out / "fit.json", result.to_dict(), cfg)
    if _figures_enabled(cfg):
        from .plotting import fit_figure
        fit_figure(result, out / "fit.png", "$1/\\varepsilon$", "log departure time")
    _emit({"out": str(out), "fit": result.fit, "expected_slope": result.expected_slope,
           "partial": result.extra["partial"], "excluded": result.excluded}, cfg)
    return 4 if result.extra["partial"] else 0


SECTIONS = {
    "constants": ("potential", "energy"),
    "validate-potential": ("potential", "validate"),
    "energy": ("potential", "energy"),
    "simulate": ("potential", "energy", "flow", "simulate", "output"),
    "m1": ("potential", "m1", "output"),
    "minimize-profile": ("potential", "energy", "minimize_profile", "output"),
    "midpoint-decay": ("potential", "midpoint_decay", "output"),
    "bound-sweep": ("potential", "bound_sweep", "output"),
    "slow-motion": ("potential", "slow_motion", "output"),
}

COMMANDS = {
    "constants": cmd_constants,
    "validate-potential": cmd_validate,
    "energy": cmd_energy,
    "simulate": cmd_simulate,
    "m1": cmd_m1,
    "minimize-profile": cmd_minimize_profile,
    "midpoint-decay": cmd_midpoint_decay,
    "bound-sweep": cmd_bound_sweep,
    "slow-motion": cmd_slow_motion,
}


def _report_error(exc, code):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("diagnostics", "time"):
        val = getattr(exc, attr, None)
        if val is not None:
            err[attr] = val
    report = getattr(exc, "report", None)
    if report is not None:
        err["report"] = report
    sys.stderr.write(dumps(err))


def run(argv=None):
    """Parse ``argv``, run the subcommand, and return the exit status."""
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if "." in k}
    try:
        full = C.resolve(args.config, overrides)
        cfg = {"command": args.command, **{k: full[k] for k in SECTIONS[args.command]}}
        return COMMANDS[args.command](cfg, args)
    except ShmetaError as exc:
        _report_error(exc, exc.exit_code)
        return exc.exit_code
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        _report_error(exc, 3)
        return 3


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
