"""Command-line surface: one subcommand per operation pipeline.

Exit codes: 0 success, 2 undecided verdict, 3 config error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULTS_HELP, CommandOptions, ConfigError, parse_config
from .criticality import find_lambda_star, find_p_star, sweep_matrix, sweep_T_vs_lambda
from .domain import (
    AnalysisError,
    ConfigurationError,
    NumericalError,
    ProblemSpec,
    evaluate_profile,
    profile_flags,
)
from .elliptic import SteadyExists, compute_spectral, lambda_bounds, solve_minimal_steady
from .outputs import (
    IOFailure,
    RunManifest,
    SweepStore,
    fmt,
    load_trajectory,
    spec_echo,
    write_run_outputs,
)
from .parabolic import Quenched, Undecided, integrate
from .quench import (
    control_node,
    energy_of_frame,
    nondegeneracy_probe,
    quench_report,
    rescale_similarity,
    richardson_quench_time,
)

EXIT_OK = 0
EXIT_UNDECIDED = 2
EXIT_CONFIG = 3
EXIT_IO = 4


def _manifest(command: str, spec: ProblemSpec) -> RunManifest:
    return RunManifest(command=command, version=__version__, spec=spec_echo(spec))


def _clean(x):
    if x is None or isinstance(x, (str, bool, int)):
        return x
    x = float(x)
    return None if math.isnan(x) else x


def spec_from_echo(echo: dict) -> ProblemSpec:
    """Inverse of outputs.spec_echo."""
    from .domain import (
        Affine, Bump, BumpInit, Constant, Interval, RadialBall, ScaledSteady,
        SolverControls, Zero,
    )

    d = dict(echo["domain"])
    kind = d.pop("kind")
    domain = Interval(**d) if kind == "interval" else RadialBall(**d)
    p = dict(echo["profile"])
    pk = p.pop("kind")
    profile = {"constant": Constant, "bump": Bump, "affine": Affine}[pk](**p)
    i = dict(echo["initial"])
    ik = i.pop("kind")
    initial = {"zero": Zero, "scaledsteady": ScaledSteady, "bumpinit": BumpInit}[ik](**i)
    return ProblemSpec(
        domain=domain,
        resolution=echo["resolution"],
        profile=profile,
        lam=echo["lambda"],
        pressure=echo["pressure"],
        initial=initial,
        controls=SolverControls(**echo["solver"]),
    )


def _quench_analyses(traj, spec: ProblemSpec, opts: CommandOptions):
    """Full post-processing of a quenched run; returns (headline, similarity)."""
    head: dict = {}
    similarity = None
    try:
        rep = quench_report(traj, spec)
        head.update(
            t_quench=rep.t_fit.t_hat,
            t_quench_r2=rep.t_fit.r2,
            t_quench_terminal=rep.t_terminal,
            center=rep.center_coord,
            quench_set_size=len(rep.quench_set.indices),
            quench_set_eta=rep.quench_set.eta,
            origin_is_argmin=rep.quench_set.origin_is_argmin,
            rate_exponent=rep.rate.exponent,
            rate_amplitude=rep.rate.amplitude,
            rate_amplitude_predicted=rep.rate.amplitude_predicted,
            envelope_M=rep.envelopes.m_lower,
            envelope_C=rep.envelopes.c_upper,
            envelope_M1=rep.envelopes.m_grad1,
            envelope_M2=rep.envelopes.m_grad2,
            envelopes_ok=rep.envelopes.ok,
            bound_T=rep.bound_t.value,
            bound_T_applicable=rep.bound_t.applicable,
            bound_T_ok=rep.bound_t_ok,
        )
        frames = rescale_similarity(traj, rep.t_terminal, rep.center_index, spec)
        ctrl = control_node(spec, rep.center_index, opts.control_offset)
        ctrl_frames = rescale_similarity(traj, rep.t_terminal, ctrl, spec)
        nd = nondegeneracy_probe(frames, ctrl_frames)
        head.update(
            nondeg_center_dev=nd.center_dev_last_decade,
            nondeg_center_bounded=nd.center_bounded,
            nondeg_control_final=nd.control_final,
            nondeg_consistent=nd.consistent,
        )
        e_map = {}
        try:
            energy = energy_of_frame(frames, spec)
            head.update(
                energy_decay_ok=energy.decay_ok,
                energy_worst_excess=energy.worst_excess,
            )
            e_map = {float(se): (float(ee), float(te)) for se, ee, te in
                     zip(energy.s, energy.energy, energy.tol)}
        except AnalysisError as exc:
            head["energy_note"] = str(exc)
        e_col = np.array([e_map.get(float(sv), (math.nan, math.nan))[0] for sv in frames.s])
        tol_col = np.array([e_map.get(float(sv), (math.nan, math.nan))[1] for sv in frames.s])
        similarity = (frames.s, frames.w0, e_col, tol_col)
    except (AnalysisError, NumericalError) as exc:
        head["analysis_note"] = str(exc)
    return head, similarity


def cmd_simulate(spec, opts, out, command="simulate"):
    t0 = time.perf_counter()
    traj, verdict = integrate(spec)
    manifest = _manifest(command, spec)
    manifest.verdict = verdict.kind
    head: dict = {"final_gap": float(traj.gap[-1]), "t_final": float(traj.t[-1])}
    similarity = None
    if isinstance(verdict, Quenched):
        head["dt_underflow"] = verdict.dt_underflow
        qh, similarity = _quench_analyses(traj, spec, opts)
        head.update(qh)
    elif isinstance(verdict, Undecided):
        head["horizon"] = verdict.horizon
    else:
        head["steady_residual"] = verdict.residual
        head["fast_path"] = verdict.fast_path
    if command == "report":
        fit_h, fit_h2, rel, flagged = richardson_quench_time(spec) if isinstance(
            verdict, Quenched
        ) else (None, None, None, None)
        if fit_h is not None:
            head.update(
                t_quench_refined_grid=fit_h2.t_hat,
                t_quench_richardson_rel=rel,
                t_quench_richardson_flag=flagged,
            )
    manifest.headline = {k: _clean(v) for k, v in head.items()}
    manifest.wall_seconds = time.perf_counter() - t0
    write_run_outputs(traj, manifest, out, similarity=similarity)
    print(f"{command}: verdict={verdict.kind} out={out}")
    for k in sorted(manifest.headline):
        print(f"  {k} = {manifest.headline[k]}")
    return EXIT_UNDECIDED if isinstance(verdict, Undecided) else EXIT_OK


def cmd_steady(spec, opts, out):
    t0 = time.perf_counter()
    manifest = _manifest("steady", spec)
    grid = spec.grid()
    try:
        res = solve_minimal_steady(spec)
    except NumericalError as exc:
        manifest.verdict = "undecided"
        manifest.headline = {"note": str(exc)}
        _write_small(out, manifest)
        print(f"steady: undecided ({exc})")
        return EXIT_UNDECIDED
    if isinstance(res, SteadyExists):
        manifest.verdict = "exists"
        manifest.headline = {
            "max_u": float(np.max(res.u_min)),
            "residual": res.residual,
            "iterations": res.iterations,
        }
        cols = {"steady.csv": ("x,u", (grid.x, res.u_min))}
    else:
        manifest.verdict = "not_found"
        manifest.headline = {"max_u": res.max_u, "iterations": res.iterations}
        cols = {}
    manifest.wall_seconds = time.perf_counter() - t0
    _write_small(out, manifest, cols)
    print(f"steady: {manifest.verdict} " + " ".join(
        f"{k}={v}" for k, v in manifest.headline.items()))
    return EXIT_OK


def _write_small(out, manifest, csvs: dict | None = None):
    from .outputs import _write_csv

    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for name, (header, columns) in (csvs or {}).items():
            n = _write_csv(out / name, header, columns)
            files.append({"path": name, "bytes": n})
        manifest.files = files
        (out / "manifest.json").write_text(manifest.to_json() + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write outputs under {out}: {exc}") from exc


def cmd_eigen(spec, opts, out):
    t0 = time.perf_counter()
    grid = spec.grid()
    f, c0 = evaluate_profile(spec.profile, grid)
    sp = compute_spectral(grid, spec.domain, f)
    manifest = _manifest("eigen", spec)
    manifest.headline = {
        "mu0": sp.mu0,
        "int_torsion": sp.int_torsion,
        "int_torsion_f": sp.int_torsion_f,
        "int_phi0": sp.int_phi0,
        "int_f_phi0": sp.int_f_phi0,
        "l1_lap_phi0": sp.l1_lap_phi0,
        "max_torsion": sp.max_torsion,
        "volume": sp.volume,
        "c0": c0,
    }
    manifest.wall_seconds = time.perf_counter() - t0
    _write_small(out, manifest, {"eigen.csv": ("x,phi0,torsion", (grid.x, sp.phi0, sp.torsion))})
    print(f"eigen: mu0={fmt(sp.mu0)} max_torsion={fmt(sp.max_torsion)} out={out}")
    return EXIT_OK


def cmd_bounds(spec, opts, out):
    t0 = time.perf_counter()
    grid = spec.grid()
    f, c0 = evaluate_profile(spec.profile, grid)
    flags = profile_flags(spec.profile, grid, spec.domain)
    sp = compute_spectral(grid, spec.domain, f)
    pressures = opts.pressures or [spec.pressure]
    rows = {"P": [], "upper_torsion": [], "upper_eigen": [], "lower_operational": []}
    for P in pressures:
        b = lambda_bounds(P, f, sp, pstar_operational=opts.pstar)
        rows["P"].append(P)
        rows["upper_torsion"].append(b.upper_torsion)
        rows["upper_eigen"].append(b.upper_eigen)
        rows["lower_operational"].append(
            b.lower_operational if b.lower_operational is not None else math.nan
        )
    b0 = lambda_bounds(pressures[0], f, sp, pstar_operational=opts.pstar)
    manifest = _manifest("bounds", spec)
    manifest.headline = {
        "mu0": sp.mu0,
        "upper_nopressure": 4.0 * sp.mu0 / 27.0,
        "upper_torsion": b0.upper_torsion,
        "upper_eigen": b0.upper_eigen,
        "lower_operational": _clean(b0.lower_operational),
        "no_admissible_lambda": b0.no_admissible_lambda,
        "c0": c0,
        "grad_positive": flags.grad_positive,
        "boundary_nonincreasing": flags.boundary_noninc,
    }
    manifest.wall_seconds = time.perf_counter() - t0
    _write_small(out, manifest, {
        "bounds.csv": (
            "P,upper_torsion,upper_eigen,lower_operational",
            (rows["P"], rows["upper_torsion"], rows["upper_eigen"], rows["lower_operational"]),
        )
    })
    print(f"bounds: mu0={fmt(sp.mu0)} upper_torsion={fmt(b0.upper_torsion)} "
          f"upper_eigen={fmt(b0.upper_eigen)} out={out}")
    return EXIT_OK


def cmd_critical(spec, opts, out):
    t0 = time.perf_counter()
    res = find_lambda_star(spec, pressure=spec.pressure, tol=opts.tol,
                           pstar_operational=opts.pstar)
    manifest = _manifest("critical", spec)
    manifest.verdict = "no_admissible_lambda" if res.no_admissible_lambda else "bracketed"
    manifest.headline = {
        "lam_star": res.lam_star,
        "bracket_lo": res.bracket[0],
        "bracket_hi": res.bracket[1],
        "tol": res.tol,
        "horizon": res.horizon,
        "horizon_limited": res.horizon_limited,
        "upper_torsion": res.bounds.upper_torsion,
        "upper_eigen": res.bounds.upper_eigen,
        "upper_nopressure": _clean(res.bounds.upper_nopressure),
        "lower_operational": _clean(res.bounds.lower_operational),
        "probes": len(res.log),
    }
    manifest.wall_seconds = time.perf_counter() - t0
    lam_col = [l[0] for l in res.log]
    p_col = [l[1] for l in res.log]
    verd = [l[2] for l in res.log]
    tmax_col = [l[3] for l in res.log]
    _write_small(out, manifest)
    _write_probe_log(Path(out) / "critical_log.csv", lam_col, p_col, verd, tmax_col)
    print(f"critical: lam_star={fmt(res.lam_star)} bracket=({fmt(res.bracket[0])}, "
          f"{fmt(res.bracket[1])}) horizon_limited={res.horizon_limited} out={out}")
    return EXIT_OK


def _write_probe_log(path, lams, ps, verdicts, tmaxes):
    lines = ["lambda,pressure,verdict,t_max"]
    for lam, p, v, tm in zip(lams, ps, verdicts, tmaxes):
        lines.append(f"{fmt(lam)},{fmt(p)},{v},{fmt(tm)}")
    path.write_text("\n".join(lines) + "\n")


def cmd_pstar(spec, opts, out):
    t0 = time.perf_counter()
    res = find_p_star(spec, tol=opts.tol)
    manifest = _manifest("pstar", spec)
    manifest.verdict = "bracketed"
    manifest.headline = {
        "p_star_operational": res.p_star,
        "bracket_lo": res.bracket[0],
        "bracket_hi": res.bracket[1],
        "lam_tiny": res.lam_tiny,
        "mu0": res.mu0,
        "within_eigen_ceiling": res.within_eigen_ceiling,
        "horizon_limited": res.horizon_limited,
        "probes": len(res.log),
    }
    manifest.wall_seconds = time.perf_counter() - t0
    _write_small(out, manifest)
    _write_probe_log(
        Path(out) / "pstar_log.csv",
        [l[0] for l in res.log], [l[1] for l in res.log],
        [l[2] for l in res.log], [l[3] for l in res.log],
    )
    print(f"pstar: operational P*={fmt(res.p_star)} (mu0={fmt(res.mu0)}) out={out}")
    return EXIT_OK


def cmd_sweep(spec, opts, out):
    t0 = time.perf_counter()
    if not opts.lambdas:
        raise ConfigError("sweep needs `lambdas = v1, v2, ...` in [command]")
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    store = SweepStore(out / "store.jsonl")
    pressures = opts.pressures or [spec.pressure]
    manifest = _manifest("sweep", spec)
    head: dict = {}
    if len(pressures) == 1:
        res = sweep_T_vs_lambda(opts.lambdas, pressures[0], spec, known=store.load())
        head.update(
            slope=_clean(res.slope),
            monotone_decreasing=res.monotone_decreasing,
            excluded=len(res.excluded),
        )
        records = res.records
    else:
        records, violations = sweep_matrix(opts.lambdas, pressures, spec,
                                           known=store.load())
        head.update(
            points=len(records),
            quenched=sum(1 for r in records if r.verdict == "quenched"),
            violations=len(violations),
        )
    store.merge(records)
    rows = sorted(records, key=lambda r: (r.pressure, r.lam))
    lines = ["lambda,pressure,verdict,T"]
    for r in rows:
        lines.append(f"{fmt(r.lam)},{fmt(r.pressure)},{r.verdict},{fmt(r.t_hat)}")
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    manifest.headline = head
    manifest.verdict = "swept"
    manifest.wall_seconds = time.perf_counter() - t0
    _write_small(out, manifest)
    print("sweep: " + " ".join(f"{k}={v}" for k, v in head.items()) + f" out={out}")
    return EXIT_OK


def cmd_rate(spec, opts, out):
    if not opts.run:
        raise ConfigError("rate needs `run = <dir>` in [command] (a simulate output)")
    traj, run_manifest = load_trajectory(opts.run)
    run_spec = spec_from_echo(run_manifest.spec)
    rep = quench_report(traj, run_spec)
    manifest = _manifest("rate", run_spec)
    manifest.verdict = run_manifest.verdict
    manifest.headline = {
        "t_quench": rep.t_fit.t_hat,
        "rate_exponent": rep.rate.exponent,
        "rate_amplitude": rep.rate.amplitude,
        "rate_amplitude_predicted": rep.rate.amplitude_predicted,
        "rate_r2": rep.rate.r2,
        "envelope_M": rep.envelopes.m_lower,
        "envelope_C": rep.envelopes.c_upper,
        "envelope_M1": rep.envelopes.m_grad1,
        "envelope_M2": rep.envelopes.m_grad2,
    }
    _write_small(out, manifest)
    print(f"rate: exponent={rep.rate.exponent:.5f} amplitude={rep.rate.amplitude:.5f} "
          f"predicted={rep.rate.amplitude_predicted:.5f} out={out}")
    return EXIT_OK


def cmd_similarity(spec, opts, out):
    if not opts.run:
        raise ConfigError("similarity needs `run = <dir>` in [command]")
    traj, run_manifest = load_trajectory(opts.run)
    run_spec = spec_from_echo(run_manifest.spec)
    rep = quench_report(traj, run_spec)
    frames = rescale_similarity(traj, rep.t_terminal, rep.center_index, run_spec)
    energy = energy_of_frame(frames, run_spec)
    manifest = _manifest("similarity", run_spec)
    manifest.verdict = run_manifest.verdict
    manifest.headline = {
        "center": rep.center_coord,
        "w_limit": rep.rate.amplitude_predicted,
        "energy_decay_ok": energy.decay_ok,
        "energy_worst_excess": energy.worst_excess,
        "frames": int(frames.s.size),
    }
    e_map = {float(se): (float(ee), float(te)) for se, ee, te in
             zip(energy.s, energy.energy, energy.tol)}
    e_col = [e_map.get(float(sv), (math.nan, math.nan))[0] for sv in frames.s]
    tol_col = [e_map.get(float(sv), (math.nan, math.nan))[1] for sv in frames.s]
    _write_small(out, manifest, {
        "similarity.csv": ("s,w0,E,tolE", (frames.s, frames.w0, e_col, tol_col))
    })
    print(f"similarity: frames={frames.s.size} decay_ok={energy.decay_ok} out={out}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "report": lambda spec, opts, out: cmd_simulate(spec, opts, out, command="report"),
    "steady": cmd_steady,
    "eigen": cmd_eigen,
    "bounds": cmd_bounds,
    "critical": cmd_critical,
    "pstar": cmd_pstar,
    "sweep": cmd_sweep,
    "rate": cmd_rate,
    "similarity": cmd_similarity,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memsq",
        description="Quenching laboratory for the MEMS equation with pressure",
        epilog=DEFAULTS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"memsq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("config", help="path to the config file")
        p.add_argument("--out", help="output directory (default: [command] out or ./memsq_out)")
        p.add_argument("--run", help="existing run directory (rate/similarity)")
        p.add_argument("--pstar", type=float, help="operational pressure threshold for bounds")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        spec, opts = parse_config(text)
        if opts.kind is not None and opts.kind != args.command:
            raise ConfigError(
                f"[command] kind = {opts.kind!r} does not match subcommand {args.command!r}"
            )
        if args.run:
            opts.run = args.run
        if args.pstar is not None:
            opts.pstar = args.pstar
        out = args.out or opts.out or "memsq_out"
        return COMMANDS[args.command](spec, opts, out)
    except (ConfigError, ConfigurationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IOFailure as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AnalysisError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
