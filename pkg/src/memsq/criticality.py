"""Critical-parameter searches (pull-in voltage, pressure threshold),
quenching-time sweeps and monotonicity validation."""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import ConfigurationError, ProblemSpec, Zero, evaluate_profile
from .elliptic import LambdaBounds, compute_spectral, lambda_bounds
from .parabolic import Quenched, RunVerdict, Undecided, classify, integrate
from .quench import estimate_quench_time

__all__ = [
    "CriticalityResult",
    "PStarResult",
    "SweepRecord",
    "SweepResult",
    "MonotonicityResult",
    "find_lambda_star",
    "find_p_star",
    "sweep_T_vs_lambda",
    "monotonicity_matrix",
    "classification_horizon",
]

BRACKET_MARGIN = 0.05       # seed the upper bracket 5% above the analytic bound
LAMBDA_TINY_FACTOR = 1e-4   # operational pressure threshold probes at 1e-4*mu0


def classification_horizon(mu0: float) -> float:
    """Several diffusive relaxation times of the slowest stable mode."""
    return 50.0 / mu0


def max_workers() -> int:
    raw = os.environ.get("MEMSQ_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return max(1, n) if n else 1


@dataclass
class CriticalityResult:
    pressure: float
    lam_star: float
    bracket: tuple[float, float]
    log: list = field(default_factory=list)   # (lambda, verdict kind, t_max used)
    bounds: LambdaBounds | None = None
    horizon: float = 0.0
    horizon_limited: bool = False
    no_admissible_lambda: bool = False
    tol: float = 1e-3


def _probe(spec: ProblemSpec, value: float, pressure: float, t_max: float,
           log: list) -> RunVerdict:
    probe_spec = spec.with_(
        lam=value, pressure=pressure, initial=Zero(),
        controls=replace(spec.controls, t_max=t_max),
    )
    verdict = classify(probe_spec)
    log.append((value, pressure, verdict.kind, t_max))
    return verdict


def _bisect(spec: ProblemSpec, lo: float, hi: float, tol: float, horizon: float,
            probe) -> tuple[float, float, bool]:
    """Shrink [lo, hi] (lo global, hi quenched) to relative width tol.

    An undecided probe gets one horizon doubling; if still undecided the
    endpoint on the side the probe leans away from moves halfway toward it
    (conservative, flagged horizon-limited).
    """
    horizon_limited = False
    while (hi - lo) / hi > tol:
        mid = 0.5 * (lo + hi)
        verdict = probe(mid, horizon)
        if isinstance(verdict, Undecided):
            verdict = probe(mid, 2.0 * horizon)
        if isinstance(verdict, Undecided):
            horizon_limited = True
            # gap below the global margin cannot settle to a steady state:
            # leaning quenched; otherwise leaning global
            if verdict.final_gap < spec.controls.gap_margin:
                hi = 0.5 * (mid + hi)
            else:
                lo = 0.5 * (lo + mid)
        elif isinstance(verdict, Quenched):
            hi = mid
        else:
            lo = mid
    return lo, hi, horizon_limited


def find_lambda_star(
    spec: ProblemSpec,
    pressure: float | None = None,
    tol: float = 1e-3,
    pstar_operational: float | None = None,
    bracket: tuple[float, float] | None = None,
) -> CriticalityResult:
    """Bisect the pull-in voltage at the given pressure.

    The initial bracket is [0, min(analytic upper bounds) + margin] unless a
    seed bracket is supplied (e.g. from a coarser grid); probes classify
    with u0 = 0 at the diffusive horizon 50/mu0.
    """
    P = spec.pressure if pressure is None else pressure
    grid = spec.grid()
    f, _ = evaluate_profile(spec.profile, grid)
    spectral = compute_spectral(grid, spec.domain, f)
    bounds = lambda_bounds(P, f, spectral, pstar_operational=pstar_operational)
    horizon = classification_horizon(spectral.mu0)
    log: list = []
    if bounds.no_admissible_lambda:
        return CriticalityResult(
            pressure=P, lam_star=0.0, bracket=(0.0, 0.0), log=log, bounds=bounds,
            horizon=horizon, no_admissible_lambda=True, tol=tol,
        )

    def probe(lam, t_max):
        return _probe(spec, lam, P, t_max, log)

    if bracket is not None:
        lo, hi = bracket
    else:
        lo = 0.0
        hi = min(bounds.upper_torsion, bounds.upper_eigen) * (1.0 + BRACKET_MARGIN)
    v_lo = probe(lo, horizon)
    v_hi = probe(hi, horizon)
    if isinstance(v_lo, Quenched) or not isinstance(v_hi, Quenched):
        raise ConfigurationError(
            f"bracket endpoints do not separate: lambda={lo} -> {v_lo.kind}, "
            f"lambda={hi} -> {v_hi.kind}"
        )
    lo, hi, limited = _bisect(spec, lo, hi, tol, horizon, probe)
    return CriticalityResult(
        pressure=P, lam_star=0.5 * (lo + hi), bracket=(lo, hi), log=log,
        bounds=bounds, horizon=horizon, horizon_limited=limited, tol=tol,
    )


@dataclass
class PStarResult:
    p_star: float
    bracket: tuple[float, float]
    lam_tiny: float
    mu0: float
    within_eigen_ceiling: bool   # operational P* <= mu0
    log: list = field(default_factory=list)
    horizon: float = 0.0
    horizon_limited: bool = False
    tol: float = 1e-3


def find_p_star(spec: ProblemSpec, tol: float = 1e-3) -> PStarResult:
    """Operational pressure threshold: quench/global boundary in P at a tiny
    fixed voltage (labeled operational; the eigenvalue ceiling still applies)."""
    grid = spec.grid()
    f, _ = evaluate_profile(spec.profile, grid)
    spectral = compute_spectral(grid, spec.domain, f)
    mu0 = spectral.mu0
    lam_tiny = LAMBDA_TINY_FACTOR * mu0
    horizon = classification_horizon(mu0)
    log: list = []

    def probe(P, t_max):
        probe_spec = spec.with_(
            lam=lam_tiny, pressure=P, initial=Zero(),
            controls=replace(spec.controls, t_max=t_max),
        )
        verdict = classify(probe_spec)
        log.append((lam_tiny, P, verdict.kind, t_max))
        return verdict

    lo = 0.0
    hi = mu0 * (1.0 + BRACKET_MARGIN)
    v_lo = probe(lo, horizon)
    v_hi = probe(hi, horizon)
    if isinstance(v_lo, Quenched) or not isinstance(v_hi, Quenched):
        raise ConfigurationError(
            f"pressure bracket endpoints do not separate: {v_lo.kind} / {v_hi.kind}"
        )
    lo, hi, limited = _bisect(spec, lo, hi, tol, horizon,
                              lambda P, tm: probe(P, tm))
    p_star = 0.5 * (lo + hi)
    return PStarResult(
        p_star=p_star, bracket=(lo, hi), lam_tiny=lam_tiny, mu0=mu0,
        within_eigen_ceiling=bool(p_star <= mu0), log=log, horizon=horizon,
        horizon_limited=limited, tol=tol,
    )


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRecord:
    key: str
    lam: float
    pressure: float
    domain_tag: str
    profile_tag: str
    resolution: int
    verdict: str
    t_hat: float           # NaN unless quenched
    digest: str

    def sort_key(self):
        return self.key


@dataclass
class SweepResult:
    records: list
    slope: float | None
    slope_window: tuple[float, float] | None
    monotone_decreasing: bool
    excluded: list


def _run_sweep_point(spec: ProblemSpec, lam: float, pressure: float) -> SweepRecord:
    point = spec.with_(lam=lam, pressure=pressure, initial=Zero())
    traj, verdict = integrate(point)
    t_hat = math.nan
    if isinstance(verdict, Quenched):
        t_hat = estimate_quench_time(traj, point).t_hat
    digest = hashlib.sha256(
        np.ascontiguousarray(traj.gap).tobytes() + np.ascontiguousarray(traj.t).tobytes()
    ).hexdigest()[:16]
    return SweepRecord(
        key=point.key(), lam=lam, pressure=pressure,
        domain_tag=point.domain.tag(), profile_tag=point.profile.tag(),
        resolution=point.resolution, verdict=verdict.kind, t_hat=t_hat, digest=digest,
    )


def _record_from_dict(d: dict) -> SweepRecord:
    return SweepRecord(**{k: d[k] for k in (
        "key", "lam", "pressure", "domain_tag", "profile_tag", "resolution",
        "verdict", "t_hat", "digest",
    )})


def _sweep_points(spec: ProblemSpec, points: list[tuple[float, float]],
                  known: dict | None = None) -> list[SweepRecord]:
    """Run the missing points (resume semantics) with optional threading."""
    known = known or {}
    reused = {}
    todo = []
    for lam, P in points:
        key = spec.with_(lam=lam, pressure=P, initial=Zero()).key()
        if key in known:
            reused[(lam, P)] = _record_from_dict(known[key])
        else:
            todo.append((lam, P))
    workers = max_workers()
    if workers == 1 or len(todo) <= 1:
        fresh = [_run_sweep_point(spec, lam, P) for lam, P in todo]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fresh = list(pool.map(lambda p: _run_sweep_point(spec, *p), todo))
    by_point = {(r.lam, r.pressure): r for r in fresh} | reused
    return [by_point[p] for p in points]


def sweep_T_vs_lambda(lams, pressure: float, spec: ProblemSpec,
                      known: dict | None = None) -> SweepResult:
    """Quenching time per voltage plus the log-log slope over the top decade."""
    lams = sorted(float(v) for v in lams)
    records = _sweep_points(spec, [(lam, pressure) for lam in lams], known)
    excluded = [r for r in records if r.verdict != "quenched"]
    quenched = [r for r in records if r.verdict == "quenched"]
    slope = None
    window = None
    if len(quenched) >= 2:
        top = max(r.lam for r in quenched)
        sel = [r for r in quenched if r.lam >= top / 10.0]
        if len(sel) >= 2:
            x = np.log([r.lam for r in sel])
            y = np.log([r.t_hat for r in sel])
            slope = float(np.polyfit(x, y, 1)[0])
            window = (top / 10.0, top)
    ts = [r.t_hat for r in quenched]
    monotone = all(b < a for a, b in zip(ts, ts[1:]))
    return SweepResult(
        records=records, slope=slope, slope_window=window,
        monotone_decreasing=monotone, excluded=excluded,
    )


def sweep_matrix(lams, pressures, spec: ProblemSpec,
                 known: dict | None = None) -> tuple[list, list]:
    """Tolerant (lambda, P) sweep for phase diagrams: records all verdicts,
    reports quenching-time monotonicity violations among quenched pairs."""
    lams = sorted(float(v) for v in lams)
    pressures = sorted(float(v) for v in pressures)
    points = [(lam, P) for P in pressures for lam in lams]
    records = _sweep_points(spec, points, known)
    t = {(r.lam, r.pressure): r.t_hat for r in records if r.verdict == "quenched"}
    violations = []
    for P in pressures:
        for l1, l2 in zip(lams, lams[1:]):
            if (l1, P) in t and (l2, P) in t and not t[(l2, P)] < t[(l1, P)]:
                violations.append(("lambda", l1, l2, P))
    for lam in lams:
        for p1, p2 in zip(pressures, pressures[1:]):
            if (lam, p1) in t and (lam, p2) in t and not t[(lam, p2)] < t[(lam, p1)]:
                violations.append(("pressure", p1, p2, lam))
    return records, violations


@dataclass
class MonotonicityResult:
    table: dict                      # (lam, P) -> t_hat
    records: list
    lambda_ok: bool
    pressure_ok: bool
    violations: list


def monotonicity_matrix(lams, pressures, spec: ProblemSpec,
                        known: dict | None = None) -> MonotonicityResult:
    """Quenching times on a (lambda, P) grid with both monotonicity checks."""
    lams = sorted(float(v) for v in lams)
    pressures = sorted(float(v) for v in pressures)
    points = [(lam, P) for P in pressures for lam in lams]
    records = _sweep_points(spec, points, known)
    table = {(r.lam, r.pressure): r.t_hat for r in records}
    for r in records:
        if r.verdict != "quenched":
            raise ConfigurationError(
                f"monotonicity matrix needs quenched runs; lambda={r.lam}, "
                f"P={r.pressure} classified {r.verdict}"
            )
    violations = []
    for P in pressures:
        for l1, l2 in zip(lams, lams[1:]):
            if not table[(l2, P)] < table[(l1, P)]:
                violations.append(("lambda", l1, l2, P))
    for lam in lams:
        for p1, p2 in zip(pressures, pressures[1:]):
            if not table[(lam, p2)] < table[(lam, p1)]:
                violations.append(("pressure", p1, p2, lam))
    lambda_ok = not any(v[0] == "lambda" for v in violations)
    pressure_ok = not any(v[0] == "pressure" for v in violations)
    return MonotonicityResult(
        table=table, records=records, lambda_ok=lambda_ok, pressure_ok=pressure_ok,
        violations=violations,
    )
