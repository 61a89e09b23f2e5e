"""Time integration of the evolution problem and run classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _stepper
from .domain import (
    ConfigurationError,
    NumericalError,
    ProblemSpec,
    build_initial,
    check_admissible_initial,
    discrete_laplacian,
    evaluate_profile,
    laplacian_coefficients,
)
from .elliptic import SteadyExists, solve_minimal_steady

__all__ = [
    "SimState",
    "Trajectory",
    "Quenched",
    "Global",
    "Undecided",
    "RunVerdict",
    "step",
    "integrate",
    "classify",
]

SAMPLE_GAP_FACTOR = 10.0 ** (1.0 / 20.0)  # scalar samples per twentieth-decade of gap
SNAP_GAP_START = 0.2                       # gap below which snapshots go geometric
CHUNK_STEPS = 500_000


@dataclass(frozen=True)
class SimState:
    """Evolving field with its clock; gap = 1 - max u."""

    t: float
    u: np.ndarray
    dt: float
    steps: int
    gap: float


@dataclass
class Trajectory:
    """Sampled diagnostics series plus full-field snapshots."""

    t: np.ndarray
    umax: np.ndarray
    gap: np.ndarray
    argmax_x: np.ndarray
    ut_inf: np.ndarray
    dt: np.ndarray
    snap_t: list = field(default_factory=list)
    snap_u: list = field(default_factory=list)


@dataclass(frozen=True)
class Quenched:
    t_stop: float
    final: np.ndarray
    dt_underflow: bool = False

    kind = "quenched"


@dataclass(frozen=True)
class Global:
    limit: np.ndarray
    residual: float
    fast_path: bool = False

    kind = "global"


@dataclass(frozen=True)
class Undecided:
    horizon: float
    final_gap: float
    note: str = ""

    kind = "undecided"


RunVerdict = Quenched | Global | Undecided


def _spec_arrays(spec: ProblemSpec):
    grid = spec.grid()
    f, _ = evaluate_profile(spec.profile, grid)
    sub, diag, sup = laplacian_coefficients(grid, spec.domain)
    i0, i1 = int(grid.interior[0]), int(grid.interior[-1]) + 1
    return grid, f, sub, diag, sup, i0, i1


def _initial_field(spec: ProblemSpec, grid):
    from .domain import ScaledSteady

    if isinstance(spec.initial, ScaledSteady):
        res = solve_minimal_steady(spec)
        if not isinstance(res, SteadyExists):
            raise ConfigurationError(
                "scaled-steady initial data requires a steady state to exist"
            )
        return build_initial(spec.initial, grid, steady=res.u_min)
    return build_initial(spec.initial, grid)


def step(state: SimState, spec: ProblemSpec) -> SimState:
    """One accepted semi-implicit step (used by unit tests and probes)."""
    if state.gap <= spec.controls.eps_quench:
        raise NumericalError("cannot step: gap already at quench threshold")
    grid, f, sub, diag, sup, i0, i1 = _spec_arrays(spec)
    u = state.u.copy()
    ui = u[i0:i1]
    c = spec.controls
    lamf_max = spec.lam * float(np.max(f))
    work = _stepper.work_arrays(ui.size)
    t, dt, gap, ut, steps, reason = _stepper.advance(
        ui, spec.lam * f[i0:i1], spec.pressure, sub, diag, sup,
        c.dt_max, c.sigma_dt, 10.0 * c.sigma_dt * grid.h**2, lamf_max,
        c.eps_quench, -1.0, c.gap_margin,
        state.t, math.inf, 0.0,
        1, *work,
    )
    if reason == _stepper.DT_UNDERFLOW:
        raise NumericalError("dt underflow: quench imminent")
    return SimState(t=t, u=u, dt=dt, steps=state.steps + steps, gap=gap)


def integrate(spec: ProblemSpec) -> tuple[Trajectory, RunVerdict]:
    """Run until quenched (gap <= eps_quench), settled (||u_t|| <= eps_steady
    with gap >= gap_margin) or the horizon t_max.

    Scalar diagnostics are sampled on a fixed time cadence and per
    twentieth-decade of gap; snapshots on their own cadence plus per
    snap_gap_factor of gap once the gap is below 0.2.
    """
    grid, f, sub, diag, sup, i0, i1 = _spec_arrays(spec)
    c = spec.controls
    u = _initial_field(spec, grid)
    adm = check_admissible_initial(u, spec)
    if not adm.ok:
        raise ConfigurationError(
            f"inadmissible initial data: {adm.reason} "
            f"(node {adm.worst_node}, value {adm.worst_value:.3e})"
        )
    lam_f = spec.lam * f
    lamf_max = float(np.max(lam_f))
    dt_grid_cap = 10.0 * c.sigma_dt * grid.h**2
    sample_dt = c.sample_dt if c.sample_dt is not None else c.t_max / 512.0
    snap_dt = c.snap_dt if c.snap_dt is not None else c.t_max / 64.0

    rows_t, rows_umax, rows_gap, rows_ax, rows_ut, rows_dt = [], [], [], [], [], []
    snap_t, snap_u = [], []

    def record(t, dt, ut):
        rows_t.append(t)
        rows_umax.append(float(np.max(u)))
        rows_gap.append(1.0 - float(np.max(u)))
        rows_ax.append(float(grid.x[int(np.argmax(u))]))
        rows_ut.append(ut)
        rows_dt.append(dt)

    def snapshot(t):
        if snap_t and snap_t[-1] == t:
            return
        snap_t.append(t)
        snap_u.append(u.copy())

    t = 0.0
    gap = 1.0 - float(np.max(u))
    ut0 = discrete_laplacian(u, grid, spec.domain) + lam_f / (1.0 - u) ** 2 + spec.pressure
    record(0.0, 0.0, float(np.max(np.abs(ut0[grid.interior]))))
    snapshot(0.0)

    sample_gap_next = gap / SAMPLE_GAP_FACTOR
    snap_gap_next = SNAP_GAP_START if gap > SNAP_GAP_START else gap / c.snap_gap_factor
    ui = u[i0:i1]
    work = _stepper.work_arrays(ui.size)
    verdict: RunVerdict | None = None
    dt = 0.0
    ut = rows_ut[0]
    k_sample, k_snap = 1, 1

    while verdict is None:
        t_stop = min(k_sample * sample_dt, k_snap * snap_dt, c.t_max)
        gap_stop = max(sample_gap_next, snap_gap_next, c.eps_quench)
        t, dt, gap, ut, steps, reason = _stepper.advance(
            ui, lam_f[i0:i1], spec.pressure, sub, diag, sup,
            c.dt_max, c.sigma_dt, dt_grid_cap, lamf_max,
            c.eps_quench, c.eps_steady, c.gap_margin,
            t, t_stop, gap_stop,
            CHUNK_STEPS, *work,
        )
        if reason == _stepper.CHUNK:
            continue
        if steps > 0:
            record(t, dt, ut)
        tol_t = 1e-12 * (1.0 + abs(t))
        snap_due = False
        while t >= k_sample * sample_dt - tol_t:
            k_sample += 1
        while t >= k_snap * snap_dt - tol_t:
            k_snap += 1
            snap_due = True
        while gap <= sample_gap_next:
            sample_gap_next /= SAMPLE_GAP_FACTOR
        while gap <= snap_gap_next:
            snap_due = True
            snap_gap_next /= c.snap_gap_factor
        if snap_due:
            snapshot(t)
        if reason == _stepper.QUENCH:
            verdict = Quenched(t_stop=t, final=u.copy())
        elif reason == _stepper.DT_UNDERFLOW:
            verdict = Quenched(t_stop=t, final=u.copy(), dt_underflow=True)
        elif reason == _stepper.SETTLED:
            verdict = Global(limit=u.copy(), residual=ut)
        elif reason == _stepper.TIME and t >= c.t_max - 1e-14 * (1.0 + c.t_max):
            verdict = Undecided(horizon=c.t_max, final_gap=gap)
    snapshot(t)

    traj = Trajectory(
        t=np.array(rows_t),
        umax=np.array(rows_umax),
        gap=np.array(rows_gap),
        argmax_x=np.array(rows_ax),
        ut_inf=np.array(rows_ut),
        dt=np.array(rows_dt),
        snap_t=snap_t,
        snap_u=snap_u,
    )
    return traj, verdict


def classify(spec: ProblemSpec) -> RunVerdict:
    """Fast classification: steady solve first, time integration fallback.

    When the minimal steady state exists and dominates the initial data the
    run is global without any time stepping; otherwise the verdict comes
    from `integrate`.
    """
    steady = None
    try:
        steady = solve_minimal_steady(spec)
    except NumericalError:
        steady = None
    if isinstance(steady, SteadyExists):
        grid = spec.grid()
        from .domain import ScaledSteady

        if isinstance(spec.initial, ScaledSteady):
            u0 = build_initial(spec.initial, grid, steady=steady.u_min)
        else:
            u0 = build_initial(spec.initial, grid)
        if np.all(u0 <= steady.u_min + 1e-12):
            return Global(limit=steady.u_min, residual=steady.residual, fast_path=True)
    _, verdict = integrate(spec)
    return verdict
