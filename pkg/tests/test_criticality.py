"""Critical-parameter searches, sweeps and their containment/monotonicity
properties."""

import math

import numpy as np
import pytest

from memsq.criticality import (
    classification_horizon,
    find_lambda_star,
    find_p_star,
    monotonicity_matrix,
    sweep_T_vs_lambda,
)
from memsq.domain import Interval, ProblemSpec
from memsq.quench import estimate_quench_time
from memsq.synthetic import ode_quench_time, synthetic_selfsimilar_trajectory

from conftest import interval_spec


def test_lambda_star_bracket_and_bounds(lam_star_p0):
    res = lam_star_p0
    lo, hi = res.bracket
    assert (hi - lo) / hi <= 1e-3
    assert lo < res.lam_star <= hi
    assert res.lam_star <= 4.0 * np.pi**2 / 27.0
    assert res.lam_star <= min(res.bounds.upper_torsion, res.bounds.upper_eigen)
    # the bracket endpoints in the log carry the right verdicts
    kinds = {round(l[0], 10): l[2] for l in res.log}
    assert kinds[0.0] == "global"


def test_lambda_star_matches_slab_literature(lam_star_p0):
    # pull-in voltage of the unit slab, lam* ~ 1.400
    assert lam_star_p0.lam_star == pytest.approx(1.400, abs=0.01)


def test_pstar_ceiling(pstar_interval):
    res = pstar_interval
    assert res.within_eigen_ceiling
    assert res.p_star <= res.mu0
    assert (res.bracket[1] - res.bracket[0]) / res.bracket[1] <= 1e-3


def test_pstar_probe_extremes(pstar_interval):
    from memsq.parabolic import Global, Quenched, classify
    from memsq.domain import SolverControls

    mu0 = pstar_interval.mu0
    lam_tiny = pstar_interval.lam_tiny
    horizon = classification_horizon(mu0)
    controls = SolverControls(t_max=horizon)
    assert isinstance(
        classify(interval_spec(lam_tiny, pressure=2.0 * mu0, n=128, controls=controls)),
        Quenched,
    )
    v = classify(interval_spec(lam_tiny, pressure=0.1, n=128, controls=controls))
    assert isinstance(v, Global)
    # near-linear regime: steady ~ (P + lam_tiny) * torsion, max well below 1
    assert np.max(v.limit) == pytest.approx(0.1 / 8.0, rel=2e-2)


def test_lambda_star_lower_bound_containment(lam_star_p0, pstar_interval):
    pstar = pstar_interval.p_star
    lower = 4.0 * pstar**3 / (27.0 * pstar**2)
    assert lower <= lam_star_p0.lam_star


def test_lambda_star_monotone_in_pressure(lam_star_p0):
    res_p2 = find_lambda_star(interval_spec(0.0), pressure=2.0)
    assert res_p2.lam_star < lam_star_p0.lam_star
    assert res_p2.lam_star <= np.pi**2 - 2.0


def test_no_admissible_lambda_beyond_mu0():
    res = find_lambda_star(interval_spec(0.0, n=128), pressure=12.0)
    assert res.no_admissible_lambda
    assert res.lam_star == 0.0


def test_sweep_slope(run):
    spec = interval_spec(0.0, n=128)
    res = sweep_T_vs_lambda([15.0, 30.0, 60.0, 120.0], 0.0, spec)
    assert res.monotone_decreasing
    assert not res.excluded
    assert -1.05 <= res.slope <= -0.95


def test_sweep_excludes_global_points():
    spec = interval_spec(0.0, n=64)
    res = sweep_T_vs_lambda([0.5, 15.0, 30.0], 0.0, spec)
    assert len(res.excluded) == 1
    assert res.excluded[0].verdict == "global"
    assert math.isnan(res.excluded[0].t_hat)


def test_sweep_synthetic_ode_oracle():
    """The sweep fit pipeline reproduces T = 1/(3 lam) on exact ODE data."""
    lams = [15.0, 30.0, 60.0, 120.0]
    fits = []
    for lam in lams:
        traj = synthetic_selfsimilar_trajectory(lam)
        spec = ProblemSpec(domain=Interval(1.0), resolution=64, lam=lam, pressure=0.0)
        fits.append(estimate_quench_time(traj, spec).t_hat)
    for lam, t in zip(lams, fits):
        assert t == pytest.approx(ode_quench_time(lam), abs=1e-6)
    slope = np.polyfit(np.log(lams), np.log(fits), 1)[0]
    assert slope == pytest.approx(-1.0, abs=1e-6)


def test_monotonicity_matrix(run):
    spec = interval_spec(0.0, n=128)
    res = monotonicity_matrix([5.0, 10.0], [0.0, 2.0], spec)
    assert res.lambda_ok and res.pressure_ok
    assert not res.violations
    assert len(res.table) == 4


def test_sweep_determinism():
    spec = interval_spec(0.0, n=64)
    r1 = sweep_T_vs_lambda([15.0, 30.0], 0.0, spec)
    r2 = sweep_T_vs_lambda([15.0, 30.0], 0.0, spec)
    for a, b in zip(r1.records, r2.records):
        assert a.t_hat == b.t_hat and a.digest == b.digest


def test_sweep_resume_skips_known():
    spec = interval_spec(0.0, n=64)
    r1 = sweep_T_vs_lambda([15.0, 30.0], 0.0, spec)
    known = {r.key: r.__dict__ for r in r1.records}
    # poison the cached value: a reused record shows resume actually skipped
    known[r1.records[0].key] = dict(known[r1.records[0].key], t_hat=123.0)
    r2 = sweep_T_vs_lambda([15.0, 30.0], 0.0, spec, known=known)
    assert r2.records[0].t_hat == 123.0
    assert r2.records[1].t_hat == r1.records[1].t_hat
