"""Eigenpair, torsion and minimal-steady-state tests against closed forms
and an independent shooting-method oracle."""

import numpy as np
import pytest

from memsq.domain import (
    Constant,
    Interval,
    NumericalError,
    ProblemSpec,
    RadialBall,
    build_grid,
    evaluate_profile,
)
from memsq.elliptic import (
    SteadyExists,
    SteadyNotFound,
    compute_spectral,
    lambda_bounds,
    principal_eigenpair,
    solve_minimal_steady,
    solve_torsion,
)


def shooting_radial_eigenvalue(dim: int, radius: float = 1.0) -> float:
    """Oracle: principal radial Dirichlet eigenvalue by RK4 shooting.

    Integrates phi'' + (n-1)/r phi' + mu phi = 0 from the origin
    (phi(0) = 1, phi'(0) = 0) and bisects mu on the sign of phi(R).
    """

    def phi_at_boundary(mu):
        m = 4096
        h = radius / m
        # series start to step off the r = 0 singularity
        r = h
        phi = 1.0 - mu * r**2 / (2.0 * dim)
        dphi = -mu * r / dim

        def rhs(r, y):
            phi, dphi = y
            return np.array([dphi, -mu * phi - (dim - 1) / r * dphi])

        y = np.array([phi, dphi])
        for i in range(1, m):
            k1 = rhs(r, y)
            k2 = rhs(r + h / 2, y + h / 2 * k1)
            k3 = rhs(r + h / 2, y + h / 2 * k2)
            k4 = rhs(r + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            r += h
        return y[0]

    # bracket the FIRST sign change (later eigenbranches flip back)
    lo = 0.5
    assert phi_at_boundary(lo) > 0
    hi = lo
    while phi_at_boundary(hi) > 0:
        lo = hi
        hi += 0.5
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if phi_at_boundary(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_eigen_interval_unit():
    dom = Interval(1.0)
    g = build_grid(dom, 512)
    mu, phi = principal_eigenpair(g, dom)
    assert mu == pytest.approx(np.pi**2, rel=1e-3)
    assert np.max(phi) == pytest.approx(1.0)
    assert np.all(phi[g.interior] > 0.0)


def test_eigen_interval_scaling():
    dom = Interval(2.0)
    g = build_grid(dom, 512)
    mu, _ = principal_eigenpair(g, dom)
    assert mu == pytest.approx(np.pi**2 / 4.0, rel=1e-3)


def test_eigen_ball_against_shooting_oracle():
    oracle = shooting_radial_eigenvalue(2)
    # the oracle itself reproduces the square of the first Bessel-J0 zero
    assert oracle == pytest.approx(5.783185962946785, rel=1e-7)
    dom = RadialBall(1.0, 2)
    g = build_grid(dom, 512)
    mu, phi = principal_eigenpair(g, dom)
    assert mu == pytest.approx(oracle, rel=1e-3)
    assert np.all(phi[g.interior] > 0.0)


def test_eigen_residual_invariant():
    from memsq.domain import discrete_laplacian

    for dom in (Interval(1.0), RadialBall(1.0, 2)):
        g = build_grid(dom, 256)
        mu, phi = principal_eigenpair(g, dom)
        lap = discrete_laplacian(phi, g, dom)
        resid = np.max(np.abs(-lap[g.interior] - mu * phi[g.interior]))
        assert resid <= 1e-6 * mu


def test_eigen_domain_monotonicity():
    g1 = build_grid(Interval(1.0), 256)
    g2 = build_grid(Interval(2.0), 256)
    mu1, _ = principal_eigenpair(g1, Interval(1.0))
    mu2, _ = principal_eigenpair(g2, Interval(2.0))
    assert mu2 < mu1


def test_torsion_interval_closed_form():
    dom = Interval(1.0)
    g = build_grid(dom, 256)
    tor = solve_torsion(g, dom)
    assert np.allclose(tor, g.x * (1.0 - g.x) / 2.0, atol=1e-12)
    assert np.max(tor) == pytest.approx(0.125, abs=1e-12)


def test_torsion_interval_l2():
    dom = Interval(2.0)
    g = build_grid(dom, 256)
    tor = solve_torsion(g, dom)
    assert np.max(tor) == pytest.approx(0.5, abs=1e-11)


def test_torsion_ball_closed_form():
    dom = RadialBall(1.0, 2)
    g = build_grid(dom, 256)
    tor = solve_torsion(g, dom)
    assert np.allclose(tor, (1.0 - g.x**2) / 4.0, atol=1e-12)
    assert np.max(tor) == pytest.approx(0.25, abs=1e-12)


def test_spectral_integrals():
    dom = Interval(1.0)
    g = build_grid(dom, 512)
    f, _ = evaluate_profile(Constant(1.0), g)
    sp = compute_spectral(g, dom, f)
    assert sp.int_torsion == pytest.approx(1.0 / 12.0, rel=1e-3)
    assert sp.int_phi0 == pytest.approx(2.0 / np.pi, rel=1e-3)
    assert sp.l1_lap_phi0 == pytest.approx(2.0 * np.pi, rel=1e-3)
    assert sp.volume == 1.0
    assert np.all(sp.torsion[g.interior] > 0.0)


def test_steady_pure_pressure_is_torsion():
    spec = ProblemSpec(domain=Interval(1.0), resolution=128, lam=0.0, pressure=1.0)
    res = solve_minimal_steady(spec)
    assert isinstance(res, SteadyExists)
    g = spec.grid()
    assert np.allclose(res.u_min, g.x * (1.0 - g.x) / 2.0, atol=1e-10)


def test_steady_subcritical_exists():
    spec = ProblemSpec(domain=Interval(1.0), resolution=128, lam=0.5, pressure=0.0)
    res = solve_minimal_steady(spec)
    assert isinstance(res, SteadyExists)
    assert 0.0 <= np.min(res.u_min) and np.max(res.u_min) < 1.0 - 1e-3
    assert res.residual <= spec.controls.eps_steady


def test_steady_supercritical_not_found():
    # 5 > 4 mu0 / 27 ~ 1.4622, above the eigenvalue upper bound
    spec = ProblemSpec(domain=Interval(1.0), resolution=128, lam=5.0, pressure=0.0)
    res = solve_minimal_steady(spec)
    assert isinstance(res, SteadyNotFound)


def test_steady_iterates_monotone():
    """Monotone iteration produces a non-decreasing field sequence."""
    from scipy.linalg import solve_banded

    from memsq.elliptic import _banded
    from memsq.domain import laplacian_coefficients

    spec = ProblemSpec(domain=Interval(1.0), resolution=64, lam=1.0, pressure=0.5)
    g = spec.grid()
    f, _ = evaluate_profile(spec.profile, g)
    sub, diag, sup = laplacian_coefficients(g, spec.domain)
    ab = _banded(sub, diag, sup, scale=-1.0)
    u = np.zeros_like(g.x)
    for _ in range(60):
        rhs = spec.lam * f[g.interior] / (1.0 - u[g.interior]) ** 2 + spec.pressure
        u_next = np.zeros_like(u)
        u_next[g.interior] = solve_banded((1, 1), ab, rhs)
        assert np.all(u_next >= u - 1e-12)
        u = u_next


def test_lambda_bounds_closed_forms():
    dom = Interval(1.0)
    g = build_grid(dom, 512)
    f, _ = evaluate_profile(Constant(1.0), g)
    sp = compute_spectral(g, dom, f)
    b0 = lambda_bounds(0.0, f, sp)
    assert b0.upper_torsion == pytest.approx(12.0, rel=1e-3)
    assert b0.upper_eigen == pytest.approx(np.pi**2, rel=1e-3)
    assert b0.upper_nopressure == pytest.approx(4.0 * np.pi**2 / 27.0, rel=1e-3)
    b2 = lambda_bounds(2.0, f, sp)
    assert b2.upper_torsion == pytest.approx(10.0, rel=1e-3)
    assert b2.upper_eigen == pytest.approx(np.pi**2 - 2.0, rel=1e-3)
    assert b2.upper_nopressure is None
    bmu = lambda_bounds(sp.mu0, f, sp)
    assert bmu.no_admissible_lambda
    assert bmu.upper_eigen == 0.0


def test_lambda_bounds_lower_needs_pstar():
    dom = Interval(1.0)
    g = build_grid(dom, 256)
    f, _ = evaluate_profile(Constant(1.0), g)
    sp = compute_spectral(g, dom, f)
    assert lambda_bounds(0.0, f, sp).lower_operational is None
    b = lambda_bounds(1.0, f, sp, pstar_operational=7.5)
    assert b.lower_operational == pytest.approx(4.0 * 6.5**3 / (27.0 * 7.5**2))
