"""Grids, discrete Laplacian, profiles, initial data and admissibility."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memsq.domain import (
    Affine,
    Bump,
    BumpInit,
    ConfigurationError,
    Constant,
    Interval,
    ProblemSpec,
    RadialBall,
    SolverControls,
    Zero,
    _build_grid,
    build_grid,
    check_admissible_initial,
    build_initial,
    discrete_laplacian,
    evaluate_profile,
    integrate_field,
    profile_flags,
    sphere_surface_constant,
    volume,
)


def test_build_grid_interval_nodes():
    g = _build_grid(Interval(1.0), 4, min_n=4)
    assert np.allclose(g.x, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert g.h == 0.25
    assert list(g.boundary) == [0, 4]
    assert list(g.interior) == [1, 2, 3]


def test_build_grid_ball_nodes():
    g = _build_grid(RadialBall(1.0, 2), 4, min_n=4)
    assert np.allclose(g.x, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert list(g.boundary) == [4]          # Dirichlet only at r = R
    assert list(g.interior) == [0, 1, 2, 3]


def test_build_grid_h():
    assert build_grid(Interval(1.0), 16).h == pytest.approx(1.0 / 16)
    g = build_grid(Interval(1.0), 32)
    assert g.h == 1.0 / 32


def test_build_grid_rejects_small_n():
    with pytest.raises(ConfigurationError):
        build_grid(Interval(1.0), 8)
    with pytest.raises(ConfigurationError):
        ProblemSpec(domain=Interval(1.0), resolution=8)


def test_grid_refinement_nests():
    g1 = build_grid(Interval(1.0), 64)
    g2 = build_grid(Interval(1.0), 128)
    assert g2.h == g1.h / 2.0
    assert np.array_equal(g2.x[::2], g1.x)


def test_laplacian_quadratic_interval():
    dom = Interval(1.0)
    g = build_grid(dom, 64)
    u = g.x * (1.0 - g.x) / 2.0
    lap = discrete_laplacian(u, g, dom)
    assert np.allclose(lap[g.interior], -1.0, atol=1e-12)


def test_laplacian_zero_field():
    dom = Interval(1.0)
    g = build_grid(dom, 32)
    assert np.all(discrete_laplacian(np.zeros_like(g.x), g, dom) == 0.0)


def test_laplacian_quadratic_ball():
    dom = RadialBall(1.0, 2)
    g = build_grid(dom, 64)
    u = 1.0 - g.x**2
    lap = discrete_laplacian(u, g, dom)
    assert np.allclose(lap[g.interior], -4.0, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-2, 2), b=st.floats(-2, 2), c=st.floats(-2, 2),
    dim=st.integers(1, 3),
    kind=st.sampled_from(["interval", "ball"]),
)
def test_laplacian_exact_on_quadratics(a, b, c, dim, kind):
    dom = Interval(1.5) if kind == "interval" else RadialBall(1.5, dim)
    g = build_grid(dom, 48)
    if kind == "interval":
        u = a + b * g.x + c * g.x**2
        expect = 2.0 * c
    else:
        # radially smooth quadratics have no linear term at the origin
        u = a + c * g.x**2
        expect = 2.0 * c * dim
    lap = discrete_laplacian(u, g, dom)
    assert np.allclose(lap[g.interior], expect, atol=1e-9 * (1 + abs(expect)))


def test_evaluate_profile_constant():
    g = build_grid(Interval(1.0), 32)
    f, c0 = evaluate_profile(Constant(1.0), g)
    assert np.all(f == 1.0)
    assert c0 == 1.0


def test_evaluate_profile_bump_boundary_minimum():
    g = build_grid(Interval(1.0), 64)
    f, c0 = evaluate_profile(Bump(base=1.0, amplitude=1.0, center=0.5, width=0.2), g)
    expect = 1.0 + np.exp(-0.25 / 0.04)
    assert c0 == pytest.approx(expect, rel=1e-12)
    assert c0 == pytest.approx(1.0019, abs=1e-4)
    assert np.argmin(f) in (0, g.x.size - 1)


def test_evaluate_profile_rejects_nonpositive():
    g = build_grid(Interval(1.0), 32)
    with pytest.raises(ConfigurationError, match="node"):
        evaluate_profile(Affine(base=1.0, slope=-2.0), g)


@settings(max_examples=20, deadline=None)
@given(
    base=st.floats(0.5, 3.0), amp=st.floats(0.0, 2.0),
    center=st.floats(0.1, 0.9), width=st.floats(0.05, 0.5),
)
def test_evaluate_profile_deterministic(base, amp, center, width):
    g = build_grid(Interval(1.0), 64)
    p = Bump(base=base, amplitude=amp, center=center, width=width)
    f1, c1 = evaluate_profile(p, g)
    f2, c2 = evaluate_profile(p, g)
    assert c1 == c2
    assert np.array_equal(f1, f2)


def test_profile_flags():
    dom = Interval(1.0)
    g = build_grid(dom, 32)
    assert profile_flags(Constant(1.0), g, dom).boundary_noninc
    assert not profile_flags(Constant(1.0), g, dom).grad_positive
    centered = Bump(base=1.0, amplitude=1.0, center=0.5, width=0.2)
    assert profile_flags(centered, g, dom).boundary_noninc
    rising = Affine(base=1.0, slope=0.5)
    fl = profile_flags(rising, g, dom)
    assert fl.grad_positive and not fl.boundary_noninc


def test_volume_and_integrals():
    assert volume(Interval(2.0)) == 2.0
    assert volume(RadialBall(1.0, 2)) == pytest.approx(np.pi)
    assert volume(RadialBall(1.0, 3)) == pytest.approx(4.0 * np.pi / 3.0)
    assert sphere_surface_constant(1) == pytest.approx(2.0)
    dom = RadialBall(1.0, 2)
    g = build_grid(dom, 256)
    assert integrate_field(np.ones_like(g.x), g, dom) == pytest.approx(np.pi, rel=1e-12)


def test_admissible_zero_initial():
    spec = ProblemSpec(domain=Interval(1.0), resolution=64, lam=3.0, pressure=2.0)
    v = check_admissible_initial(np.zeros(65), spec)
    assert v.ok


def test_inadmissible_spike():
    spec = ProblemSpec(domain=Interval(1.0), resolution=64, lam=0.0, pressure=0.0)
    u0 = np.zeros(65)
    u0[30] = 0.999
    v = check_admissible_initial(u0, spec)
    assert not v.ok
    assert v.worst_node in (29, 30, 31)


def test_admissible_scaled_steady():
    from memsq.domain import ScaledSteady
    from memsq.elliptic import SteadyExists, solve_minimal_steady

    spec = ProblemSpec(domain=Interval(1.0), resolution=64, lam=0.5, pressure=0.5)
    res = solve_minimal_steady(spec)
    assert isinstance(res, SteadyExists)
    u0 = build_initial(ScaledSteady(0.5), spec.grid(), steady=res.u_min)
    v = check_admissible_initial(u0, spec)
    assert v.ok


def test_initial_bump_boundary_zero():
    g = build_grid(Interval(1.0), 64)
    u0 = build_initial(BumpInit(amplitude=0.3, center=0.5, width=0.15), g)
    assert u0[0] == 0.0 and u0[-1] == 0.0
    assert np.max(u0) == pytest.approx(0.3, rel=1e-6)
    assert np.all((0.0 <= u0) & (u0 < 1.0))


def test_initial_validation():
    with pytest.raises(ConfigurationError):
        BumpInit(amplitude=1.2, center=0.5, width=0.1)
    with pytest.raises(ConfigurationError):
        SolverControls(eps_quench=0.1, gap_margin=0.05)  # needs eps_q < margin
    with pytest.raises(ConfigurationError):
        ProblemSpec(domain=Interval(1.0), resolution=64, lam=-1.0)
    with pytest.raises(ConfigurationError):
        ProblemSpec(domain=Interval(1.0), resolution=64, pressure=-0.5)
    with pytest.raises(ConfigurationError):
        Interval(-1.0)
    with pytest.raises(ConfigurationError):
        RadialBall(1.0, 0)
