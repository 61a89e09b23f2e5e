"""Shared fixtures: expensive runs and bisections are computed once per
session and reused across test modules."""

from __future__ import annotations

import pytest

from memsq.domain import Interval, ProblemSpec, RadialBall, SolverControls
from memsq.parabolic import integrate


DEEP = SolverControls(eps_quench=1e-4)


def interval_spec(lam, pressure=0.0, n=256, controls=None, **kw):
    return ProblemSpec(
        domain=Interval(1.0), resolution=n, lam=lam, pressure=pressure,
        controls=controls or SolverControls(), **kw,
    )


def ball_spec(lam, dim, n=256, controls=None, **kw):
    return ProblemSpec(
        domain=RadialBall(1.0, dim), resolution=n, lam=lam,
        controls=controls or SolverControls(), **kw,
    )


class RunCache:
    def __init__(self):
        self._cache = {}

    def __call__(self, spec: ProblemSpec):
        key = (spec.key(), spec.controls)
        if key not in self._cache:
            self._cache[key] = integrate(spec)
        return self._cache[key]


@pytest.fixture(scope="session")
def run():
    return RunCache()


@pytest.fixture(scope="session")
def quench5(run):
    """Deep quench run at lambda=5 on the unit interval."""
    spec = interval_spec(5.0, controls=DEEP)
    traj, verdict = run(spec)
    assert verdict.kind == "quenched"
    return spec, traj, verdict


@pytest.fixture(scope="session")
def quench10(run):
    spec = interval_spec(10.0, controls=DEEP)
    traj, verdict = run(spec)
    assert verdict.kind == "quenched"
    return spec, traj, verdict


@pytest.fixture(scope="session")
def ball_quench(run):
    """Deep quench runs on balls of dimension 1, 2, 3 at lambda=5."""
    out = {}
    for dim in (1, 2, 3):
        spec = ball_spec(5.0, dim, controls=DEEP)
        traj, verdict = run(spec)
        assert verdict.kind == "quenched"
        out[dim] = (spec, traj, verdict)
    return out


@pytest.fixture(scope="session")
def lam_star_p0():
    from memsq.criticality import find_lambda_star

    return find_lambda_star(interval_spec(0.0), pressure=0.0)


@pytest.fixture(scope="session")
def pstar_interval():
    from memsq.criticality import find_p_star

    return find_p_star(interval_spec(0.0))
