"""Steady-state machinery: minimal steady states, principal Dirichlet
eigenpair, torsion function, and closed-form critical-parameter bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .domain import (
    Domain,
    Grid,
    NumericalError,
    ProblemSpec,
    discrete_laplacian,
    evaluate_profile,
    integrate_field,
    laplacian_coefficients,
    volume,
)

__all__ = [
    "SpectralData",
    "SteadyExists",
    "SteadyNotFound",
    "SteadyResult",
    "LambdaBounds",
    "principal_eigenpair",
    "solve_torsion",
    "compute_spectral",
    "solve_minimal_steady",
    "lambda_bounds",
]

STEADY_BREAK = 1e-3       # declare NotFound once max u >= 1 - STEADY_BREAK
STEADY_MAX_ITER = 500     # stalls become explicit NumericalError, not misreads
EIGEN_RTOL = 1e-10
EIGEN_MAX_ITER = 10_000


def _banded(sub, diag, sup, scale=1.0, shift=0.0):
    """Pack scale*A + shift*I (A tridiagonal) into solve_banded layout."""
    m = diag.size
    ab = np.zeros((3, m))
    ab[0, 1:] = scale * sup[:-1]
    ab[1, :] = scale * diag + shift
    ab[2, :-1] = scale * sub[1:]
    return ab


def _interior_solve(grid: Grid, domain: Domain, rhs_int: np.ndarray) -> np.ndarray:
    """Solve -lap u = rhs on interior nodes with zero Dirichlet data."""
    sub, diag, sup = laplacian_coefficients(grid, domain)
    ab = _banded(sub, diag, sup, scale=-1.0)
    u = np.zeros_like(grid.x)
    u[grid.interior] = solve_banded((1, 1), ab, rhs_int)
    return u


# --------------------------------------------------------------------------
# principal eigenpair and torsion function


def principal_eigenpair(grid: Grid, domain: Domain) -> tuple[float, np.ndarray]:
    """Principal Dirichlet eigenpair of -lap by inverse power iteration.

    Iterates v <- (-lap)^{-1} v until the relative eigen-residual
    ||-lap phi - mu phi||_inf / mu is at most 1e-10; phi is positive and
    max-normalized.
    """
    sub, diag, sup = laplacian_coefficients(grid, domain)
    ab = _banded(sub, diag, sup, scale=-1.0)
    m = grid.interior.size
    v = np.ones(m)
    v /= np.max(np.abs(v))
    mu = 0.0
    for _ in range(EIGEN_MAX_ITER):
        w = solve_banded((1, 1), ab, v)
        # Rayleigh quotient for -lap: v = -lap w (up to the previous scaling)
        mu = float(v @ w / (w @ w))
        v = w / np.max(np.abs(w))
        lap_v = _apply_tridiag(sub, diag, sup, v)
        resid = float(np.max(np.abs(-lap_v - mu * v)))
        if resid <= EIGEN_RTOL * abs(mu):
            break
    else:
        raise NumericalError("inverse power iteration did not converge")
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    phi = np.zeros_like(grid.x)
    phi[grid.interior] = v / np.max(v)
    return mu, phi


def _apply_tridiag(sub, diag, sup, v):
    out = diag * v
    out[1:] += sub[1:] * v[:-1]
    out[:-1] += sup[:-1] * v[1:]
    return out


def solve_torsion(grid: Grid, domain: Domain) -> np.ndarray:
    """Torsion function: -lap Phi = 1 with zero Dirichlet data."""
    return _interior_solve(grid, domain, np.ones(grid.interior.size))


@dataclass(frozen=True)
class SpectralData:
    """Principal eigenpair, torsion function and the integrals entering the
    critical-parameter bounds."""

    mu0: float
    phi0: np.ndarray
    torsion: np.ndarray
    int_torsion: float
    int_torsion_f: float
    int_phi0: float
    int_f_phi0: float
    l1_lap_phi0: float
    max_torsion: float
    volume: float


def compute_spectral(grid: Grid, domain: Domain, f: np.ndarray) -> SpectralData:
    mu0, phi0 = principal_eigenpair(grid, domain)
    tor = solve_torsion(grid, domain)
    lap_phi0 = discrete_laplacian(phi0, grid, domain)
    return SpectralData(
        mu0=mu0,
        phi0=phi0,
        torsion=tor,
        int_torsion=integrate_field(tor, grid, domain),
        int_torsion_f=integrate_field(tor * f, grid, domain),
        int_phi0=integrate_field(phi0, grid, domain),
        int_f_phi0=integrate_field(f * phi0, grid, domain),
        l1_lap_phi0=integrate_field(np.abs(lap_phi0), grid, domain),
        max_torsion=float(np.max(tor)),
        volume=volume(domain),
    )


# --------------------------------------------------------------------------
# minimal steady state by monotone iteration


@dataclass(frozen=True)
class SteadyExists:
    u_min: np.ndarray
    residual: float
    iterations: int


@dataclass(frozen=True)
class SteadyNotFound:
    max_u: float
    iterations: int


SteadyResult = SteadyExists | SteadyNotFound


def solve_minimal_steady(spec: ProblemSpec) -> SteadyResult:
    """Monotone iteration from 0: solve -lap u_{k+1} = lam f/(1-u_k)^2 + P.

    The iterates are non-decreasing; if they converge below 1 the limit is
    the minimal steady state.  Blowing through max u >= 1 - STEADY_BREAK
    declares NotFound; exceeding the iteration cap while still moving raises
    NumericalError (undecided, caller may refine or fall back to time
    integration).
    """
    grid = spec.grid()
    f, _ = evaluate_profile(spec.profile, grid)
    eps = spec.controls.eps_steady
    sub, diag, sup = laplacian_coefficients(grid, domain := spec.domain)
    ab = _banded(sub, diag, sup, scale=-1.0)
    fi = f[grid.interior]
    u = np.zeros_like(grid.x)
    for k in range(1, STEADY_MAX_ITER + 1):
        rhs = spec.lam * fi / (1.0 - u[grid.interior]) ** 2 + spec.pressure
        u_next = np.zeros_like(u)
        u_next[grid.interior] = solve_banded((1, 1), ab, rhs)
        max_u = float(np.max(u_next))
        if max_u >= 1.0 - STEADY_BREAK:
            return SteadyNotFound(max_u=max_u, iterations=k)
        step = float(np.max(np.abs(u_next - u)))
        u = u_next
        if step <= eps * (1.0 - max_u):
            lap = discrete_laplacian(u, grid, domain)
            resid = -lap - spec.lam * f / (1.0 - u) ** 2 - spec.pressure
            resid_inf = float(np.max(np.abs(resid[grid.interior])))
            if resid_inf <= eps:
                return SteadyExists(u_min=u, residual=resid_inf, iterations=k)
    raise NumericalError(
        f"monotone iteration undecided after {STEADY_MAX_ITER} iterations "
        f"(max u = {float(np.max(u)):.6f})"
    )


# --------------------------------------------------------------------------
# closed-form critical-parameter bounds


@dataclass(frozen=True)
class LambdaBounds:
    """Bracketing bounds for the pull-in voltage at pressure P.

    lower_operational uses the operational pressure threshold and is only
    reported when one is supplied; no_admissible_lambda flags P >= mu0.
    """

    pressure: float
    upper_torsion: float
    upper_eigen: float
    upper_nopressure: float | None
    lower_operational: float | None
    no_admissible_lambda: bool


def lambda_bounds(
    pressure: float,
    f: np.ndarray,
    spectral: SpectralData,
    pstar_operational: float | None = None,
) -> LambdaBounds:
    """Evaluate the analytic bounds for the critical voltage at pressure P.

    upper_torsion  = (|Omega| - P * int Phi) / int Phi f
    upper_eigen    = (mu0 - P) / c0        (0, flagged, when P >= mu0)
    upper_nopressure = 4 mu0 / 27          (reported for P = 0 only)
    lower_operational = 4 (P* - P)^3 / (27 P*^2 sup f)  given operational P*.
    """
    c0 = float(np.min(f))
    sup_f = float(np.max(f))
    no_adm = pressure >= spectral.mu0
    upper_eigen = 0.0 if no_adm else (spectral.mu0 - pressure) / c0
    upper_torsion = (spectral.volume - pressure * spectral.int_torsion) / spectral.int_torsion_f
    lower = None
    if pstar_operational is not None and pstar_operational > pressure:
        lower = (
            4.0 * (pstar_operational - pressure) ** 3
            / (27.0 * pstar_operational**2 * sup_f)
        )
    elif pstar_operational is not None:
        lower = 0.0
    upper_np = 4.0 * spectral.mu0 / 27.0 if pressure == 0.0 else None
    return LambdaBounds(
        pressure=pressure,
        upper_torsion=float(upper_torsion),
        upper_eigen=float(upper_eigen),
        upper_nopressure=upper_np,
        lower_operational=lower,
        no_admissible_lambda=bool(no_adm),
    )
