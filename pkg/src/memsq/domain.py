"""Geometry, grids, discrete operators and problem-specification types.

The PDE is posed either on an interval (0, L) with homogeneous Dirichlet
data at both ends, or on a ball of radius R in n dimensions reduced to the
radial coordinate r in [0, R] with a symmetry (Neumann) condition at r = 0
and a Dirichlet condition at r = R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ConfigurationError",
    "NumericalError",
    "AnalysisError",
    "Interval",
    "RadialBall",
    "Constant",
    "Bump",
    "Affine",
    "Zero",
    "ScaledSteady",
    "BumpInit",
    "SolverControls",
    "ProblemSpec",
    "Grid",
    "ProfileFlags",
    "AdmissibilityVerdict",
    "build_grid",
    "laplacian_coefficients",
    "discrete_laplacian",
    "evaluate_profile",
    "profile_flags",
    "build_initial",
    "check_admissible_initial",
    "integrate_field",
    "volume",
    "sphere_surface_constant",
]


class ConfigurationError(ValueError):
    """Invalid problem specification (bad domain, profile, controls...)."""


class NumericalError(RuntimeError):
    """A solver failed to converge or stalled before reaching a verdict."""


class AnalysisError(RuntimeError):
    """Post-processing could not produce a reliable estimate."""


# --------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class Interval:
    """Open interval (0, length) with Dirichlet data at both ends."""

    length: float

    def __post_init__(self):
        if not (self.length > 0):
            raise ConfigurationError(f"interval length must be > 0, got {self.length}")

    @property
    def extent(self) -> float:
        return self.length

    def tag(self) -> str:
        return f"interval:L={self.length:g}"


@dataclass(frozen=True)
class RadialBall:
    """Ball of given radius in `dimension` space dimensions, radial reduction.

    Coordinates are r in [0, R]; r = R carries the Dirichlet value and r = 0
    a symmetry condition.
    """

    radius: float
    dimension: int

    def __post_init__(self):
        if not (self.radius > 0):
            raise ConfigurationError(f"ball radius must be > 0, got {self.radius}")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ConfigurationError(
                f"ball dimension must be an integer >= 1, got {self.dimension}"
            )

    @property
    def extent(self) -> float:
        return self.radius

    def tag(self) -> str:
        return f"ball:R={self.radius:g},n={self.dimension}"


Domain = Interval | RadialBall


def sphere_surface_constant(n: int) -> float:
    """Surface area of the unit sphere in R^n (2, 2*pi, 4*pi, ...)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def volume(domain: Domain) -> float:
    """n-dimensional volume |Omega| of the domain."""
    if isinstance(domain, Interval):
        return domain.length
    n = domain.dimension
    return sphere_surface_constant(n) * domain.radius**n / n


# --------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class Grid:
    """Uniform grid of N+1 nodes covering [0, extent].

    `boundary` / `interior` are index arrays; boundary nodes hold the field
    value 0 at all times.
    """

    x: np.ndarray
    h: float
    boundary: np.ndarray
    interior: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.x.size


def build_grid(domain: Domain, n: int) -> Grid:
    """Build the uniform grid with N = n cells; requires n >= 16 except that
    smaller n is accepted for unit-scale verification problems via _min_n."""
    return _build_grid(domain, n, min_n=16)


def _build_grid(domain: Domain, n: int, min_n: int = 16) -> Grid:
    if int(n) != n or n < min_n:
        raise ConfigurationError(f"resolution N must be an integer >= {min_n}, got {n}")
    n = int(n)
    x = np.linspace(0.0, domain.extent, n + 1)
    h = domain.extent / n
    if isinstance(domain, Interval):
        boundary = np.array([0, n], dtype=np.intp)
        interior = np.arange(1, n, dtype=np.intp)
    else:
        boundary = np.array([n], dtype=np.intp)
        interior = np.arange(0, n, dtype=np.intp)
    x.setflags(write=False)
    return Grid(x=x, h=h, boundary=boundary, interior=interior)


def laplacian_coefficients(grid: Grid, domain: Domain):
    """Tridiagonal coefficients (sub, diag, sup) of the discrete Laplacian
    restricted to interior nodes.

    Row i couples interior unknowns only; couplings into Dirichlet nodes are
    dropped (their value is identically zero).  For the ball, row r = 0 uses
    the symmetry limit  lap u(0) = 2n (u_1 - u_0) / h^2.
    """
    h = grid.h
    m = grid.interior.size
    sub = np.zeros(m)
    diag = np.zeros(m)
    sup = np.zeros(m)
    if isinstance(domain, Interval):
        sub[:] = 1.0 / h**2
        sup[:] = 1.0 / h**2
        diag[:] = -2.0 / h**2
        sub[0] = 0.0
        sup[-1] = 0.0
        return sub, diag, sup
    n = domain.dimension
    r = grid.x[grid.interior]
    diag[0] = -2.0 * n / h**2
    sup[0] = 2.0 * n / h**2
    ri = r[1:]
    sub[1:] = 1.0 / h**2 - (n - 1) / (2.0 * h * ri)
    sup[1:] = 1.0 / h**2 + (n - 1) / (2.0 * h * ri)
    diag[1:] = -2.0 / h**2
    sub[0] = 0.0
    sup[-1] = 0.0  # couples to the Dirichlet node r = R
    return sub, diag, sup


def discrete_laplacian(u: np.ndarray, grid: Grid, domain: Domain) -> np.ndarray:
    """Discrete Laplacian of a field; boundary entries of the result are 0."""
    if u.shape != grid.x.shape:
        raise ValueError(f"field shape {u.shape} does not match grid {grid.x.shape}")
    h = grid.h
    out = np.zeros_like(u)
    if isinstance(domain, Interval):
        out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
        return out
    n = domain.dimension
    out[0] = 2.0 * n * (u[1] - u[0]) / h**2
    r = grid.x[1:-1]
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2 + (n - 1) / r * (
        u[2:] - u[:-2]
    ) / (2.0 * h)
    return out


def integrate_field(values: np.ndarray, grid: Grid, domain: Domain) -> float:
    """Trapezoid integral over the domain.

    For the ball the radial measure omega_{n-1} r^{n-1} dr is included, so
    the result is a genuine n-dimensional integral.
    """
    if isinstance(domain, Interval):
        return float(np.trapezoid(values, grid.x))
    n = domain.dimension
    w = sphere_surface_constant(n) * grid.x ** (n - 1)
    return float(np.trapezoid(values * w, grid.x))


# --------------------------------------------------------------------------
# source profiles f(x)


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)

    def derivative(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def tag(self) -> str:
        return f"const:{self.value:g}"


@dataclass(frozen=True)
class Bump:
    """f(x) = base + amplitude * exp(-|x - center|^2 / width^2)."""

    base: float
    amplitude: float
    center: float
    width: float

    def __post_init__(self):
        if not (self.width > 0):
            raise ConfigurationError(f"bump width must be > 0, got {self.width}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.base + self.amplitude * np.exp(-((x - self.center) ** 2) / self.width**2)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        g = np.exp(-((x - self.center) ** 2) / self.width**2)
        return self.amplitude * g * (-2.0 * (x - self.center) / self.width**2)

    def tag(self) -> str:
        return f"bump:{self.base:g}+{self.amplitude:g}@{self.center:g}w{self.width:g}"


@dataclass(frozen=True)
class Affine:
    base: float
    slope: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.base + self.slope * x

    def derivative(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.slope)

    def tag(self) -> str:
        return f"affine:{self.base:g}{self.slope:+g}x"


Profile = Constant | Bump | Affine


@dataclass(frozen=True)
class ProfileFlags:
    """Hypothesis flags recorded per profile on a given domain.

    grad_positive:   f is strictly increasing at every node pair.
    boundary_noninc: the outward normal derivative of f is <= 0 on the
                     boundary.  Analyses assert whichever flag they need.
    """

    grad_positive: bool
    boundary_noninc: bool


def evaluate_profile(profile: Profile, grid: Grid) -> tuple[np.ndarray, float]:
    """Sample f at the nodes; returns (field, c0) with c0 = min f.

    Rejects profiles that are not strictly positive on the grid.
    """
    f = profile(grid.x)
    i = int(np.argmin(f))
    c0 = float(f[i])
    if not (c0 > 0.0):
        raise ConfigurationError(
            f"profile must satisfy f >= c0 > 0; f({grid.x[i]:.6g}) = {c0:.6g} at node {i}"
        )
    f.setflags(write=False)
    return f, c0


def profile_flags(profile: Profile, grid: Grid, domain: Domain) -> ProfileFlags:
    df = profile.derivative(grid.x)
    if isinstance(domain, Interval):
        grad_pos = bool(np.all(df > 0.0))
        # outward normals are -e_x at 0 and +e_x at L
        boundary_noninc = bool(-df[0] <= 1e-14 and df[-1] <= 1e-14)
    else:
        grad_pos = bool(np.all(df[1:] > 0.0))
        boundary_noninc = bool(df[-1] <= 1e-14)
    return ProfileFlags(grad_positive=grad_pos, boundary_noninc=boundary_noninc)


# --------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class Zero:
    def tag(self) -> str:
        return "zero"


@dataclass(frozen=True)
class ScaledSteady:
    """u0 = factor * u_min where u_min is the minimal steady state."""

    factor: float

    def __post_init__(self):
        if not (0.0 <= self.factor < 1.0):
            raise ConfigurationError(
                f"scaled-steady factor must be in [0, 1), got {self.factor}"
            )

    def tag(self) -> str:
        return f"steady*{self.factor:g}"


@dataclass(frozen=True)
class BumpInit:
    """Compactly supported bump, shifted so it vanishes on the boundary."""

    amplitude: float
    center: float
    width: float

    def __post_init__(self):
        if not (0.0 <= self.amplitude < 1.0):
            raise ConfigurationError(
                f"initial bump amplitude must be in [0, 1), got {self.amplitude}"
            )
        if not (self.width > 0):
            raise ConfigurationError(f"initial bump width must be > 0, got {self.width}")

    def tag(self) -> str:
        return f"bump:{self.amplitude:g}@{self.center:g}w{self.width:g}"


Initial = Zero | ScaledSteady | BumpInit


def build_initial(initial: Initial, grid: Grid, steady: np.ndarray | None = None) -> np.ndarray:
    """Realize the initial field on the grid.

    ScaledSteady requires the minimal steady state to be passed in.
    """
    if isinstance(initial, Zero):
        return np.zeros_like(grid.x)
    if isinstance(initial, ScaledSteady):
        if steady is None:
            raise ConfigurationError("scaled-steady initial data needs a steady state")
        u0 = initial.factor * steady
    else:
        g = np.exp(-((grid.x - initial.center) ** 2) / initial.width**2)
        shift = float(np.max(g[grid.boundary]))
        u0 = initial.amplitude * np.maximum(g - shift, 0.0) / max(1.0 - shift, 1e-300)
    u0[grid.boundary] = 0.0
    if np.any(u0 < 0.0) or np.any(u0 >= 1.0):
        raise ConfigurationError("initial data must satisfy 0 <= u0 < 1")
    return u0


# --------------------------------------------------------------------------
# solver controls / problem spec


@dataclass(frozen=True)
class SolverControls:
    """Adaptive-stepping and verdict thresholds.

    dt is chosen per step as min(dt_max, sigma_dt*g^3/(lambda*max f),
    sigma_dt*h^2*10) with g the gap 1 - max u.  A run is declared quenched
    at gap <= eps_quench, steady once ||u_t|| <= eps_steady with
    gap >= gap_margin, undecided at t >= t_max.  Snapshots are taken every
    snap_dt in the smooth phase and per factor snap_gap_factor of gap once
    the gap falls below 0.2; scalar samples use sample_dt and a gap factor
    of 10^(1/20).
    """

    dt_max: float = 1e-3
    sigma_dt: float = 0.05
    eps_quench: float = 1e-3
    eps_steady: float = 1e-8
    gap_margin: float = 0.05
    t_max: float = 10.0
    sample_dt: float | None = None
    snap_dt: float | None = None
    snap_gap_factor: float = 10.0 ** (1.0 / 16.0)

    def __post_init__(self):
        for name in ("dt_max", "sigma_dt", "eps_quench", "eps_steady", "gap_margin", "t_max"):
            v = getattr(self, name)
            if not (v > 0):
                raise ConfigurationError(f"control {name} must be > 0, got {v}")
        if not (self.eps_quench < self.gap_margin < 1.0):
            raise ConfigurationError(
                f"controls need eps_quench < gap_margin < 1, got "
                f"{self.eps_quench} / {self.gap_margin}"
            )
        if not (self.snap_gap_factor > 1.0):
            raise ConfigurationError("snap_gap_factor must be > 1")
        for name in ("sample_dt", "snap_dt"):
            v = getattr(self, name)
            if v is not None and not (v > 0):
                raise ConfigurationError(f"control {name} must be > 0 when set")


@dataclass(frozen=True)
class ProblemSpec:
    """One PDE instance: u_t - lap u = lam*f(x)/(1-u)^2 + pressure."""

    domain: Domain
    resolution: int
    profile: Profile = field(default_factory=lambda: Constant(1.0))
    lam: float = 0.0
    pressure: float = 0.0
    initial: Initial = field(default_factory=Zero)
    controls: SolverControls = field(default_factory=SolverControls)

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError(f"voltage lambda must be >= 0, got {self.lam}")
        if self.pressure < 0:
            raise ConfigurationError(f"pressure must be >= 0, got {self.pressure}")
        if int(self.resolution) != self.resolution or self.resolution < 16:
            raise ConfigurationError(f"resolution N must be >= 16, got {self.resolution}")

    def grid(self) -> Grid:
        return build_grid(self.domain, self.resolution)

    def with_(self, **kw) -> "ProblemSpec":
        return replace(self, **kw)

    def key(self) -> str:
        """Stable configuration key used by sweep stores."""
        return (
            f"{self.domain.tag()}|N={self.resolution}|{self.profile.tag()}"
            f"|lam={self.lam!r}|P={self.pressure!r}|u0={self.initial.tag()}"
        )


# --------------------------------------------------------------------------
# admissibility of initial data


@dataclass(frozen=True)
class AdmissibilityVerdict:
    ok: bool
    worst_node: int
    worst_value: float
    tolerance: float
    reason: str = ""


def check_admissible_initial(u0: np.ndarray, spec: ProblemSpec) -> AdmissibilityVerdict:
    """Check 0 <= u0 < 1, u0 = 0 on the boundary, and the sign condition
    lap u0 + lam f/(1-u0)^2 + P >= -eps_tol at interior nodes.

    eps_tol = 10 h^2 (lam max f + P) absorbs the O(h^2) discretization
    slack of smooth admissible data.
    """
    grid = spec.grid()
    f, _ = evaluate_profile(spec.profile, grid)
    if np.any(u0 < 0.0) or np.any(u0 >= 1.0):
        bad = int(np.argmax(np.where((u0 < 0.0) | (u0 >= 1.0), 1, 0)))
        return AdmissibilityVerdict(False, bad, float(u0[bad]), 0.0, "u0 outside [0, 1)")
    if np.any(u0[grid.boundary] != 0.0):
        bad = int(grid.boundary[np.argmax(u0[grid.boundary] != 0.0)])
        return AdmissibilityVerdict(False, bad, float(u0[bad]), 0.0, "u0 != 0 on boundary")
    eps_tol = 10.0 * grid.h**2 * (spec.lam * float(np.max(f)) + spec.pressure)
    lap = discrete_laplacian(u0, grid, spec.domain)
    resid = lap + spec.lam * f / (1.0 - u0) ** 2 + spec.pressure
    resid = resid[grid.interior]
    i = int(np.argmin(resid))
    worst = float(resid[i])
    node = int(grid.interior[i])
    if worst < -eps_tol:
        return AdmissibilityVerdict(
            False, node, worst, eps_tol,
            "initial data violates lap u0 + lam f/(1-u0)^2 + P >= 0",
        )
    return AdmissibilityVerdict(True, node, worst, eps_tol)
