"""memsq: numerical laboratory for quenching in the MEMS equation with pressure.

The library solves u_t - lap u = lam*f(x)/(1-u)^2 + P on intervals and
radially symmetric balls, classifies global existence vs finite-time
quenching, estimates the critical parameters, and verifies the quantitative
quenching predictions (time bounds, 1/3 rate, similarity-variable energy
decay).
"""

__version__ = "0.1.0"

from .domain import (  # noqa: F401
    AnalysisError,
    Affine,
    Bump,
    BumpInit,
    ConfigurationError,
    Constant,
    Interval,
    NumericalError,
    ProblemSpec,
    RadialBall,
    ScaledSteady,
    SolverControls,
    Zero,
    build_grid,
    check_admissible_initial,
    discrete_laplacian,
    evaluate_profile,
)
