"""Synthetic trajectories with known closed forms, used as fit oracles.

The reaction-only model u' = lam*f/(1-u)^2 from u(0)=0 has
(1-u)^3 = 1 - 3*lam*f*t and quenches at T = 1/(3*lam*f); the exact
self-similar field is 1 - u = (3*lam*f*(T-t))^(1/3), uniform in x.
"""

from __future__ import annotations

import numpy as np

from .parabolic import Trajectory

__all__ = ["ode_quench_time", "synthetic_selfsimilar_trajectory"]


def ode_quench_time(lam: float, f_value: float = 1.0) -> float:
    return 1.0 / (3.0 * lam * f_value)


def synthetic_selfsimilar_trajectory(
    lam: float,
    t_quench: float | None = None,
    f_value: float = 1.0,
    eps_quench: float = 1e-3,
    n_samples: int = 60,
    n_nodes: int = 65,
    extent: float = 1.0,
) -> Trajectory:
    """Exactly self-similar trajectory sampled on log-spaced gaps.

    The gap series follows (1-u)^3 = 3*lam*f*(T-t); fields are uniform in
    space so every node carries the centerline value.
    """
    T = t_quench if t_quench is not None else ode_quench_time(lam, f_value)
    g0 = min(0.9, (3.0 * lam * f_value * T) ** (1.0 / 3.0))
    gaps = np.geomspace(g0, eps_quench, n_samples)
    taus = gaps**3 / (3.0 * lam * f_value)
    ts = T - taus
    x = np.linspace(0.0, extent, n_nodes)
    snap_u = [np.full_like(x, 1.0 - g) for g in gaps]
    ut = lam * f_value / gaps**2
    return Trajectory(
        t=ts,
        umax=1.0 - gaps,
        gap=gaps,
        argmax_x=np.full_like(ts, x[len(x) // 2]),
        ut_inf=ut,
        dt=np.zeros_like(ts),
        snap_t=list(ts),
        snap_u=snap_u,
    )
