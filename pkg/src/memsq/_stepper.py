"""Hot loop of the semi-implicit time integrator (numba).

Diffusion is implicit (one tridiagonal solve per step), the singular
reaction explicit.  The factorization of (I - dt*lap) is cached while dt is
unchanged, which makes the grid-capped smooth phase cheap.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# stop reasons returned by `advance`
CHUNK = 0        # step budget exhausted, caller should continue
TIME = 1         # reached t_stop
GAP = 2          # gap fell to gap_stop
QUENCH = 3       # gap fell to eps_quench
SETTLED = 4      # ||u_t|| <= ut_stop with gap >= gap_margin
DT_UNDERFLOW = 5  # halving drove dt below 1e-15 (quench imminent)

DT_FLOOR = 1e-15
MONO_TOL = 1e-12


@njit(cache=True, nogil=True)
def advance(
    u,                  # interior field values, mutated in place
    lam_f,              # lam * f at interior nodes
    pressure,
    sub, diag, sup,     # interior Laplacian tridiagonal
    dt_max, sigma_dt, dt_grid_cap, lamf_max,
    eps_quench, ut_stop, gap_margin,
    t, t_stop, gap_stop,
    max_steps,
    m_w, binv_w, d_w, v_w,  # work arrays, length of u
):
    """Advance until an event; returns (t, dt, gap, ut, steps, reason)."""
    n = u.size
    gap = 1.0
    for i in range(n):
        if 1.0 - u[i] < gap:
            gap = 1.0 - u[i]
    dt_fact = -1.0
    dt = 0.0
    ut = 0.0
    steps = 0
    while True:
        if t >= t_stop - 1e-14 * (1.0 + abs(t_stop)):
            return t, dt, gap, ut, steps, TIME
        if steps >= max_steps:
            return t, dt, gap, ut, steps, CHUNK
        # dt rule: reaction-limited, grid-accuracy cap, hard ceiling
        dt = dt_max
        if dt_grid_cap < dt:
            dt = dt_grid_cap
        if lamf_max > 0.0:
            dtr = sigma_dt * gap * gap * gap / lamf_max
            if dtr < dt:
                dt = dtr
        if t + dt > t_stop:
            dt = t_stop - t
        # attempt the step, halving until it keeps max u < 1 and is
        # nodewise monotone within MONO_TOL
        while True:
            if dt < DT_FLOOR:
                return t, dt, gap, ut, steps, DT_UNDERFLOW
            if dt != dt_fact:
                b = 1.0 - dt * diag[0]
                binv_w[0] = 1.0 / b
                for i in range(1, n):
                    m_w[i] = (-dt * sub[i]) * binv_w[i - 1]
                    b = (1.0 - dt * diag[i]) - m_w[i] * (-dt * sup[i - 1])
                    binv_w[i] = 1.0 / b
                dt_fact = dt
            for i in range(n):
                g = 1.0 - u[i]
                d_w[i] = u[i] + dt * (lam_f[i] / (g * g) + pressure)
            for i in range(1, n):
                d_w[i] = d_w[i] - m_w[i] * d_w[i - 1]
            v_w[n - 1] = d_w[n - 1] * binv_w[n - 1]
            for i in range(n - 2, -1, -1):
                v_w[i] = (d_w[i] + dt * sup[i] * v_w[i + 1]) * binv_w[i]
            ok = True
            for i in range(n):
                if not (v_w[i] < 1.0) or v_w[i] < u[i] - MONO_TOL:
                    ok = False
                    break
            if ok:
                break
            dt = 0.5 * dt
        # accept
        ut = 0.0
        for i in range(n):
            diff = v_w[i] - u[i]
            if diff < 0.0:
                diff = -diff
            if diff > ut:
                ut = diff
            u[i] = v_w[i]
        ut /= dt
        t += dt
        steps += 1
        gap = 1.0
        for i in range(n):
            if 1.0 - u[i] < gap:
                gap = 1.0 - u[i]
        if gap <= eps_quench:
            return t, dt, gap, ut, steps, QUENCH
        if gap <= gap_stop:
            return t, dt, gap, ut, steps, GAP
        if ut <= ut_stop and gap >= gap_margin:
            return t, dt, gap, ut, steps, SETTLED


def work_arrays(n: int):
    return (np.empty(n), np.empty(n), np.empty(n), np.empty(n))
