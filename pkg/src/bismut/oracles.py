"""
Deterministic oracles for the linear delay family.

With a constant direction phi0, additive noise and f(xi) = xi(0), taking
expectations in the Lions tangent equation leaves the scalar delay ODE

    v'(t) = (c - a) v(t) + b1 v(t - r0),   v = phi0 on [-r0, 0],

whose value at T is the derivative D^L_phi (P_T f)(mu).
"""
import logging

import numpy as np
from scipy.integrate import solve_ivp

from src.models.linear_delay import LinearDelayParams
from src.pathspace.grid import TimeGrid

logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-8


def _method_of_steps(params: LinearDelayParams, phi0: float, T: float, r0: float, rtol: float) -> float:
    rate = params.c - params.a
    if r0 == 0.0:
        # memoryless: the delayed term acts on v(t) itself
        return float(phi0 * np.exp((rate + params.b1) * T))

    def history(s: float) -> float:
        return phi0

    start, value = 0.0, float(phi0)
    while start < T - 1e-15:
        stop = min(start + r0, T)
        past = history

        def rhs(t, y, past=past):
            return [rate * y[0] + params.b1 * past(t - r0)]

        sol = solve_ivp(rhs, (start, stop), [value], method="DOP853", rtol=rtol, atol=rtol * 1e-3, dense_output=True)
        if not sol.success:
            raise RuntimeError(f"delay ODE integration failed: {sol.message}")
        dense = sol.sol
        history = (lambda s, dense=dense, past=past, lo=start: past(s) if s < lo else float(dense(s)[0]))
        start, value = stop, float(sol.y[0, -1])
    return value


def deterministic_tangent_oracle(params: LinearDelayParams, phi0: float, T: float, grid: TimeGrid) -> float:
    """
    v(T) for the expected Lions tangent of the linear delay model.

    Each delay interval is integrated with DOP853 from the dense output of the
    previous one. The step is not halved: rtol starts at 1e-6 and drops tenfold
    until two successive values differ by less than 1e-8. The grid only supplies r0.
    """
    if phi0 == 0.0:
        return 0.0
    rtol = 1e-6
    previous = _method_of_steps(params, phi0, T, grid.r0, rtol)
    for _ in range(6):
        rtol /= 10.0
        current = _method_of_steps(params, phi0, T, grid.r0, rtol)
        if abs(current - previous) < ORACLE_TOL:
            return current
        previous = current
    logger.warning(f"Delay-ODE oracle did not settle below {ORACLE_TOL:g}; last change {abs(current - previous):.2e}")
    return current


def delay_ode_euler(params: LinearDelayParams, phi0: float, grid: TimeGrid) -> np.ndarray:
    """Grid Euler solution of the same delay ODE on [-r0, T], (n_total+1,)."""
    k, dt = grid.k, grid.dt
    v = np.empty(grid.n_total + 1)
    v[:k + 1] = phi0
    for n in range(grid.n_steps):
        now = v[k + n]
        v[k + n + 1] = now + dt * (-params.a * now + params.b1 * v[n] + params.c * now)
    return v
