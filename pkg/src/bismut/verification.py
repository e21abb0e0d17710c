"""Numerical checks of integration by parts, the chain rule and damped-tangent decay."""
from dataclasses import dataclass
from typing import Callable
import logging

import numpy as np

from src.bismut.estimators import RunSetup
from src.bismut.functionals import Direction, TestFunctional
from src.bismut.weights import ito_weight, sample_stderr
from src.pathspace.law import LawFlow
from src.pathspace.metrics import segment_norms
from src.solver.particles import EnsemblePaths
from src.tangents.solvers import solve_malliavin_tangent
from src.tangents.types import ControlPath, TangentPaths

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IbpCheck:
    lhs: float
    rhs: float
    stderr: float  # of the per-particle difference

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "stderr": self.stderr, "gap": self.gap}


@dataclass(frozen=True)
class ChainRuleCheck:
    numeric: float
    analytic: float
    stderr: float
    epsilon: float

    @property
    def gap(self) -> float:
        return abs(self.numeric - self.analytic)

    def to_dict(self) -> dict:
        return {
            "numeric": self.numeric,
            "analytic": self.analytic,
            "gap": self.gap,
            "stderr": self.stderr,
            "epsilon": self.epsilon,
        }


def verify_ibp(
    f: TestFunctional,
    control: ControlPath,
    setup: RunSetup,
    base: tuple[EnsemblePaths, LawFlow] | None = None,
) -> IbpCheck:
    """
    E[(grad_{w^h_T} f)(X_T)] against E[f(X_T) D*(h)].

    Returns:
        IbpCheck with both sample means and the standard error of their per-particle difference
    """
    ensemble, law = base if base is not None else setup.simulate()
    w = solve_malliavin_tangent(setup.coeffs, ensemble, law, control, setup.threads)
    terminal = ensemble.terminal_segments()
    lhs = f.derivative(terminal, w.terminal_segments())
    rhs = f(terminal) * ito_weight(control, ensemble)
    check = IbpCheck(float(np.mean(lhs)), float(np.mean(rhs)), sample_stderr(lhs - rhs))
    logger.info(f"IBP: lhs={check.lhs:.6g} rhs={check.rhs:.6g} stderr={check.stderr:.3g}")
    return check


def verify_chain_rule(
    g: TestFunctional,
    outer: Callable[[float], float],
    outer_prime: Callable[[float], float],
    phi: Direction,
    samples: np.ndarray,
    epsilon: float = 1e-4,
) -> ChainRuleCheck:
    """
    F(mu) = outer(mu(g)) differentiated along phi two ways.

    numeric:  [F(law of xi + eps phi(xi)) - F(law of xi - eps phi(xi))] / (2 eps)
    analytic: mean_i outer'(mu(g)) <grad g(xi_i), phi(xi_i)>
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    shift = phi(samples)
    upper = outer(float(np.mean(g(samples + epsilon * shift))))
    lower = outer(float(np.mean(g(samples - epsilon * shift))))
    numeric = (upper - lower) / (2.0 * epsilon)

    values = g(samples)
    mean_g = float(np.mean(values))
    pairing = g.derivative(samples, shift)
    mean_pairing = float(np.mean(pairing))
    slope = outer_prime(mean_g)
    analytic = slope * mean_pairing

    # delta-method influence of (mean g, mean pairing) on the analytic value
    h = 1e-5 * (1.0 + abs(mean_g))
    curvature = (outer_prime(mean_g + h) - outer_prime(mean_g - h)) / (2.0 * h)
    influence = curvature * mean_pairing * (values - mean_g) + slope * (pairing - mean_pairing)
    return ChainRuleCheck(float(numeric), float(analytic), sample_stderr(influence), epsilon)


def damped_decay_slope(Z: TangentPaths, t_min: float = 0.2, t_max: float = 1.0) -> float:
    """Least-squares slope of log E ||Z_t||^2 over the grid times in [t_min, t_max]."""
    grid = Z.grid
    times = grid.step_times()
    steps = np.flatnonzero((times >= t_min - 1e-12) & (times <= t_max + 1e-12))
    if steps.size < 2:
        raise ValueError(f"need at least two grid times in [{t_min}, {t_max}]")
    energy = np.array([np.mean(segment_norms(Z.segment(int(n))) ** 2) for n in steps])
    slope, _ = np.polyfit(times[steps], np.log(energy), 1)
    return float(slope)
