"""Monte Carlo estimators of the intrinsic derivative D^L_phi (P_T f)(mu)."""
from dataclasses import dataclass, field
from enum import Enum
import logging

import numpy as np

from src.bismut.controls import (
    build_additive_control,
    build_asymptotic_control,
    build_hamiltonian_control,
    build_multiplicative_control,
    hamiltonian_gram,
)
from src.bismut.functionals import Direction, Smoothness, TestFunctional
from src.bismut.weights import ito_weight, sample_stderr
from src.errors import ModelNotAdditive, ModelNotHamiltonian, ModelSigmaNotStateOnly
from src.models.coefficients import CoefficientSet
from src.pathspace.grid import TimeGrid
from src.pathspace.law import LawFlow
from src.solver.particles import EnsemblePaths, InitialSampler, ShiftedSampler, simulate_particles
from src.tangents.solvers import (
    solve_damped_tangent,
    solve_fundamental_K,
    solve_lions_tangent,
    solve_multiplicative_aux,
)

logger = logging.getLogger(__name__)


class Flavor(str, Enum):
    ADDITIVE_EXACT = "additive_exact"
    HAMILTONIAN_EXACT = "hamiltonian_exact"
    MULTIPLICATIVE_EXACT = "multiplicative_exact"
    ASYMPTOTIC_NONDEG = "asymptotic_nondeg"
    ASYMPTOTIC_HAMILTONIAN = "asymptotic_hamiltonian"

    @property
    def asymptotic(self) -> bool:
        return self in (Flavor.ASYMPTOTIC_NONDEG, Flavor.ASYMPTOTIC_HAMILTONIAN)


# Estimate = sign * mean f(X_T) D*(h); only the additive ramp carries a minus.
FLAVOR_SIGN = {
    Flavor.ADDITIVE_EXACT: -1.0,
    Flavor.HAMILTONIAN_EXACT: 1.0,
    Flavor.MULTIPLICATIVE_EXACT: 1.0,
    Flavor.ASYMPTOTIC_NONDEG: 1.0,
    Flavor.ASYMPTOTIC_HAMILTONIAN: 1.0,
}


@dataclass(frozen=True)
class RunSetup:
    """Everything a forward solve needs besides the direction."""
    coeffs: CoefficientSet
    init: InitialSampler | ShiftedSampler
    grid: TimeGrid
    N: int
    seed: int
    threads: int | None = None

    def simulate(self) -> tuple[EnsemblePaths, LawFlow]:
        base = simulate_particles(self.coeffs, self.init, self.grid, self.N, self.seed, self.threads)
        return base, base.law()

    def shifted(self, direction: Direction, epsilon: float) -> "RunSetup":
        return RunSetup(self.coeffs, ShiftedSampler(self.init, direction, epsilon), self.grid, self.N, self.seed, self.threads)


@dataclass(frozen=True)
class BismutEstimate:
    """Derivative estimate with its per-particle weights and diagnostics."""
    value: float
    stderr: float
    n_particles: int
    flavor: Flavor
    weights: np.ndarray
    remainder: float | None = None
    remainder_stderr: float | None = None
    remainder_included: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.weights.flags.writeable = False

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "n_particles": self.n_particles,
            "flavor": self.flavor.value,
            "remainder": self.remainder,
            "remainder_stderr": self.remainder_stderr,
            "remainder_included": self.remainder_included,
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class FdEstimate:
    """Finite-difference derivative with common random numbers."""
    value: float
    stderr: float
    epsilon: float
    quotient: float              # D(epsilon)
    quotient_half: float | None  # D(epsilon / 2)
    epsilon_term: float          # |D(epsilon/2) - D(epsilon)|, 0 without Richardson

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "epsilon": self.epsilon,
            "quotient": self.quotient,
            "quotient_half": self.quotient_half,
            "epsilon_term": self.epsilon_term,
        }


def check_flavor(coeffs: CoefficientSet, flavor: Flavor) -> None:
    """Raise the model-flag error a flavor would hit, before any simulation."""
    if flavor == Flavor.ADDITIVE_EXACT and not coeffs.additive:
        raise ModelNotAdditive(f"{flavor.value} needs a model with the 'additive' flag")
    if flavor == Flavor.MULTIPLICATIVE_EXACT and not coeffs.sigma_state_only:
        raise ModelSigmaNotStateOnly(f"{flavor.value} needs a model with the 'sigma_state_only' flag")
    if flavor in (Flavor.HAMILTONIAN_EXACT, Flavor.ASYMPTOTIC_HAMILTONIAN) and coeffs.hamiltonian_split is None:
        raise ModelNotHamiltonian(f"{flavor.value} needs a model with the 'hamiltonian_split' flag")


def estimate_bismut(
    f: TestFunctional,
    flavor: Flavor,
    phi: Direction,
    setup: RunSetup,
    lam: float | None = None,
    include_remainder: bool = True,
    base: tuple[EnsemblePaths, LawFlow] | None = None,
) -> BismutEstimate:
    """
    Run forward solve, tangents, control and weights for one flavor.

    Args:
        f: Test functional
        flavor: Which control construction to use
        phi: Transport direction applied to the initial segments
        setup: Model, initial law, grid, N, seed, threads
        lam: Damping for the asymptotic flavors
        include_remainder: Add E(grad_{Z_T} f)(X_T) to asymptotic estimates
        base: Precomputed (ensemble, law) from setup.simulate()

    Returns:
        BismutEstimate (value = mean of weights, plus the remainder when included)
    """
    flavor = Flavor(flavor)
    coeffs, grid, threads = setup.coeffs, setup.grid, setup.threads
    check_flavor(coeffs, flavor)
    if flavor.asymptotic and (lam is None or lam < 0):
        raise ValueError(f"{flavor.value} needs lam >= 0")

    ensemble, law = base if base is not None else setup.simulate()
    xi = phi(ensemble.segment(0))
    T = grid.T
    diagnostics: dict = {}
    remainder_samples = None

    logger.info(f"Estimating {flavor.value} for {f.name} along {phi.name} (N={ensemble.N})")
    if flavor == Flavor.ADDITIVE_EXACT:
        control = build_additive_control(coeffs, xi, ensemble, law, T, threads)
    elif flavor == Flavor.MULTIPLICATIVE_EXACT:
        v = solve_lions_tangent(coeffs, ensemble, law, xi, threads)
        U = solve_multiplicative_aux(coeffs, ensemble, law, xi, T, lions_tangent=v, threads=threads)
        control = build_multiplicative_control(coeffs, xi, ensemble, law, U, T, lions_tangent=v, threads=threads)
    elif flavor == Flavor.HAMILTONIAN_EXACT:
        K = solve_fundamental_K(coeffs, ensemble)
        control, alpha = build_hamiltonian_control(coeffs, xi, ensemble, law, K, coeffs.hamiltonian, T, threads)
        _, Q = hamiltonian_gram(K, coeffs.hamiltonian, T)
        diagnostics["gram_min_singular_value"] = float(np.linalg.svd(Q[0, -1], compute_uv=False).min())
        diagnostics["alpha_terminal_sup"] = float(np.max(np.abs(alpha.values[:, grid.k + grid.cutoff_step:])))
    else:
        degenerate = flavor == Flavor.ASYMPTOTIC_HAMILTONIAN
        v = solve_lions_tangent(coeffs, ensemble, law, xi, threads)
        Z = solve_damped_tangent(coeffs, ensemble, law, xi, lam, threads, second_block_only=degenerate)
        control = build_asymptotic_control(coeffs, xi, ensemble, law, Z, v, lam, degenerate, threads)
        remainder_samples = f.derivative(ensemble.terminal_segments(), Z.terminal_segments())
        diagnostics["lam"] = float(lam)
        diagnostics["remainder_method"] = "analytic" if f.grad_dir is not None else "finite_difference"
        diagnostics["validity"] = (
            "bounded gradient or p > 4" if f.smoothness == Smoothness.BOUNDED_C1 else "p in [2, 4] under dissipativity"
        )

    raw = ito_weight(control, ensemble)
    weights = FLAVOR_SIGN[flavor] * f(ensemble.terminal_segments()) * raw
    value = float(np.mean(weights))
    stderr = sample_stderr(weights)
    diagnostics["raw_weight_mean"] = float(np.mean(raw))
    diagnostics["raw_weight_stderr"] = sample_stderr(raw)
    diagnostics["control_energy"] = float(np.mean(control.energy()))

    remainder = remainder_stderr = None
    included = False
    if remainder_samples is not None:
        remainder = float(np.mean(remainder_samples))
        remainder_stderr = sample_stderr(remainder_samples)
        diagnostics["truncation_error"] = abs(remainder)
        diagnostics["combined_stderr"] = sample_stderr(weights + remainder_samples)
        if include_remainder:
            value += remainder
            included = True

    logger.info(f"{flavor.value}: {value:.6g} +/- {stderr:.3g}")
    return BismutEstimate(
        value=value,
        stderr=stderr,
        n_particles=ensemble.N,
        flavor=flavor,
        weights=weights,
        remainder=remainder,
        remainder_stderr=remainder_stderr,
        remainder_included=included,
        diagnostics=diagnostics,
    )


def estimate_fd(
    f: TestFunctional,
    phi: Direction,
    epsilon: float,
    setup: RunSetup,
    richardson: bool = True,
    base: tuple[EnsemblePaths, LawFlow] | None = None,
) -> FdEstimate:
    """
    [E f(X_T^eps) - E f(X_T)] / eps with X_0 shifted to X_0 + eps phi(X_0) on common noise.

    With richardson the pair (eps, eps/2) is extrapolated to 2 D(eps/2) - D(eps).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    ensemble, _ = base if base is not None else setup.simulate()
    f0 = f(ensemble.terminal_segments())

    def differences(eps: float) -> np.ndarray:
        shifted, _ = setup.shifted(phi, eps).simulate()
        return (f(shifted.terminal_segments()) - f0) / eps

    full = differences(epsilon)
    quotient = float(np.mean(full))
    if not richardson:
        return FdEstimate(quotient, sample_stderr(full), epsilon, quotient, None, 0.0)

    half = differences(epsilon / 2.0)
    samples = 2.0 * half - full
    quotient_half = float(np.mean(half))
    return FdEstimate(
        value=float(np.mean(samples)),
        stderr=sample_stderr(samples),
        epsilon=epsilon,
        quotient=quotient,
        quotient_half=quotient_half,
        epsilon_term=abs(quotient_half - quotient),
    )
