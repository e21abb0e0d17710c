"""
Linear tangent equations along a frozen base ensemble.

Every solver reuses the base's stored increments and the same left-point Euler
scheme as the forward solve, so tangents are the exact linearization of the
discrete forward map.
"""
from typing import Callable
import logging

import numpy as np

from src.errors import GridMismatch, HorizonTooShort, ModelNotHamiltonian, ModelSigmaNotStateOnly, NonFinite, SizeMismatch
from src.models.coefficients import CoefficientSet
from src.pathspace.law import LawFlow
from src.solver.parallel import BlockExecutor
from src.solver.particles import EnsemblePaths
from src.tangents.types import ControlPath, FundamentalMatrices, TangentKind, TangentPaths

logger = logging.getLogger(__name__)

Forcing = Callable[[int, float, slice, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def check_alignment(base: EnsemblePaths, law: LawFlow) -> None:
    """Base and law must share grid and particle count; the law must be dense."""
    if not base.grid.same_as(law.grid):
        raise GridMismatch("base ensemble and law flow live on different grids")
    if base.N != law.N:
        raise GridMismatch(f"base has N={base.N}, law has N={law.N}")
    law.require_dense()


def initial_windows(init: np.ndarray, base: EnsemblePaths) -> np.ndarray:
    arr = np.asarray(init, dtype=float)
    expected = (base.N, base.grid.k + 1, base.dim)
    if arr.shape != expected:
        raise SizeMismatch(f"tangent initials of shape {arr.shape}, expected {expected}")
    return arr


def _solve_linear(
    coeffs: CoefficientSet,
    base: EnsemblePaths,
    law: LawFlow,
    init: np.ndarray,
    threads: int | None,
    lions: Callable[[int, np.ndarray], np.ndarray] | None = None,
    forcing: Forcing | None = None,
    n_stop: int | None = None,
) -> np.ndarray:
    """
    Euler for dV = [grad_V b + L_b(lions) + forcing]dt + [grad_V sigma + L_sigma(lions)]dW.

    lions(n, V) returns the tangent ensemble fed to the Lions pairings at step n
    (V itself for the Lions tangent). Steps n >= n_stop are not integrated and
    their values are left at zero.
    """
    grid = base.grid
    k, dt = grid.k, grid.dt
    n_stop = grid.n_steps if n_stop is None else n_stop
    values = np.zeros((base.N, grid.n_total + 1, base.dim))
    values[:, :k + 1] = init

    with BlockExecutor(threads) as executor:
        for n in range(n_stop):
            t = n * dt
            X = base.segment(n)
            mu = law.slice(n)
            V = values[:, n:n + k + 1]
            paired = lions(n, V) if lions is not None else None

            def step(rows: slice) -> np.ndarray:
                Xb, Vb = X[rows], V[rows]
                drift = coeffs.drift_derivative(t, Xb, Vb, mu)
                noise = coeffs.diffusion_derivative(t, Xb, Vb, mu)
                if paired is not None:
                    lions_b = coeffs.lions_drift(t, Xb, mu, paired)
                    if lions_b is not None:
                        drift = drift + lions_b
                    lions_s = coeffs.lions_diffusion(t, Xb, mu, paired)
                    if lions_s is not None:
                        noise = lions_s if noise is None else noise + lions_s
                if forcing is not None:
                    drift = drift + forcing(n, t, rows, Xb, Vb, mu)
                new = Vb[:, -1] + drift * dt
                if noise is not None:
                    new = new + np.einsum("ndm,nm->nd", noise, base.dW[rows, n])
                return new

            new = executor.map_rows(step, base.N)
            if not np.all(np.isfinite(new)):
                raise NonFinite(n + 1, t + dt, "tangent")
            values[:, n + k + 1] = new
    return values


def solve_malliavin_tangent(
    coeffs: CoefficientSet,
    base: EnsemblePaths,
    law: LawFlow,
    control: ControlPath,
    threads: int | None = None,
) -> TangentPaths:
    """
    Derivative of the forward map along the Cameron-Martin direction h:
    dw = [grad_w b + sigma hdot]dt + grad_w sigma dW, w_0 = 0.
    """
    check_alignment(base, law)
    if not control.grid.same_as(base.grid) or control.hdot.shape != (base.N, base.grid.n_steps, base.m):
        raise GridMismatch("control does not match the base ensemble")
    hdot = control.hdot

    def forcing(n, t, rows, Xb, Vb, mu):
        return np.einsum("ndm,nm->nd", coeffs.diffusion(t, Xb, mu), hdot[rows, n])

    init = np.zeros((base.N, base.grid.k + 1, base.dim))
    values = _solve_linear(coeffs, base, law, init, threads, forcing=forcing)
    return TangentPaths(base.grid, values, TangentKind.MALLIAVIN)


def solve_lions_tangent(
    coeffs: CoefficientSet,
    base: EnsemblePaths,
    law: LawFlow,
    init_tangents: np.ndarray,
    threads: int | None = None,
) -> TangentPaths:
    """
    Derivative of the forward map along the initial transport direction phi, all N
    tangents coupled through the Lions pairing of the whole (base, tangent) ensemble.
    """
    check_alignment(base, law)
    init = initial_windows(init_tangents, base)
    values = _solve_linear(coeffs, base, law, init, threads, lions=lambda n, V: V)
    return TangentPaths(base.grid, values, TangentKind.LIONS)


def damping_mask(coeffs: CoefficientSet, second_block_only: bool | None = None) -> np.ndarray:
    """Coordinates the damping acts on: all of them, or the noisy block of a Hamiltonian system."""
    if second_block_only is None:
        second_block_only = coeffs.hamiltonian_split is not None
    mask = np.ones(coeffs.d)
    if second_block_only:
        if coeffs.hamiltonian_split is None:
            raise ModelNotHamiltonian(f"{coeffs.name} has no block split to damp")
        mask[:coeffs.hamiltonian_split[0]] = 0.0
    return mask


def solve_damped_tangent(
    coeffs: CoefficientSet,
    base: EnsemblePaths,
    law: LawFlow,
    init_tangents: np.ndarray,
    lam: float,
    threads: int | None = None,
    second_block_only: bool | None = None,
) -> TangentPaths:
    """
    dZ = [grad_Z b - lam * mask * Z(t)]dt + grad_Z sigma dW, Z_0 = phi(X_0), no Lions term.

    The mask is the second block for Hamiltonian models unless overridden.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    check_alignment(base, law)
    init = initial_windows(init_tangents, base)
    mask = damping_mask(coeffs, second_block_only)

    def forcing(n, t, rows, Xb, Vb, mu):
        return -lam * mask * Vb[:, -1]

    values = _solve_linear(coeffs, base, law, init, threads, forcing=forcing)
    return TangentPaths(base.grid, values, TangentKind.DAMPED, lam=float(lam))


def solve_multiplicative_aux(
    coeffs: CoefficientSet,
    base: EnsemblePaths,
    law: LawFlow,
    init_tangents: np.ndarray,
    T: float,
    lions_tangent: TangentPaths | None = None,
    threads: int | None = None,
) -> TangentPaths:
    """
    Auxiliary tangent U with the singular pull -U(t)/(T - r0 - t) toward zero.

    U is integrated on [0, T-r0-dt] with the Lions pairing taken on the Lions
    tangent v of the same initials, then set to 0 at every grid time of
    [T-r0, T]. Segments after T-r0 keep their pre-cutoff history.

    Raises:
        ModelSigmaNotStateOnly: sigma depends on more than (t, xi(0))
        HorizonTooShort: T <= r0 + 2 dt
    """
    grid = base.grid
    if not coeffs.sigma_state_only:
        raise ModelSigmaNotStateOnly(f"{coeffs.name}: the multiplicative construction needs sigma(t, xi(0))")
    if abs(T - grid.T) > 1e-12 * max(1.0, T):
        raise GridMismatch(f"horizon {T} differs from the grid's T={grid.T}")
    cutoff = grid.cutoff_step
    if cutoff <= 2:
        raise HorizonTooShort(f"T={T} must exceed r0 + 2dt = {grid.r0 + 2 * grid.dt}")

    check_alignment(base, law)
    init = initial_windows(init_tangents, base)
    if lions_tangent is None:
        lions_tangent = solve_lions_tangent(coeffs, base, law, init, threads)
    tau = grid.T - grid.r0

    def forcing(n, t, rows, Xb, Vb, mu):
        return -Vb[:, -1] / (tau - t)

    values = _solve_linear(
        coeffs, base, law, init, threads,
        lions=lambda n, V: lions_tangent.segment(n),
        forcing=forcing,
        n_stop=cutoff - 1,
    )
    values[:, grid.k + cutoff:] = 0.0
    logger.debug(f"Auxiliary tangent cut at step {cutoff} (t={tau:g})")
    return TangentPaths(grid, values, TangentKind.MULT_AUX, horizon=float(T))


def solve_fundamental_K(coeffs: CoefficientSet, base: EnsemblePaths) -> FundamentalMatrices:
    """Per-step factors I + dt * grad1_b1(t_j, X(t_j)) and couplings grad2_b1(t_j, X(t_j))."""
    params = coeffs.hamiltonian
    if coeffs.hamiltonian_split is None or params is None:
        raise ModelNotHamiltonian(f"{coeffs.name} carries no Hamiltonian block split")

    grid = base.grid
    l, m = coeffs.hamiltonian_split
    eye = np.eye(l)
    factors = np.empty((base.N, grid.n_steps, l, l))
    coupling = np.empty((base.N, grid.n_steps + 1, l, m))
    for j in range(grid.n_steps + 1):
        t = j * grid.dt
        x = base.paths[:, grid.k + j]
        coupling[:, j] = params.grad2_b1(t, x)
        if j < grid.n_steps:
            factors[:, j] = eye + grid.dt * params.grad1_b1(t, x)
    return FundamentalMatrices(grid, factors, coupling)
