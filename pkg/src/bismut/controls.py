"""
Cameron-Martin controls whose Malliavin tangent reproduces the Lions tangent at T.

Every builder reads base, law and tangent states only at indices <= the current
step, so the resulting hdot is adapted.
"""
from typing import Callable
import logging

import numpy as np
from scipy.integrate import cumulative_simpson

from src.config import get_settings
from src.errors import (
    AnticipatingControl,
    GridMismatch,
    HorizonTooShort,
    ModelNotAdditive,
    ModelNotHamiltonian,
    ModelSigmaNotStateOnly,
    SingularGram,
    SingularSigma,
)
from src.models.coefficients import CoefficientSet
from src.models.hamiltonian import HamiltonianParams
from src.pathspace.grid import TimeGrid
from src.pathspace.law import LawFlow
from src.solver.parallel import BlockExecutor
from src.solver.particles import EnsemblePaths
from src.tangents.solvers import check_alignment, damping_mask, initial_windows, solve_lions_tangent
from src.tangents.types import ControlPath, FundamentalMatrices, TangentKind, TangentPaths

logger = logging.getLogger(__name__)


# ============================================================================
# HELPERS
# ============================================================================

def right_inverse(sigma: np.ndarray) -> np.ndarray:
    """
    sigma^* (sigma sigma^*)^{-1} for a batch (n, d, m) of diffusion matrices.

    Raises:
        SingularSigma: sigma sigma^* singular or too ill-conditioned
    """
    gram = np.einsum("nij,nkj->nik", sigma, sigma)
    limit = get_settings().sigma_condition_limit
    if gram.shape[1] == 1:
        scale = gram[:, 0, 0]
        if np.any(scale <= 0) or not np.all(np.isfinite(scale)):
            raise SingularSigma("sigma sigma^* vanishes for some particle")
        return sigma.transpose(0, 2, 1) / scale[:, None, None]
    cond = np.linalg.cond(gram)
    if not np.all(np.isfinite(cond)) or np.max(cond) > limit:
        raise SingularSigma(f"sigma sigma^* condition number {np.max(cond):.3g} exceeds {limit:.3g}")
    return np.einsum("nji,njk->nik", sigma, np.linalg.inv(gram))


def _horizon(grid: TimeGrid, T: float, minimum: int = 1) -> tuple[float, int]:
    if abs(T - grid.T) > 1e-12 * max(1.0, T):
        raise GridMismatch(f"horizon {T} differs from the grid's T={grid.T}")
    cutoff = grid.cutoff_step
    if cutoff < minimum:
        raise HorizonTooShort(f"T={T} must exceed r0={grid.r0} by at least {minimum} steps")
    return grid.T - grid.r0, cutoff


def ramp_path(xi: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Z(t) = xi(t) on [-r0, 0], ((T-r0-t)^+ / (T-r0)) xi(0) afterwards."""
    tau = grid.T - grid.r0
    factor = np.maximum(tau - grid.step_times(), 0.0) / tau
    Z = np.empty((xi.shape[0], grid.n_total + 1, xi.shape[2]))
    Z[:, :grid.k + 1] = xi
    Z[:, grid.k:] = factor[None, :, None] * xi[:, -1:, :]
    return Z


def _add(a: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    return a if b is None else a + b


def _co_integrate(
    coeffs: CoefficientSet,
    base: EnsemblePaths,
    law: LawFlow,
    threads: int | None,
    control_at: Callable[[int, float, slice, np.ndarray, np.ndarray, np.ndarray], np.ndarray],
) -> np.ndarray:
    """
    Build hdot step by step together with the Malliavin tangent w it drives.

    control_at(n, t, rows, X_block, mu, W) sees the full w windows W at step n
    and returns hdot for the block.
    """
    grid = base.grid
    k, dt = grid.k, grid.dt
    N, d, m = base.N, base.dim, base.m
    w = np.zeros((N, grid.n_total + 1, d))
    hdot = np.empty((N, grid.n_steps, m))

    with BlockExecutor(threads) as executor:
        for n in range(grid.n_steps):
            t = n * dt
            X = base.segment(n)
            mu = law.slice(n)
            W = w[:, n:n + k + 1]

            def step(rows: slice) -> np.ndarray:
                Xb, Wb = X[rows], W[rows]
                hd = control_at(n, t, rows, Xb, mu, W)
                sigma = coeffs.diffusion(t, Xb, mu)
                new = Wb[:, -1] + (coeffs.drift_derivative(t, Xb, Wb, mu) + np.einsum("ndm,nm->nd", sigma, hd)) * dt
                noise = coeffs.diffusion_derivative(t, Xb, Wb, mu)
                if noise is not None:
                    new = new + np.einsum("ndm,nm->nd", noise, base.dW[rows, n])
                return np.concatenate([hd, new], axis=1)

            out = executor.map_rows(step, N)
            hdot[:, n] = out[:, :m]
            w[:, n + k + 1] = out[:, m:]
    return hdot


def _per_step(
    base: EnsemblePaths,
    law: LawFlow,
    threads: int | None,
    control_at: Callable[[int, float, slice, np.ndarray, np.ndarray], np.ndarray],
) -> np.ndarray:
    grid = base.grid
    hdot = np.empty((base.N, grid.n_steps, base.m))
    with BlockExecutor(threads) as executor:
        for n in range(grid.n_steps):
            t = n * grid.dt
            X = base.segment(n)
            mu = law.slice(n)
            hdot[:, n] = executor.map_rows(lambda rows: control_at(n, t, rows, X[rows], mu), base.N)
    return hdot


# ============================================================================
# EXACT CONTROLS
# ============================================================================

def build_additive_control(
    coeffs: CoefficientSet,
    phi: np.ndarray,
    base: EnsemblePaths,
    law: LawFlow,
    T: float,
    threads: int | None = None,
) -> ControlPath:
    """
    Ramp control for additive noise: hdot = -sigma^*(sigma sigma^*)^{-1} H with
    H = grad_{Z_t} b + L_b(Z_t - w_t) + xi(0) 1_{[0, T-r0)}(t) / (T-r0).

    The estimator built on it carries a leading minus.

    Raises:
        ModelNotAdditive: sigma depends on the state or the law
        SingularSigma: sigma sigma^* not invertible
    """
    if not coeffs.additive:
        raise ModelNotAdditive(f"{coeffs.name}: the additive control needs sigma = sigma(t)")
    grid = base.grid
    tau, cutoff = _horizon(grid, T)
    check_alignment(base, law)
    xi = initial_windows(phi, base)
    Z = ramp_path(xi, grid)
    k = grid.k
    pull = xi[:, -1] / tau

    def control_at(n, t, rows, Xb, mu, W):
        Zs = Z[:, n:n + k + 1]
        H = coeffs.drift_derivative(t, Xb, Zs[rows], mu)
        H = _add(H, coeffs.lions_drift(t, Xb, mu, Zs - W))
        if n < cutoff:
            H = H + pull[rows]
        return -np.einsum("nmd,nd->nm", right_inverse(coeffs.diffusion(t, Xb, mu)), H)

    hdot = _co_integrate(coeffs, base, law, threads, control_at)
    logger.debug(f"Additive control built (tau={tau:g}, cutoff step {cutoff})")
    return ControlPath(grid, hdot)


def build_multiplicative_control(
    coeffs: CoefficientSet,
    phi: np.ndarray,
    base: EnsemblePaths,
    law: LawFlow,
    U: TangentPaths,
    T: float,
    lions_tangent: TangentPaths | None = None,
    threads: int | None = None,
) -> ControlPath:
    """
    hdot = sigma^*(sigma sigma^*)^{-1}(t, X(t)) G(t) with G = U(t)/(T-r0-t) before T-r0
    and G = grad_{U_t} b + L_b(v_t) afterwards, v the Lions tangent of the same initials.
    """
    if not coeffs.sigma_state_only:
        raise ModelSigmaNotStateOnly(f"{coeffs.name}: the multiplicative control needs sigma(t, xi(0))")
    if U.kind != TangentKind.MULT_AUX or U.horizon is None or abs(U.horizon - T) > 1e-12 * max(1.0, T):
        raise GridMismatch("U must be the auxiliary tangent solved for the same horizon")
    grid = base.grid
    tau, cutoff = _horizon(grid, T, minimum=3)
    check_alignment(base, law)
    xi = initial_windows(phi, base)
    v = lions_tangent if lions_tangent is not None else solve_lions_tangent(coeffs, base, law, xi, threads)
    k = grid.k

    def control_at(n, t, rows, Xb, mu):
        if n < cutoff:
            G = U.values[rows, k + n] / (tau - t)
        else:
            G = coeffs.drift_derivative(t, Xb, U.segment(n)[rows], mu)
            G = _add(G, coeffs.lions_drift(t, Xb, mu, v.segment(n)))
        return np.einsum("nmd,nd->nm", right_inverse(coeffs.diffusion(t, Xb, mu)), G)

    return ControlPath(grid, _per_step(base, law, threads, control_at))


def hamiltonian_gram(K: FundamentalMatrices, params: HamiltonianParams, T: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Q_t = int_0^t s(T-r0-s) K_{T-r0,s} grad2_b1(s) B^* K_{T-r0,s}^* ds on the grid of [0, T-r0].

    Returns:
        (times (M+1,), Q (N, M+1, l, l)) integrated with cumulative Simpson
    """
    grid = K.grid
    tau, cutoff = _horizon(grid, T)
    s = grid.step_times()[:cutoff + 1]
    KM = K.terminal_products(cutoff)
    nodes = np.einsum("njab,njbc,cd,njed->njae", KM, K.coupling[:, :cutoff + 1], params.B.T, KM)
    nodes = nodes * (s * (tau - s))[None, :, None, None]
    Q = cumulative_simpson(nodes, dx=grid.dt, axis=1, initial=0.0)
    return s, Q


def build_hamiltonian_control(
    coeffs: CoefficientSet,
    xi: np.ndarray,
    base: EnsemblePaths,
    law: LawFlow,
    K: FundamentalMatrices,
    params: HamiltonianParams,
    T: float,
    threads: int | None = None,
) -> tuple[ControlPath, TangentPaths]:
    """
    Steering path alpha with alpha(t) = 0 on [T-r0, T] and the control that absorbs it.

    alpha2 follows a Gram-weighted correction of the linear ramp chosen so that the
    discrete first-block recursion alpha1_{n+1} = P_n alpha1_n + dt D_n alpha2_n lands
    on zero at T-r0; hdot then solves the second-block balance with the Lions
    pairing taken on alpha + w.

    Raises:
        ModelNotHamiltonian: no block split
        AnticipatingControl: the factors K differ across particles
        SingularGram: Q_{T-r0} numerically singular
    """
    if coeffs.hamiltonian_split is None:
        raise ModelNotHamiltonian(f"{coeffs.name} carries no Hamiltonian block split")
    grid = base.grid
    tau, M = _horizon(grid, T, minimum=2)
    check_alignment(base, law)
    xi = initial_windows(xi, base)
    l, m = coeffs.hamiltonian_split
    if not K.grid.same_as(grid) or K.N != base.N:
        raise GridMismatch("fundamental matrices do not match the base ensemble")
    if not K.particle_independent():
        raise AnticipatingControl("K depends on the particle path; the steering path would anticipate the noise")

    threshold = get_settings().gram_singular_threshold
    _, Q = hamiltonian_gram(K, params, T)
    smallest = float(np.linalg.svd(Q[0, M], compute_uv=False).min())
    if smallest < threshold:
        raise SingularGram(f"smallest singular value of Q_(T-r0) is {smallest:.3e}")

    dt, k = grid.dt, grid.k
    s = grid.step_times()
    P = K.factors[0]
    D = K.coupling[0]
    KM = K.terminal_products(M)[0]       # K_{M,j}, j = 0..M
    Bt = params.B.T

    G = np.einsum("jab,jbc->jac", KM[1:], D[:M])                                   # (M, l, m)
    E = (s[:M] * (tau - s[:M]))[:, None, None] * np.einsum("ab,jcb->jac", Bt, KM[1:])  # (M, m, l)
    q = dt * np.einsum("jab,jbc->jac", G, E)                                        # (M, l, l)
    Qt = np.concatenate([np.zeros((1, l, l)), np.cumsum(q, axis=0)])               # (M+1, l, l)

    theta = np.array([max(np.linalg.eigvalsh(0.5 * (Qn + Qn.T)).min(), 0.0) for Qn in Qt])
    omega = theta ** 2
    Theta = omega[1:].sum()
    if Theta <= 0.0:
        raise SingularGram("discrete Gram matrices never become positive definite before T-r0")
    weighted = np.zeros((M + 1, l, l))
    for n in range(1, M + 1):
        if omega[n] > 0.0:
            weighted[n] = omega[n] * np.linalg.inv(Qt[n])
    # A_j = Theta^{-1} sum_{n > j} omega_n Qt_n^{-1}
    A = np.cumsum(weighted[::-1], axis=0)[::-1][1:] / Theta                        # (M, l, l)

    C = dt * np.einsum("jab,j->ab", G, (tau - s[:M]) / tau)                         # (l, m)
    xi1, xi2 = xi[:, -1, :l], xi[:, -1, l:]
    gamma = np.einsum("ab,nb->na", np.linalg.inv(Qt[M]) @ C, xi2)                   # (N, l)
    kappa = np.einsum("ab,nb->na", KM[0], xi1)                                      # (N, l)

    alpha2 = np.zeros((base.N, grid.n_steps + 1, m))
    correction = np.einsum("jab,nb->nja", A, kappa) + gamma[:, None, :]             # (N, M, l)
    alpha2[:, :M] = ((tau - s[:M]) / tau)[None, :, None] * xi2[:, None, :] - np.einsum("jab,njb->nja", E, correction)

    alpha1 = np.empty((base.N, grid.n_steps + 1, l))
    alpha1[:, 0] = xi1
    for n in range(grid.n_steps):
        alpha1[:, n + 1] = np.einsum("ab,nb->na", P[n], alpha1[:, n]) + dt * np.einsum("ab,nb->na", D[n], alpha2[:, n])

    alpha = np.empty((base.N, grid.n_total + 1, l + m))
    alpha[:, :k + 1] = xi
    alpha[:, k:, :l] = alpha1
    alpha[:, k:, l:] = alpha2
    residual = float(np.max(np.abs(alpha[:, k + M:]))) if base.N else 0.0
    logger.debug(f"Steering path residual on [T-r0, T]: {residual:.3e}; min sv Q = {smallest:.3e}")

    sigma_inv = params.sigma_inv

    def control_at(n, t, rows, Xb, mu, W):
        window = alpha[:, n:n + k + 1]
        g2 = coeffs.drift_derivative(t, Xb, window[rows], mu)[:, l:]
        paired = coeffs.lions_drift(t, Xb, mu, window + W)
        if paired is not None:
            g2 = g2 + paired[:, l:]
        g2 = g2 - (alpha2[rows, n + 1] - alpha2[rows, n]) / dt
        return np.einsum("ab,nb->na", sigma_inv, g2)

    hdot = _co_integrate(coeffs, base, law, threads, control_at)
    return ControlPath(grid, hdot), TangentPaths(grid, alpha, TangentKind.ALPHA)


# ============================================================================
# ASYMPTOTIC CONTROLS
# ============================================================================

def build_asymptotic_control(
    coeffs: CoefficientSet,
    phi: np.ndarray,
    base: EnsemblePaths,
    law: LawFlow,
    Z: TangentPaths,
    v: TangentPaths,
    lam: float,
    degenerate: bool | None = None,
    threads: int | None = None,
) -> ControlPath:
    """
    hdot = sigma^*(sigma sigma^*)^{-1}(t, X_t) [L_b(v_t) + lam Z(t)].

    The degenerate variant (Hamiltonian models) inverts sigma on the second block
    and only pairs b2, matching the damped tangent that damps that block alone.
    """
    if Z.kind != TangentKind.DAMPED or Z.lam is None or abs(Z.lam - lam) > 1e-15 * max(1.0, lam):
        raise ValueError("Z must be the damped tangent solved with the same lambda")
    if v.kind != TangentKind.LIONS:
        raise ValueError("v must be the Lions tangent of the same direction")
    check_alignment(base, law)
    initial_windows(phi, base)
    grid = base.grid
    k = grid.k
    mask = damping_mask(coeffs, degenerate)
    degenerate = bool(mask[0] == 0.0)

    if degenerate:
        l, _ = coeffs.hamiltonian_split
        sigma_inv = coeffs.hamiltonian.sigma_inv

        def control_at(n, t, rows, Xb, mu):
            g = lam * Z.values[rows, k + n, l:]
            paired = coeffs.lions_drift(t, Xb, mu, v.segment(n))
            if paired is not None:
                g = g + paired[:, l:]
            return np.einsum("ab,nb->na", sigma_inv, g)
    else:
        def control_at(n, t, rows, Xb, mu):
            g = _add(lam * Z.values[rows, k + n], coeffs.lions_drift(t, Xb, mu, v.segment(n)))
            return np.einsum("nmd,nd->nm", right_inverse(coeffs.diffusion(t, Xb, mu)), g)

    return ControlPath(grid, _per_step(base, law, threads, control_at))
