"""Picard iteration mu -> law(decoupled solution under mu) on law flows."""
from dataclasses import dataclass, field
import logging

import numpy as np

from src.errors import NoConvergence
from src.models.coefficients import CoefficientSet
from src.pathspace.grid import TimeGrid
from src.pathspace.law import LawFlow, law_from_paths
from src.pathspace.metrics import wp_lambda
from src.solver.particles import InitialSampler, ShiftedSampler, simulate_decoupled
from src.solver.rng import brownian_increments

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PicardDiagnostics:
    """Per-iteration distances W_{p,lam}(mu^(j+1), mu^(j)) and their ratios."""
    converged: bool
    iterations: int
    distances: tuple[float, ...]
    ratios: tuple[float, ...] = field(default_factory=tuple)
    lam: float = 0.0
    p: float = 1.0

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "distances": list(self.distances),
            "ratios": list(self.ratios),
            "lam": self.lam,
            "p": self.p,
        }


def frozen_initial_flow(grid: TimeGrid, windows: np.ndarray) -> LawFlow:
    """mu^(0): every particle keeps its initial segment and then stays at xi(0)."""
    N, _, d = windows.shape
    paths = np.empty((N, grid.n_total + 1, d))
    paths[:, :grid.k + 1] = windows
    paths[:, grid.k + 1:] = windows[:, -1:, :]
    return law_from_paths(grid, paths)


def picard_law_fixedpoint(
    coeffs: CoefficientSet,
    init: InitialSampler | ShiftedSampler,
    grid: TimeGrid,
    N: int,
    seed: int,
    lam: float,
    tol: float,
    max_iter: int,
    p: float = 1.0,
    metric_stride: int = 1,
    threads: int | None = None,
    strict: bool = False,
) -> tuple[LawFlow, PicardDiagnostics]:
    """
    Iterate the decoupled solve with common initials and noise until the law flow settles.

    Args:
        lam: Weight of the W_{p,lam} metric (>= 0)
        tol: Stop when W_{p,lam}(mu^(j+1), mu^(j)) < tol
        max_iter: Largest number of metric evaluations
        metric_stride: Compare every metric_stride-th step only
        strict: Raise instead of returning the best iterate when max_iter is hit

    Returns:
        (final or best law flow, diagnostics)

    Raises:
        NoConvergence: strict and max_iter reached
    """
    if lam < 0 or tol <= 0 or max_iter < 1:
        raise ValueError("need lam >= 0, tol > 0 and max_iter >= 1")

    windows = init.draw(N, grid.k, seed)
    dW = brownian_increments(seed, N, grid.n_steps, coeffs.m, grid.dt)

    previous = law_from_paths(grid, simulate_decoupled(coeffs, frozen_initial_flow(grid, windows), windows, grid, seed, threads, dW=dW).paths)
    distances: list[float] = []
    best, best_distance = previous, np.inf

    for iteration in range(1, max_iter + 1):
        current = law_from_paths(grid, simulate_decoupled(coeffs, previous, windows, grid, seed, threads, dW=dW).paths)
        distance = wp_lambda(current, previous, p, lam, metric_stride)
        distances.append(distance)
        logger.info(f"Picard iteration {iteration}: W_{p:g},{lam:g} = {distance:.3e}")

        if distance <= best_distance:
            best, best_distance = current, distance
        if distance < tol:
            diagnostics = PicardDiagnostics(True, iteration, tuple(distances), _ratios(distances), lam, p)
            return current, diagnostics
        previous = current

    diagnostics = PicardDiagnostics(False, max_iter, tuple(distances), _ratios(distances), lam, p)
    if strict:
        raise NoConvergence(f"Picard iteration did not reach tol={tol:g} in {max_iter} iterations (last {distances[-1]:.3e})")
    logger.warning(f"Picard iteration stopped at max_iter={max_iter}; returning best iterate (W={best_distance:.3e})")
    return best, diagnostics


def _ratios(distances: list[float]) -> tuple[float, ...]:
    return tuple(
        distances[j] / distances[j - 1]
        for j in range(1, len(distances))
        if distances[j - 1] > 0
    )
