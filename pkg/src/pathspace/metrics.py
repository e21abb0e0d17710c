"""Uniform norms on segments and empirical Wasserstein distances between segment clouds."""
import logging

import numpy as np
from scipy.optimize import linear_sum_assignment

from src.config import get_settings
from src.errors import GridMismatch, SizeMismatch, TooLarge
from src.pathspace.grid import Segment
from src.pathspace.law import LawFlow

logger = logging.getLogger(__name__)

# Rows of the cost matrix built per block; bounds the (rows, N, k+1, d) temporary.
_COST_BLOCK = 32


def sup_norm(seg: Segment | np.ndarray) -> float:
    """Uniform norm: max over the window of the Euclidean norm of xi(theta)."""
    window = seg.window if isinstance(seg, Segment) else np.asarray(seg, dtype=float)
    if window.ndim == 1:
        window = window[:, None]
    return float(np.max(np.linalg.norm(window, axis=-1)))


def segment_norms(windows: np.ndarray) -> np.ndarray:
    """Row-wise uniform norms of a stack of windows (n, k+1, d) -> (n,)."""
    return np.max(np.linalg.norm(windows, axis=-1), axis=-1)


def sup_cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise uniform distances ||a_i - b_j|| for two (N, k+1, d) clouds."""
    n = a.shape[0]
    cost = np.empty((n, b.shape[0]))
    for start in range(0, n, _COST_BLOCK):
        block = a[start:start + _COST_BLOCK]
        diff = block[:, None, :, :] - b[None, :, :, :]
        cost[start:start + _COST_BLOCK] = np.max(np.linalg.norm(diff, axis=-1), axis=-1)
    return cost


def empirical_wp(a: np.ndarray, b: np.ndarray, p: float = 1.0, cap: int | None = None) -> float:
    """
    Exact empirical W_p between two equally weighted segment clouds.

    Args:
        a: (N, k+1, d) segments
        b: (N, k+1, d) segments
        p: Order (>= 1)
        cap: Largest N solved exactly (defaults to settings.wp_exact_cap)

    Returns:
        (min over permutations of mean ||a_i - b_pi(i)||^p)^(1/p)

    Raises:
        SizeMismatch: particle counts, window lengths or dimensions differ
        TooLarge: N above the exact-assignment cap
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 3:
        raise SizeMismatch(f"cannot couple ensembles of shapes {a.shape} and {b.shape}")
    if p < 1:
        raise ValueError("p must be >= 1")

    cap = get_settings().wp_exact_cap if cap is None else cap
    n = a.shape[0]
    if n > cap:
        raise TooLarge(f"exact assignment limited to N <= {cap}, got N={n}")

    cost = sup_cost_matrix(a, b) ** p
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean() ** (1.0 / p))


def wp_lambda(a: LawFlow, b: LawFlow, p: float = 1.0, lam: float = 0.0, step_stride: int = 1) -> float:
    """
    Weighted sup-in-time distance sup_t e^{-lam t} W_p(a_t, b_t).

    Args:
        a: First law flow
        b: Second law flow (same grid, N, dim and retained steps)
        p: Wasserstein order
        lam: Exponential weight (>= 0)
        step_stride: Only compare every step_stride-th retained step

    Raises:
        GridMismatch: flows do not share grid or particle layout
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if not a.grid.same_as(b.grid) or a.steps != b.steps or (a.N, a.dim) != (b.N, b.dim):
        raise GridMismatch("law flows do not share grid, N and dim")

    best = 0.0
    for step in a.steps[::step_stride]:
        wa, wb = a.slice(step), b.slice(step)
        if np.array_equal(wa, wb):
            continue
        weight = np.exp(-lam * a.grid.time_of(step))
        best = max(best, weight * empirical_wp(wa, wb, p))
    return best
