"""
Coefficient sets for distribution-path dependent SDEs.

All callbacks are batch-vectorized over observer segments:
    drift(t, segs, law)                   segs (n, k+1, d), law (N, k+1, d) -> (n, d)
    diffusion(t, segs, law)               -> (n, d, m)
    drift_dir(t, segs, dirs, law)         dirs (n, k+1, d) -> (n, d)
    diffusion_dir(t, segs, dirs)          -> (n, d, m)
    drift_lions_pairing(t, segs, law, tangent)       tangent (N, k+1, d) -> (n, d)
    diffusion_lions_pairing(t, segs, law, tangent)   -> (n, d, m)

Callbacks must be pure: the solvers call them concurrently from worker threads
on disjoint row blocks.
"""
from dataclasses import dataclass, field
from typing import Any, Callable
import logging

import numpy as np

from src.config import get_settings
from src.errors import TooLarge
from src.pathspace.grid import Segment
from src.pathspace.metrics import segment_norms

logger = logging.getLogger(__name__)

DriftFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
DiffusionFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
DriftDirFn = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
DiffusionDirFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
PairingFn = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
KernelFn = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CoefficientSet:
    """Drift, diffusion, their directional derivatives and Lions pairings for one model."""
    name: str
    d: int
    m: int
    drift: DriftFn
    diffusion: DiffusionFn
    drift_dir: DriftDirFn | None = None
    diffusion_dir: DiffusionDirFn | None = None
    drift_lions_pairing: PairingFn | None = None
    diffusion_lions_pairing: PairingFn | None = None
    additive: bool = False            # sigma depends on t only
    sigma_state_only: bool = False    # sigma(t, xi(0))
    mu_free_sigma: bool = True
    hamiltonian_split: tuple[int, int] | None = None
    hamiltonian: Any = None           # HamiltonianParams when hamiltonian_split is set
    metadata: dict = field(default_factory=dict)

    def drift_derivative(self, t: float, segs: np.ndarray, dirs: np.ndarray, law: np.ndarray) -> np.ndarray:
        """(grad_dirs b)(t, segs, mu); finite differences when no analytic callback is set."""
        if self.drift_dir is not None:
            return self.drift_dir(t, segs, dirs, law)
        return fd_directional_derivative(lambda s: self.drift(t, s, law), segs, dirs)

    def diffusion_derivative(self, t: float, segs: np.ndarray, dirs: np.ndarray, law: np.ndarray) -> np.ndarray | None:
        """(grad_dirs sigma)(t, segs); None for additive noise."""
        if self.additive:
            return None
        if self.diffusion_dir is not None:
            return self.diffusion_dir(t, segs, dirs)
        return fd_directional_derivative(lambda s: self.diffusion(t, s, law), segs, dirs)

    def lions_drift(self, t: float, segs: np.ndarray, law: np.ndarray, tangent: np.ndarray) -> np.ndarray | None:
        """E<D^L b(t, eta, .)(mu)(X), v> for every observer; None for mu-free drifts."""
        if self.drift_lions_pairing is None:
            return None
        return self.drift_lions_pairing(t, segs, law, tangent)

    def lions_diffusion(self, t: float, segs: np.ndarray, law: np.ndarray, tangent: np.ndarray) -> np.ndarray | None:
        if self.mu_free_sigma or self.diffusion_lions_pairing is None:
            return None
        return self.diffusion_lions_pairing(t, segs, law, tangent)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "d": self.d,
            "m": self.m,
            "additive": self.additive,
            "sigma_state_only": self.sigma_state_only,
            "mu_free_sigma": self.mu_free_sigma,
            "hamiltonian_split": list(self.hamiltonian_split) if self.hamiltonian_split else None,
            "metadata": self.metadata,
        }


def _as_batch(value: Segment | np.ndarray) -> tuple[np.ndarray, bool]:
    if isinstance(value, Segment):
        return value.window[None], True
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 2:
        return arr[None], True
    return arr, False


def fd_directional_derivative(
    fn: Callable[[np.ndarray], np.ndarray],
    xi: Segment | np.ndarray,
    eta: Segment | np.ndarray,
    h_fd: float | None = None,
) -> np.ndarray:
    """
    Central difference (fn(xi + h eta) - fn(xi - h eta)) / (2h).

    Args:
        fn: Batch callback on (n, k+1, d) windows
        xi: Base segment(s)
        eta: Direction segment(s)
        h_fd: Fixed step; defaults to fd_relative_step * (1 + ||xi||) per row

    Returns:
        Derivative with fn's per-row shape (leading axis dropped for a single segment)
    """
    base, single = _as_batch(xi)
    direction, _ = _as_batch(eta)
    if h_fd is None:
        h = get_settings().fd_relative_step * (1.0 + segment_norms(base))
    else:
        if h_fd <= 0:
            raise ValueError("h_fd must be > 0")
        h = np.full(base.shape[0], float(h_fd))

    step = h[:, None, None] * direction
    upper = np.asarray(fn(base + step), dtype=float)
    lower = np.asarray(fn(base - step), dtype=float)
    scale = (2.0 * h).reshape((-1,) + (1,) * (upper.ndim - 1))
    result = (upper - lower) / scale
    return result[0] if single else result


def kernel_lions_pairing(kernel: KernelFn, cap: int | None = None) -> PairingFn:
    """
    Generic O(N^2) Lions pairing from a pointwise kernel.

    kernel(t, eta (k+1, d), x (N, k+1, d), v (N, k+1, d)) -> (N, d) returns
    <D^L b(t, eta, .)(mu)(x_j), v_j> for every particle j; the pairing averages
    it over the ensemble for each observer.
    """
    limit = get_settings().lions_generic_cap if cap is None else cap

    def pairing(t: float, segs: np.ndarray, law: np.ndarray, tangent: np.ndarray) -> np.ndarray:
        if law.shape[0] > limit:
            raise TooLarge(f"generic Lions kernel limited to N <= {limit}, got N={law.shape[0]}")
        return np.stack([kernel(t, eta, law, tangent).mean(axis=0) for eta in segs])

    return pairing
