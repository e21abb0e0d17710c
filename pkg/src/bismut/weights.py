"""Ito-integral weights D*(h) = int <hdot, dW> on the stored increments."""
import numpy as np

from src.errors import GridMismatch
from src.solver.particles import EnsemblePaths
from src.tangents.types import ControlPath


def ito_weight(control: ControlPath, base: EnsemblePaths) -> np.ndarray:
    """Left-point Ito sums sum_j <hdot(t_j), dW_j>, one per particle."""
    if not control.grid.same_as(base.grid) or control.hdot.shape != base.dW.shape:
        raise GridMismatch(f"control {control.hdot.shape} does not match increments {base.dW.shape}")
    return np.einsum("nsm,nsm->n", control.hdot, base.dW)


def sample_stderr(samples: np.ndarray) -> float:
    """Standard error of the mean: sample std (ddof=1) / sqrt(N)."""
    n = samples.shape[0]
    if n < 2:
        return float("nan")
    return float(np.std(samples, ddof=1) / np.sqrt(n))
