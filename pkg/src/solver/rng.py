"""Counter-based per-particle random streams (Philox keyed by seed, purpose and particle)."""
from enum import IntEnum

import numpy as np


class StreamPurpose(IntEnum):
    INITIAL = 1
    INCREMENTS = 2


def particle_generator(seed: int, purpose: StreamPurpose, index: int) -> np.random.Generator:
    """Independent stream for one particle; depends only on (seed, purpose, index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, int(purpose), index])))


def brownian_increments(seed: int, N: int, n_steps: int, m: int, dt: float) -> np.ndarray:
    """
    Brownian increments (N, n_steps, m), each entry N(0, dt).

    Particle i always receives the same increments for a given seed, whatever N is.
    """
    dW = np.empty((N, n_steps, m))
    scale = np.sqrt(dt)
    for i in range(N):
        dW[i] = particle_generator(seed, StreamPurpose.INCREMENTS, i).standard_normal((n_steps, m)) * scale
    return dW


def coarsen_increments(dW: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of `factor` steps: the same Brownian path on a grid with factor * dt."""
    N, n_steps, m = dW.shape
    if factor < 1 or n_steps % factor:
        raise ValueError(f"{n_steps} steps cannot be grouped in blocks of {factor}")
    return dW.reshape(N, n_steps // factor, factor, m).sum(axis=2)
