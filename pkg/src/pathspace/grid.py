"""Time grids, discretized paths and their segment (window) slices."""
from dataclasses import dataclass
import logging

import numpy as np

from src.errors import NonCommensurate, OffGrid

logger = logging.getLogger(__name__)

COMMENSURATE_TOL = 1e-9


def _frozen_columns(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [-r0, T] with the memory window [-r0, 0] spanning k steps."""
    dt: float
    r0: float
    T: float
    k: int          # steps in the memory window
    n_total: int    # steps covering [-r0, T]

    @property
    def n_steps(self) -> int:
        """Number of Euler steps on [0, T]."""
        return self.n_total - self.k

    @property
    def cutoff_step(self) -> int:
        """Step index of T - r0."""
        return self.n_steps - self.k

    def times(self) -> np.ndarray:
        """All grid times t_j = -r0 + j*dt, j = 0..n_total."""
        return (np.arange(self.n_total + 1) - self.k) * self.dt

    def step_times(self) -> np.ndarray:
        """Grid times on [0, T]."""
        return np.arange(self.n_steps + 1) * self.dt

    def time_of(self, step: int) -> float:
        return step * self.dt

    def step_of(self, t: float) -> int:
        """
        Map a time in [0, T] to its step index.

        Raises:
            OffGrid: if t is not (within round-off) a grid point of [0, T]
        """
        step = int(round(t / self.dt))
        if abs(step * self.dt - t) > COMMENSURATE_TOL * max(1.0, abs(t)) or not 0 <= step <= self.n_steps:
            raise OffGrid(t)
        return step

    def window(self, step: int) -> slice:
        """Path-index slice of the segment at step (the trailing k+1 values)."""
        return slice(step, step + self.k + 1)

    def same_as(self, other: "TimeGrid") -> bool:
        return (self.k, self.n_total) == (other.k, other.n_total) and abs(self.dt - other.dt) <= 1e-15 * max(1.0, self.dt)

    def to_dict(self) -> dict:
        return {"T": self.T, "dt": self.dt, "r0": self.r0}


def _steps(length: float, dt: float, name: str) -> int:
    ratio = length / dt
    count = int(round(ratio))
    if abs(ratio - count) > COMMENSURATE_TOL:
        raise NonCommensurate(f"{name}={length!r} is not an integer multiple of dt={dt!r}")
    return count


def make_grid(T: float, dt: float, r0: float) -> TimeGrid:
    """
    Build the simulation grid on [-r0, T].

    Args:
        T: Horizon (> 0)
        dt: Time step (> 0)
        r0: Memory length (>= 0)

    Returns:
        TimeGrid with k = r0/dt and n_total = (T + r0)/dt

    Raises:
        NonCommensurate: if r0 or T is not an integer multiple of dt
    """
    if dt <= 0 or T <= 0 or r0 < 0:
        raise NonCommensurate(f"invalid grid parameters T={T!r}, dt={dt!r}, r0={r0!r}")
    k = _steps(r0, dt, "r0")
    n = _steps(T, dt, "T")
    return TimeGrid(dt=float(dt), r0=float(r0), T=float(T), k=k, n_total=k + n)


@dataclass(frozen=True)
class Path:
    """A d-dimensional path stored at the grid points of [-r0, T]."""
    values: np.ndarray  # (n_total + 1, d)

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen_columns(self.values))

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Segment:
    """A window xi(theta), theta in {-r0, ..., 0}."""
    window: np.ndarray  # (k + 1, d)

    def __post_init__(self) -> None:
        object.__setattr__(self, "window", _frozen_columns(self.window))

    @property
    def dim(self) -> int:
        return self.window.shape[1]

    @classmethod
    def constant(cls, value, k: int, dim: int = 1) -> "Segment":
        return cls(np.broadcast_to(np.asarray(value, dtype=float), (k + 1, dim)).copy())


def segment_at(path: Path, t: float, grid: TimeGrid) -> Segment:
    """
    Extract the segment f_t(theta) = f(t + theta) of a path.

    Raises:
        OffGrid: if t is not a grid point of [0, T]
    """
    if path.values.shape[0] != grid.n_total + 1:
        raise OffGrid(t, f"path of length {path.values.shape[0]} does not live on this grid")
    step = grid.step_of(t)
    return Segment(path.values[grid.window(step)].copy())
