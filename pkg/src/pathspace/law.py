"""Empirical law flows: the N-particle segment clouds standing in for mu_t."""
from dataclasses import dataclass
import logging

import numpy as np

from src.errors import GridMismatch, OffGrid
from src.pathspace.grid import TimeGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LawFlow:
    """
    Empirical law mu_t of the segment process at the retained grid steps.

    With stride 1 the flow keeps the full particle paths (N, n_total+1, d) and
    hands out windows as views. With a larger stride only the retained windows
    are stored, as an (S, N, k+1, d) stack.
    """
    grid: TimeGrid
    stride: int
    steps: tuple[int, ...]
    paths: np.ndarray | None = None
    windows: np.ndarray | None = None

    @property
    def N(self) -> int:
        data = self.paths if self.paths is not None else self.windows[0]
        return data.shape[0]

    @property
    def dim(self) -> int:
        data = self.paths if self.paths is not None else self.windows
        return data.shape[-1]

    @property
    def dense(self) -> bool:
        return self.stride == 1

    def slice(self, step: int) -> np.ndarray:
        """Segments (N, k+1, d) of mu at the given step."""
        if self.paths is not None:
            if not 0 <= step <= self.grid.n_steps:
                raise OffGrid(self.grid.time_of(step))
            return self.paths[:, self.grid.window(step)]
        if step % self.stride != 0 or step // self.stride >= len(self.steps):
            raise OffGrid(self.grid.time_of(step), f"step {step} is not retained (stride={self.stride})")
        return self.windows[step // self.stride]

    def at(self, t: float) -> np.ndarray:
        return self.slice(self.grid.step_of(t))

    def require_dense(self) -> None:
        """Solvers need mu_t at every step."""
        if not self.dense:
            raise GridMismatch(f"law flow thinned with stride={self.stride}; solvers need every grid step")


def law_from_paths(grid: TimeGrid, paths: np.ndarray, stride: int = 1) -> LawFlow:
    """
    Wrap an ensemble of paths as a law flow.

    Args:
        grid: Grid the paths live on
        paths: (N, n_total+1, d) particle paths
        stride: Keep every stride-th step of [0, T] (1 keeps all)

    Returns:
        LawFlow over the retained steps
    """
    if paths.ndim != 3 or paths.shape[1] != grid.n_total + 1:
        raise GridMismatch(f"paths of shape {paths.shape} do not live on a grid with n_total={grid.n_total}")
    if stride < 1:
        raise ValueError("stride must be >= 1")

    steps = tuple(range(0, grid.n_steps + 1, stride))
    if stride == 1:
        frozen = paths.view()
        frozen.flags.writeable = False
        return LawFlow(grid=grid, stride=1, steps=steps, paths=frozen)

    windows = np.stack([paths[:, grid.window(step)] for step in steps])
    windows.flags.writeable = False
    logger.debug(f"Thinned law flow to {len(steps)} of {grid.n_steps + 1} steps")
    return LawFlow(grid=grid, stride=stride, steps=steps, windows=windows)
