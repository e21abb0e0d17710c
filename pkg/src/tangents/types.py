"""Tangent paths, Cameron-Martin controls and per-step fundamental-matrix factors."""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from src.errors import GridMismatch
from src.pathspace.grid import TimeGrid


class TangentKind(str, Enum):
    MALLIAVIN = "malliavin"
    LIONS = "lions"
    DAMPED = "damped"
    MULT_AUX = "mult_aux"
    ALPHA = "alpha"  # Hamiltonian steering path


@dataclass(frozen=True)
class TangentPaths:
    """Tangent processes aligned index-by-index with a base ensemble."""
    grid: TimeGrid
    values: np.ndarray  # (N, n_total+1, d)
    kind: TangentKind
    lam: float | None = None       # damped
    horizon: float | None = None   # mult_aux

    def __post_init__(self) -> None:
        if self.values.ndim != 3 or self.values.shape[1] != self.grid.n_total + 1:
            raise GridMismatch(f"tangent values of shape {self.values.shape} do not match the grid")
        if self.kind == TangentKind.DAMPED and self.lam is None:
            raise ValueError("damped tangents carry their lambda")
        if self.kind == TangentKind.MULT_AUX and self.horizon is None:
            raise ValueError("multiplicative auxiliary tangents carry their horizon")
        self.values.flags.writeable = False

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def segment(self, step: int) -> np.ndarray:
        return self.values[:, self.grid.window(step)]

    def terminal_segments(self) -> np.ndarray:
        return self.segment(self.grid.n_steps)

    def at_steps(self) -> np.ndarray:
        """Values at the steps of [0, T], (N, n_steps+1, d)."""
        return self.values[:, self.grid.k:]


@dataclass(frozen=True)
class ControlPath:
    """Adapted Cameron-Martin direction: hdot at the left point of every step."""
    grid: TimeGrid
    hdot: np.ndarray  # (N, n_steps, m)

    def __post_init__(self) -> None:
        if self.hdot.ndim != 3 or self.hdot.shape[1] != self.grid.n_steps:
            raise GridMismatch(f"control of shape {self.hdot.shape} does not match {self.grid.n_steps} steps")
        self.hdot.flags.writeable = False

    @property
    def N(self) -> int:
        return self.hdot.shape[0]

    @property
    def m(self) -> int:
        return self.hdot.shape[2]

    @property
    def h(self) -> np.ndarray:
        """Accumulated h(t_n) = sum_{j<n} hdot_j dt, (N, n_steps+1, m)."""
        out = np.zeros((self.N, self.grid.n_steps + 1, self.m))
        np.cumsum(self.hdot * self.grid.dt, axis=1, out=out[:, 1:])
        return out

    def energy(self) -> np.ndarray:
        """Per-particle Cameron-Martin energy int |hdot|^2 dt."""
        return np.sum(self.hdot ** 2, axis=(1, 2)) * self.grid.dt


def constant_control(grid: TimeGrid, N: int, m: int, level: float | np.ndarray = 1.0) -> ControlPath:
    """hdot equal to the same vector at every step and for every particle."""
    value = np.broadcast_to(np.asarray(level, dtype=float), (m,))
    return ControlPath(grid, np.broadcast_to(value, (N, grid.n_steps, m)).copy())


@dataclass(frozen=True)
class FundamentalMatrices:
    """
    Per-step factors of the first-block propagator K_{t,s}.

    factors[:, j]  = I + dt * grad1_b1(t_j, X(t_j))   (N, n_steps, l, l)
    coupling[:, j] = grad2_b1(t_j, X(t_j))            (N, n_steps+1, l, m)
    """
    grid: TimeGrid
    factors: np.ndarray
    coupling: np.ndarray

    def __post_init__(self) -> None:
        self.factors.flags.writeable = False
        self.coupling.flags.writeable = False

    @property
    def N(self) -> int:
        return self.factors.shape[0]

    @property
    def l(self) -> int:
        return self.factors.shape[2]

    def propagator(self, j: int, i: int) -> np.ndarray:
        """K_{t_j, t_i} = P_{j-1} ... P_i for i <= j, (N, l, l)."""
        if not 0 <= i <= j <= self.grid.n_steps:
            raise ValueError(f"need 0 <= i <= j <= {self.grid.n_steps}, got i={i}, j={j}")
        out = np.broadcast_to(np.eye(self.l), (self.N, self.l, self.l)).copy()
        for step in range(i, j):
            out = np.einsum("nab,nbc->nac", self.factors[:, step], out)
        return out

    def terminal_products(self, target: int) -> np.ndarray:
        """K_{t_target, t_j} for j = 0..target, built backwards, (N, target+1, l, l)."""
        out = np.empty((self.N, target + 1, self.l, self.l))
        out[:, target] = np.eye(self.l)
        for j in range(target - 1, -1, -1):
            out[:, j] = np.einsum("nab,nbc->nac", out[:, j + 1], self.factors[:, j])
        return out

    def particle_independent(self) -> bool:
        """True when every particle shares the same factors."""
        return bool(np.all(self.factors == self.factors[:1]) and np.all(self.coupling == self.coupling[:1]))
