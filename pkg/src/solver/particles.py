"""
Forward solvers: the interacting particle system and the decoupled equation
under a frozen law flow. Both share one explicit Euler-Maruyama core with
left-endpoint segment evaluation, so feeding the particle system's own flow
back into the decoupled solver reproduces it bit for bit.
"""
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable
import logging

import numpy as np

from src.errors import GridMismatch, NonFinite, SizeMismatch
from src.models.coefficients import CoefficientSet
from src.pathspace.grid import Path, Segment, TimeGrid
from src.pathspace.law import LawFlow, law_from_paths
from src.pathspace.metrics import segment_norms
from src.solver.parallel import BlockExecutor
from src.solver.rng import StreamPurpose, brownian_increments, particle_generator

if TYPE_CHECKING:
    from src.tangents.types import ControlPath

logger = logging.getLogger(__name__)


# ============================================================================
# ENSEMBLES AND INITIAL LAWS
# ============================================================================

@dataclass(frozen=True)
class EnsemblePaths:
    """N particle paths on [-r0, T] with the Brownian increments that drove them."""
    grid: TimeGrid
    paths: np.ndarray  # (N, n_total+1, d)
    dW: np.ndarray     # (N, n_steps, m)
    seed: int

    def __post_init__(self) -> None:
        if self.paths.shape[1] != self.grid.n_total + 1 or self.dW.shape[1] != self.grid.n_steps:
            raise GridMismatch("paths or increments do not match the grid")
        if self.paths.shape[0] != self.dW.shape[0]:
            raise SizeMismatch("paths and increments have different particle counts")
        self.paths.flags.writeable = False
        self.dW.flags.writeable = False

    @property
    def N(self) -> int:
        return self.paths.shape[0]

    @property
    def dim(self) -> int:
        return self.paths.shape[2]

    @property
    def m(self) -> int:
        return self.dW.shape[2]

    def segment(self, step: int) -> np.ndarray:
        """All particle segments (N, k+1, d) at a step of [0, T]."""
        return self.paths[:, self.grid.window(step)]

    def terminal_segments(self) -> np.ndarray:
        return self.segment(self.grid.n_steps)

    def path(self, i: int) -> Path:
        return Path(self.paths[i])

    def law(self, stride: int = 1) -> LawFlow:
        return law_from_paths(self.grid, self.paths, stride)


@dataclass(frozen=True)
class InitialSampler:
    """Draws initial windows; particle i only ever sees its own stream."""
    sample: Callable[[int, np.random.Generator], np.ndarray]  # (index, rng) -> (k+1, d)
    descriptor: str
    dim: int = 1

    def draw(self, N: int, k: int, seed: int) -> np.ndarray:
        windows = np.empty((N, k + 1, self.dim))
        for i in range(N):
            window = np.asarray(self.sample(i, particle_generator(seed, StreamPurpose.INITIAL, i)), dtype=float)
            windows[i] = np.broadcast_to(window.reshape(-1, self.dim), (k + 1, self.dim))
        return windows


@dataclass(frozen=True)
class ShiftedSampler:
    """X_0 + epsilon * phi(X_0) on the same initial streams (common random numbers)."""
    base: InitialSampler
    direction: Callable[[np.ndarray], np.ndarray]
    epsilon: float

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def descriptor(self) -> str:
        return f"{self.base.descriptor}+{self.epsilon!r}*phi"

    def draw(self, N: int, k: int, seed: int) -> np.ndarray:
        windows = self.base.draw(N, k, seed)
        return windows + self.epsilon * self.direction(windows)


def constant_sampler(value: float | list[float], dim: int = 1) -> InitialSampler:
    """Every particle starts from the constant segment `value`."""
    point = np.broadcast_to(np.asarray(value, dtype=float), (dim,)).copy()
    return InitialSampler(lambda i, rng: point[None, :], f"constant({point.tolist()})", dim)


def gaussian_constant_sampler(mean: float | list[float] = 0.0, std: float | list[float] = 1.0, dim: int = 1) -> InitialSampler:
    """Constant segments at a N(mean, std^2) level drawn per particle."""
    loc = np.broadcast_to(np.asarray(mean, dtype=float), (dim,)).copy()
    scale = np.broadcast_to(np.asarray(std, dtype=float), (dim,)).copy()
    return InitialSampler(
        lambda i, rng: (loc + scale * rng.standard_normal(dim))[None, :],
        f"gaussian_constant(mean={loc.tolist()}, std={scale.tolist()})",
        dim,
    )


SAMPLERS = {
    "constant": constant_sampler,
    "gaussian_constant": gaussian_constant_sampler,
}


# ============================================================================
# EULER CORE
# ============================================================================

def _euler(
    coeffs: CoefficientSet,
    grid: TimeGrid,
    init_windows: np.ndarray,
    dW: np.ndarray,
    law_at: Callable[[int, np.ndarray], np.ndarray],
    threads: int | None,
    forcing: Callable[[int, slice, np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    N = init_windows.shape[0]
    k, dt = grid.k, grid.dt
    paths = np.empty((N, grid.n_total + 1, coeffs.d))
    paths[:, :k + 1] = init_windows

    with BlockExecutor(threads) as executor:
        for n in range(grid.n_steps):
            t = n * dt
            segs = paths[:, n:n + k + 1]
            law = law_at(n, segs)

            def step(rows: slice) -> np.ndarray:
                block = segs[rows]
                incr = coeffs.drift(t, block, law) * dt + np.einsum(
                    "ndm,nm->nd", coeffs.diffusion(t, block, law), dW[rows, n]
                )
                if forcing is not None:
                    incr = incr + forcing(n, rows, block)
                return block[:, -1] + incr

            new = executor.map_rows(step, N)
            if not np.all(np.isfinite(new)):
                raise NonFinite(n + 1, t + dt)
            paths[:, n + k + 1] = new
    return paths


def _check_initials(init_windows: np.ndarray, grid: TimeGrid, d: int) -> np.ndarray:
    arr = np.asarray(init_windows, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.shape[1:] != (grid.k + 1, d):
        raise SizeMismatch(f"initial windows of shape {arr.shape} do not fit k={grid.k}, d={d}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(0, 0.0, "initial segment")
    return arr


# ============================================================================
# SOLVERS
# ============================================================================

def simulate_particles(
    coeffs: CoefficientSet,
    init: InitialSampler | ShiftedSampler,
    grid: TimeGrid,
    N: int,
    seed: int,
    threads: int | None = None,
    dW: np.ndarray | None = None,
) -> EnsemblePaths:
    """
    Interacting particle Euler-Maruyama scheme for the mean-field delay SDE.

    The empirical law at each step is the cloud of all N current segments
    (self included). Deterministic in (seed, N, grid, model).

    Args:
        dW: Explicit increments (N, n_steps, m), e.g. a finer Brownian path coarsened
            with coarsen_increments; the seed then only drives the initial segments

    Raises:
        NonFinite: a state became NaN/Inf
        GridMismatch: dW does not match N, the grid and the noise dimension
    """
    if N < 2:
        raise SizeMismatch("the particle system needs N >= 2")
    windows = _check_initials(init.draw(N, grid.k, seed), grid, coeffs.d)
    if dW is None:
        dW = brownian_increments(seed, N, grid.n_steps, coeffs.m, grid.dt)
    elif dW.shape != (N, grid.n_steps, coeffs.m):
        raise GridMismatch(f"increments of shape {dW.shape} do not match N={N}, steps={grid.n_steps}")
    else:
        dW = np.array(dW, dtype=float)

    logger.info(f"Simulating {N} particles of {coeffs.name} over {grid.n_steps} steps (seed={seed})")
    paths = _euler(coeffs, grid, windows, dW, lambda n, segs: segs, threads)
    return EnsemblePaths(grid=grid, paths=paths, dW=dW, seed=seed)


def simulate_decoupled(
    coeffs: CoefficientSet,
    law: LawFlow,
    init_paths: np.ndarray | list[Segment],
    grid: TimeGrid,
    seed: int,
    threads: int | None = None,
    dW: np.ndarray | None = None,
    control: "ControlPath | None" = None,
    epsilon: float = 0.0,
) -> EnsemblePaths:
    """
    Euler solution of the decoupled equation dY = b(t, Y_t, mu_t)dt + sigma(t, Y_t, mu_t)dW
    with mu read from a frozen law flow.

    Args:
        coeffs: Model
        law: Frozen flow covering every step of [0, T]
        init_paths: (N, k+1, d) initial windows or a list of Segments
        grid: Simulation grid (must match the flow's)
        seed: Master seed for the increments (ignored when dW is given)
        threads: Worker threads
        dW: Explicit increments (N, n_steps, m) to reuse
        control: Optional Cameron-Martin direction; adds epsilon * sigma * hdot * dt per step
        epsilon: Size of the Cameron-Martin shift

    Raises:
        GridMismatch: the flow lives on another grid or is thinned
        NonFinite: a state became NaN/Inf
    """
    if not law.grid.same_as(grid):
        raise GridMismatch("law flow and simulation grid differ")
    law.require_dense()

    if isinstance(init_paths, list):
        init_paths = np.stack([s.window for s in init_paths])
    windows = _check_initials(init_paths, grid, coeffs.d)
    N = windows.shape[0]
    if dW is None:
        dW = brownian_increments(seed, N, grid.n_steps, coeffs.m, grid.dt)
    elif dW.shape != (N, grid.n_steps, coeffs.m):
        raise GridMismatch(f"increments of shape {dW.shape} do not match N={N}, steps={grid.n_steps}")

    forcing = None
    if control is not None and epsilon != 0.0:
        if control.hdot.shape != (N, grid.n_steps, coeffs.m):
            raise GridMismatch("control does not match the ensemble")
        hdot, dt = control.hdot, grid.dt

        def forcing(n: int, rows: slice, block: np.ndarray) -> np.ndarray:
            sigma = coeffs.diffusion(n * dt, block, law.slice(n))
            return epsilon * np.einsum("ndm,nm->nd", sigma, hdot[rows, n]) * dt

    paths = _euler(coeffs, grid, windows, dW, lambda n, segs: law.slice(n), threads, forcing)
    return EnsemblePaths(grid=grid, paths=paths, dW=np.array(dW, dtype=float), seed=seed)


def moment_sup(paths: EnsemblePaths | np.ndarray, p: float = 2.0) -> float:
    """(1/N) sum_i sup_{t in [0,T]} ||X_{i,t}||^p."""
    if p < 1:
        raise ValueError("p must be >= 1")
    values = paths.paths if isinstance(paths, EnsemblePaths) else np.asarray(paths, dtype=float)
    sup = segment_norms(values)  # a path's sup over all segments is its sup over [-r0, T]
    return float(np.mean(sup ** p))
