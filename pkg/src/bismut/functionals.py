"""Test functionals f on segments and transport directions phi, with their registries."""
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable
import logging

import numpy as np

from src.errors import ConfigInvalid
from src.models.coefficients import fd_directional_derivative

logger = logging.getLogger(__name__)


class Smoothness(str, Enum):
    BOUNDED_C1 = "bounded_C1"
    POLYNOMIAL_C1 = "polynomial_C1"


@dataclass(frozen=True)
class TestFunctional:
    """f: segments (n, k+1, d) -> (n,), with an optional directional gradient."""
    __test__ = False

    name: str
    eval: Callable[[np.ndarray], np.ndarray]
    grad_dir: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    smoothness: Smoothness = Smoothness.POLYNOMIAL_C1

    def __call__(self, windows: np.ndarray) -> np.ndarray:
        return self.eval(windows)

    def derivative(self, windows: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """(grad_dirs f)(windows); central differences when no gradient is supplied."""
        if self.grad_dir is not None:
            return self.grad_dir(windows, dirs)
        return fd_directional_derivative(self.eval, windows, dirs)


@dataclass(frozen=True)
class Direction:
    """Transport direction phi acting on initial segments, (n, k+1, d) -> (n, k+1, d)."""
    name: str
    apply: Callable[[np.ndarray], np.ndarray]

    def __call__(self, windows: np.ndarray) -> np.ndarray:
        return np.asarray(self.apply(windows), dtype=float)

    def scaled(self, factor: float) -> "Direction":
        return Direction(f"{factor!r}*{self.name}", lambda w: factor * self.apply(w))


# ============================================================================
# FUNCTIONALS
# ============================================================================

def _index(index: int) -> int:
    if int(index) != index or index < 0:
        raise ValueError(f"coordinate index must be a non-negative integer, got {index!r}")
    return int(index)


def coordinate(index: int = 0) -> TestFunctional:
    """f(xi) = xi(0)[index]."""
    index = _index(index)

    def grad(w, z):
        return z[:, -1, index]

    return TestFunctional(f"coordinate[{index}]", lambda w: w[:, -1, index], grad, Smoothness.POLYNOMIAL_C1)


def tanh_coordinate(index: int = 0) -> TestFunctional:
    """f(xi) = tanh(xi(0)[index]), bounded."""
    index = _index(index)

    def grad(w, z):
        return (1.0 - np.tanh(w[:, -1, index]) ** 2) * z[:, -1, index]

    return TestFunctional(f"tanh[{index}]", lambda w: np.tanh(w[:, -1, index]), grad, Smoothness.BOUNDED_C1)


def window_average(index: int = 0) -> TestFunctional:
    """f(xi) = mean of xi[index] over the window [-r0, 0]."""
    index = _index(index)
    return TestFunctional(
        f"window_average[{index}]",
        lambda w: w[:, :, index].mean(axis=1),
        lambda w, z: z[:, :, index].mean(axis=1),
        Smoothness.POLYNOMIAL_C1,
    )


FUNCTIONALS: dict[str, Callable[..., TestFunctional]] = {
    "coordinate": coordinate,
    "tanh": tanh_coordinate,
    "window_average": window_average,
}


# ============================================================================
# DIRECTIONS
# ============================================================================

def constant_shift(value: float | list[float] = 1.0) -> Direction:
    """phi(xi) = value on the whole window."""
    shift = np.asarray(value, dtype=float)
    return Direction(f"constant_shift({shift.tolist()})", lambda w: np.broadcast_to(shift, w.shape).copy())


def coordinate_scaled(scale: float | list[float] = 1.0) -> Direction:
    """phi(xi) = scale * xi, coordinate by coordinate."""
    factor = np.asarray(scale, dtype=float)
    return Direction(f"coordinate_scaled({factor.tolist()})", lambda w: w * factor)


def affine(matrix: list[list[float]] | float = 1.0, offset: list[float] | float = 0.0) -> Direction:
    """phi(xi)(theta) = A xi(theta) + b."""
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    b = np.asarray(offset, dtype=float)

    def apply(w):
        return np.einsum("ij,nkj->nki", A, w) + b

    return Direction(f"affine(A={A.tolist()}, b={b.tolist()})", apply)


DIRECTIONS: dict[str, Callable[..., Direction]] = {
    "constant_shift": constant_shift,
    "coordinate_scaled": coordinate_scaled,
    "affine": affine,
}


def _lookup(registry: dict, kind: str, name: str, params: dict[str, Any] | None):
    if name not in registry:
        raise ConfigInvalid(f"{kind}.name", f"unknown {kind} {name!r} (known: {sorted(registry)})")
    try:
        return registry[name](**(params or {}))
    except (TypeError, ValueError) as e:
        raise ConfigInvalid(f"{kind}.params", str(e)) from e


def build_functional(name: str, params: dict[str, Any] | None = None) -> TestFunctional:
    return _lookup(FUNCTIONALS, "functional", name, params)


def build_direction(name: str, params: dict[str, Any] | None = None) -> Direction:
    return _lookup(DIRECTIONS, "direction", name, params)
