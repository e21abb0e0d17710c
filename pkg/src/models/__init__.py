"""Coefficient definitions and the built-in model families."""
from src.models.coefficients import CoefficientSet, fd_directional_derivative, kernel_lions_pairing
from src.models.hamiltonian import HamiltonianParams, hamiltonian_linear, hamiltonian_model
from src.models.linear_delay import LinearDelayParams, linear_meanfield_delay_model
from src.models.registry import MODELS, build_model

__all__ = [
    "CoefficientSet",
    "fd_directional_derivative",
    "kernel_lions_pairing",
    "HamiltonianParams",
    "hamiltonian_linear",
    "hamiltonian_model",
    "LinearDelayParams",
    "linear_meanfield_delay_model",
    "MODELS",
    "build_model",
]
