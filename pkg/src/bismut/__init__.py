"""Bismut controls, Ito weights, derivative estimators and their oracles."""
from src.bismut.controls import (
    build_additive_control,
    build_asymptotic_control,
    build_hamiltonian_control,
    build_multiplicative_control,
    hamiltonian_gram,
)
from src.bismut.estimators import BismutEstimate, FdEstimate, Flavor, RunSetup, estimate_bismut, estimate_fd
from src.bismut.functionals import (
    DIRECTIONS,
    FUNCTIONALS,
    Direction,
    Smoothness,
    TestFunctional,
    build_direction,
    build_functional,
)
from src.bismut.oracles import delay_ode_euler, deterministic_tangent_oracle
from src.bismut.verification import damped_decay_slope, verify_chain_rule, verify_ibp
from src.bismut.weights import ito_weight

__all__ = [
    "build_additive_control",
    "build_asymptotic_control",
    "build_hamiltonian_control",
    "build_multiplicative_control",
    "hamiltonian_gram",
    "BismutEstimate",
    "FdEstimate",
    "Flavor",
    "RunSetup",
    "estimate_bismut",
    "estimate_fd",
    "DIRECTIONS",
    "FUNCTIONALS",
    "Direction",
    "Smoothness",
    "TestFunctional",
    "build_direction",
    "build_functional",
    "delay_ode_euler",
    "deterministic_tangent_oracle",
    "damped_decay_slope",
    "verify_chain_rule",
    "verify_ibp",
    "ito_weight",
]
