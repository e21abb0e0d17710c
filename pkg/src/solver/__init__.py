"""Forward solvers for the mean-field delay SDE."""
from src.solver.particles import (
    SAMPLERS,
    EnsemblePaths,
    InitialSampler,
    ShiftedSampler,
    constant_sampler,
    gaussian_constant_sampler,
    moment_sup,
    simulate_decoupled,
    simulate_particles,
)
from src.solver.picard import PicardDiagnostics, picard_law_fixedpoint

__all__ = [
    "SAMPLERS",
    "EnsemblePaths",
    "InitialSampler",
    "ShiftedSampler",
    "constant_sampler",
    "gaussian_constant_sampler",
    "moment_sup",
    "simulate_decoupled",
    "simulate_particles",
    "PicardDiagnostics",
    "picard_law_fixedpoint",
]
