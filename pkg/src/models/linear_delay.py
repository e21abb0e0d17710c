"""
Scalar linear mean-field delay model:

    b(t, xi, mu) = -a xi(0) + b1 xi(-r0) + c * int eta(0) mu(d eta)
    sigma(t, xi) = sigma0 + sigma_tanh * tanh(xi(0))
"""
from dataclasses import asdict, dataclass
import math

import numpy as np

from src.models.coefficients import CoefficientSet


@dataclass(frozen=True)
class LinearDelayParams:
    """Parameters of the scalar linear delay family (d = m = 1)."""
    a: float = 1.0
    b1: float = 0.0
    c: float = 0.0
    sigma0: float = 1.0
    sigma_tanh: float = 0.0  # nonzero makes the noise multiplicative

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")


def linear_meanfield_delay_model(p: LinearDelayParams) -> CoefficientSet:
    """Build the analytic coefficient set of the linear delay family."""

    def drift(t, segs, law):
        return -p.a * segs[:, -1] + p.b1 * segs[:, 0] + p.c * law[:, -1].mean(axis=0)

    def diffusion(t, segs, law):
        return (p.sigma0 + p.sigma_tanh * np.tanh(segs[:, -1]))[:, :, None]

    def drift_dir(t, segs, dirs, law):
        return -p.a * dirs[:, -1] + p.b1 * dirs[:, 0]

    def diffusion_dir(t, segs, dirs):
        slope = p.sigma_tanh * (1.0 - np.tanh(segs[:, -1]) ** 2)
        return (slope * dirs[:, -1])[:, :, None]

    def drift_lions_pairing(t, segs, law, tangent):
        return np.broadcast_to(p.c * tangent[:, -1].mean(axis=0), (segs.shape[0], 1)).copy()

    return CoefficientSet(
        name="linear_delay",
        d=1,
        m=1,
        drift=drift,
        diffusion=diffusion,
        drift_dir=drift_dir,
        diffusion_dir=diffusion_dir,
        drift_lions_pairing=drift_lions_pairing if p.c != 0.0 else None,
        additive=p.sigma_tanh == 0.0,
        sigma_state_only=True,
        mu_free_sigma=True,
        metadata={"params": asdict(p)},
    )
