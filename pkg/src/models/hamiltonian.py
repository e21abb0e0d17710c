"""Distribution-path dependent stochastic Hamiltonian systems (degenerate noise)."""
from dataclasses import dataclass, field
from typing import Callable
import logging

import numpy as np

from src.config import get_settings
from src.errors import SingularSigma
from src.models.coefficients import CoefficientSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HamiltonianParams:
    """
    Block data of dX1 = b1(t, X(t)) dt, dX2 = b2(t, X_t, mu_t) dt + sigma(t) dW.

    Callbacks take the current state x (n, l+m) or segments (n, k+1, l+m):
        b1(t, x) -> (n, l)
        grad1_b1(t, x) -> (n, l, l)     derivative in the first block
        grad2_b1(t, x) -> (n, l, m)     derivative in the second block
        b2(t, segs, law) -> (n, m)
        b2_dir(t, segs, dirs, law) -> (n, m)
        b2_lions_pairing(t, segs, law, tangent) -> (n, m), None if b2 is mu-free
    """
    l: int
    m: int
    B: np.ndarray
    sigma: np.ndarray
    b1: Callable
    grad1_b1: Callable
    grad2_b1: Callable
    b2: Callable
    b2_dir: Callable
    b2_lions_pairing: Callable | None = None
    name: str = "hamiltonian"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        B = np.array(self.B, dtype=float).reshape(self.l, self.m)
        sigma = np.array(self.sigma, dtype=float).reshape(self.m, self.m)
        B.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "sigma", sigma)

        cond = np.linalg.cond(sigma @ sigma.T)
        if not np.isfinite(cond) or cond > get_settings().sigma_condition_limit:
            raise SingularSigma(f"sigma sigma^* has condition number {cond:.3g}")

    @property
    def sigma_inv(self) -> np.ndarray:
        return np.linalg.inv(self.sigma)


def hamiltonian_model(p: HamiltonianParams) -> CoefficientSet:
    """Assemble the (l+m)-dimensional coefficient set with noise in the second block only."""
    l, m = p.l, p.m
    d = l + m
    sigma_full = np.zeros((d, m))
    sigma_full[l:] = p.sigma

    def drift(t, segs, law):
        return np.concatenate([p.b1(t, segs[:, -1]), p.b2(t, segs, law)], axis=1)

    def diffusion(t, segs, law):
        return np.broadcast_to(sigma_full, (segs.shape[0], d, m))

    def drift_dir(t, segs, dirs, law):
        x, z = segs[:, -1], dirs[:, -1]
        first = (np.einsum("nij,nj->ni", p.grad1_b1(t, x), z[:, :l])
                 + np.einsum("nij,nj->ni", p.grad2_b1(t, x), z[:, l:]))
        return np.concatenate([first, p.b2_dir(t, segs, dirs, law)], axis=1)

    def diffusion_dir(t, segs, dirs):
        return np.zeros((segs.shape[0], d, m))

    pairing = None
    if p.b2_lions_pairing is not None:
        def pairing(t, segs, law, tangent):
            second = p.b2_lions_pairing(t, segs, law, tangent)
            return np.concatenate([np.zeros((segs.shape[0], l)), second], axis=1)

    return CoefficientSet(
        name=p.name,
        d=d,
        m=m,
        drift=drift,
        diffusion=diffusion,
        drift_dir=drift_dir,
        diffusion_dir=diffusion_dir,
        drift_lions_pairing=pairing,
        additive=True,
        sigma_state_only=True,
        mu_free_sigma=True,
        hamiltonian_split=(l, m),
        hamiltonian=p,
        metadata=dict(p.metadata),
    )


def hamiltonian_linear(
    dim: int = 1,
    kappa: float = 1.0,
    gamma: float = 0.5,
    delay: float = 0.0,
    c: float = 0.0,
    sigma: float = 1.0,
) -> HamiltonianParams:
    """
    Kinetic system with l = m = dim:
        b1(x) = x2
        b2(xi, mu) = -kappa xi1(0) - gamma xi2(0) + delay xi2(-r0) + c * mean eta1(0)
    """
    eye = np.eye(dim)

    def b1(t, x):
        return x[:, dim:]

    def grad1_b1(t, x):
        return np.zeros((x.shape[0], dim, dim))

    def grad2_b1(t, x):
        return np.broadcast_to(eye, (x.shape[0], dim, dim))

    def b2(t, segs, law):
        now, past = segs[:, -1], segs[:, 0]
        return -kappa * now[:, :dim] - gamma * now[:, dim:] + delay * past[:, dim:] + c * law[:, -1, :dim].mean(axis=0)

    def b2_dir(t, segs, dirs, law):
        now, past = dirs[:, -1], dirs[:, 0]
        return -kappa * now[:, :dim] - gamma * now[:, dim:] + delay * past[:, dim:]

    def b2_lions_pairing(t, segs, law, tangent):
        return np.broadcast_to(c * tangent[:, -1, :dim].mean(axis=0), (segs.shape[0], dim)).copy()

    return HamiltonianParams(
        l=dim,
        m=dim,
        B=eye,
        sigma=sigma * eye,
        b1=b1,
        grad1_b1=grad1_b1,
        grad2_b1=grad2_b1,
        b2=b2,
        b2_dir=b2_dir,
        b2_lions_pairing=b2_lions_pairing if c != 0.0 else None,
        name="hamiltonian_linear",
        metadata={"params": {"dim": dim, "kappa": kappa, "gamma": gamma, "delay": delay, "c": c, "sigma": sigma}},
    )
