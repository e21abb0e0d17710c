"""Built-in models selectable by name from experiment configs."""
from typing import Any, Callable
import logging

from src.errors import ConfigInvalid
from src.models.coefficients import CoefficientSet
from src.models.hamiltonian import hamiltonian_linear, hamiltonian_model
from src.models.linear_delay import LinearDelayParams, linear_meanfield_delay_model

logger = logging.getLogger(__name__)

ModelBuilder = Callable[[dict[str, Any]], CoefficientSet]

MODELS: dict[str, ModelBuilder] = {
    "linear_delay": lambda params: linear_meanfield_delay_model(LinearDelayParams(**params)),
    "hamiltonian_linear": lambda params: hamiltonian_model(hamiltonian_linear(**params)),
}


def build_model(name: str, params: dict[str, Any] | None = None) -> CoefficientSet:
    """
    Instantiate a registered model.

    Raises:
        ConfigInvalid: unknown name or parameters the builder rejects
    """
    if name not in MODELS:
        raise ConfigInvalid("model.name", f"unknown model {name!r} (known: {sorted(MODELS)})")
    try:
        return MODELS[name](dict(params or {}))
    except (TypeError, ValueError) as e:
        raise ConfigInvalid("model.params", str(e)) from e
