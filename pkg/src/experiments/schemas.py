"""Experiment configuration schemas with Pydantic validation."""
from pathlib import Path
from typing import Any, Optional
import hashlib
import json
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.bismut.estimators import Flavor, check_flavor
from src.bismut.functionals import DIRECTIONS, FUNCTIONALS, build_direction, build_functional
from src.errors import ConfigInvalid, MkvBismutError
from src.models.registry import MODELS, build_model
from src.pathspace.grid import TimeGrid, make_grid
from src.solver.particles import SAMPLERS

logger = logging.getLogger(__name__)


class NamedSpec(BaseModel):
    """A registry entry: name plus keyword parameters."""
    model_config = ConfigDict(extra="forbid")
    name: str
    params: dict[str, Any] = Field(default_factory=dict)


class GridSpec(BaseModel):
    """Simulation grid on [-r0, T]."""
    model_config = ConfigDict(extra="forbid")
    T: float = Field(gt=0)
    dt: float = Field(gt=0)
    r0: float = Field(ge=0)


class OracleSpec(BaseModel):
    """Which independent oracles accompany an estimate."""
    model_config = ConfigDict(extra="forbid")
    fd: bool = False
    delay_ode: bool = False


class VerifySpec(BaseModel):
    """Options of the verify verbs."""
    model_config = ConfigDict(extra="forbid")
    ibp_level: float = 1.0
    chain_rule_epsilon: float = Field(default=1e-4, gt=0)
    chain_rule_outer: str = "square"
    decay_lams: list[float] = Field(default_factory=lambda: [5.0, 20.0])
    decay_window: tuple[float, float] = (0.2, 1.0)
    picard_lam: float = Field(default=20.0, ge=0)
    picard_tol: float = Field(default=1e-6, gt=0)
    picard_max_iter: int = Field(default=10, ge=1)
    picard_p: float = Field(default=1.0, ge=1)
    picard_metric_stride: int = Field(default=1, ge=1)

    @field_validator("chain_rule_outer")
    @classmethod
    def known_outer(cls, value: str) -> str:
        if value not in ("identity", "square"):
            raise ValueError("chain_rule_outer must be 'identity' or 'square'")
        return value


class ExperimentConfig(BaseModel):
    """One reproducible experiment."""
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    model: NamedSpec
    grid: GridSpec
    N: int = Field(ge=2)
    seed: int = Field(ge=0, lt=2**64)
    flavor: Flavor = Flavor.ADDITIVE_EXACT
    functional: NamedSpec = Field(default_factory=lambda: NamedSpec(name="coordinate"))
    direction: NamedSpec = Field(default_factory=lambda: NamedSpec(name="constant_shift", params={"value": 1.0}))
    initial: NamedSpec = Field(default_factory=lambda: NamedSpec(name="constant", params={"value": 0.0}))
    lam: float = Field(default=5.0, ge=0)
    include_remainder: bool = True
    fd_epsilon: float = Field(default=1e-3, gt=0)
    oracles: OracleSpec = Field(default_factory=OracleSpec)
    verify: VerifySpec = Field(default_factory=VerifySpec)
    sweep: Optional[str] = None
    output_dir: Optional[str] = None

    @field_validator("model")
    @classmethod
    def known_model(cls, value: NamedSpec) -> NamedSpec:
        if value.name not in MODELS:
            raise ValueError(f"unknown model {value.name!r}")
        return value

    @field_validator("functional")
    @classmethod
    def known_functional(cls, value: NamedSpec) -> NamedSpec:
        if value.name not in FUNCTIONALS:
            raise ValueError(f"unknown functional {value.name!r}")
        return value

    @field_validator("direction")
    @classmethod
    def known_direction(cls, value: NamedSpec) -> NamedSpec:
        if value.name not in DIRECTIONS:
            raise ValueError(f"unknown direction {value.name!r}")
        return value

    @field_validator("initial")
    @classmethod
    def known_initial(cls, value: NamedSpec) -> NamedSpec:
        if value.name not in SAMPLERS:
            raise ValueError(f"unknown initial sampler {value.name!r}")
        return value

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        """sha256 of the canonical JSON form."""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def _check_dimensions(config: ExperimentConfig, grid: TimeGrid, d: int) -> None:
    """Evaluate functional and direction on one zero window of the model's dimension."""
    window = np.zeros((1, grid.k + 1, d))

    functional = build_functional(config.functional.name, config.functional.params)
    try:
        value = np.asarray(functional(window))
    except (IndexError, ValueError) as e:
        raise ConfigInvalid("functional.params", f"does not fit d={d}: {e}") from e
    if value.shape != (1,):
        raise ConfigInvalid("functional.params", f"returns shape {value.shape} on d={d} segments, expected (1,)")

    direction = build_direction(config.direction.name, config.direction.params)
    try:
        shifted = direction(window)
    except (IndexError, ValueError) as e:
        raise ConfigInvalid("direction.params", f"does not fit d={d}: {e}") from e
    if shifted.shape != window.shape:
        raise ConfigInvalid("direction.params", f"maps d={d} segments to shape {shifted.shape}")


def validate_config(data: dict[str, Any]) -> ExperimentConfig:
    """
    Validate a raw config and check the cross-field rules (commensurate grid, model flags,
    functional and direction dimensions).

    Raises:
        ConfigInvalid: with the dotted path of the offending field
    """
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise ConfigInvalid(field, first["msg"]) from e

    try:
        grid = make_grid(config.grid.T, config.grid.dt, config.grid.r0)
    except MkvBismutError as e:
        raise ConfigInvalid("grid", str(e)) from e

    coeffs = build_model(config.model.name, config.model.params)
    try:
        check_flavor(coeffs, config.flavor)
    except MkvBismutError as e:
        raise ConfigInvalid("flavor", str(e)) from e
    _check_dimensions(config, grid, coeffs.d)
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON experiment file."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigInvalid("", f"cannot read {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigInvalid("", f"{path} must contain a JSON object")
    return validate_config(data)
