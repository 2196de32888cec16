"""Experiment configuration file schema and loader.

A config is a YAML document::

    experiment: window-sweep
    seed: 7
    output_path: output/sweep/window_sweep.csv   # optional
    format: csv                                  # optional
    params:                                      # experiment-specific block
      n_pairs: 1000000
      windows: [.inf, 1.0e-8, 1.0e-9]

Precedence: model defaults < config file < CLI flags. Unknown keys are
rejected at every level.
"""

import math
import os
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.errors import ConfigParseError, ConfigValidationError

ExperimentName = Literal["epr-demo", "postulate-compare", "chsh", "window-sweep", "condprob"]
ReportFormat = Literal["json", "csv"]

# A complex number as a real scalar or a [re, im] pair
ComplexValue = Union[float, Tuple[float, float]]


def to_complex(value: ComplexValue) -> complex:
    if isinstance(value, (tuple, list)):
        return complex(value[0], value[1])
    return complex(value)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MatrixFixture(StrictModel):
    """Operator or state in the {"dim", "re", "im"} schema; vectors are flat lists."""

    dim: int = Field(ge=1)
    re: List[Any]
    im: Optional[List[Any]] = None


# A fixture is either inline or a path to a JSON file holding one
FixtureRef = Union[MatrixFixture, str]


class EprDemoParams(StrictModel):
    dim1: int = Field(default=2, ge=2)
    dim2: int = Field(default=2, ge=2)
    c1: ComplexValue = 1 / math.sqrt(2)
    c2: ComplexValue = 1 / math.sqrt(2)
    i: int = Field(default=0, ge=0)
    j: int = Field(default=1, ge=0)
    a1_direction: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    a2_direction: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    a1: Optional[FixtureRef] = None
    a2: Optional[FixtureRef] = None
    outcome_index: Optional[int] = Field(default=None, ge=0)
    refinement_outcome: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check_state(self):
        weight = abs(to_complex(self.c1)) ** 2 + abs(to_complex(self.c2)) ** 2
        if abs(weight - 1.0) > 1e-10:
            raise ValueError(f"|c1|^2 + |c2|^2 must equal 1, got {weight:.12f}")
        if self.i == self.j:
            raise ValueError("i and j must differ")
        limit = min(self.dim1, self.dim2)
        if max(self.i, self.j) >= limit:
            raise ValueError(f"i and j must be below min(dim1, dim2) = {limit}")
        for name in ("a1_direction", "a2_direction"):
            norm = math.sqrt(sum(x * x for x in getattr(self, name)))
            if abs(norm - 1.0) > 1e-10:
                raise ValueError(f"{name} must be a unit vector, got norm {norm:.12f}")
        if self.dim1 != 2 and self.a1 is None:
            raise ValueError("a1 must be given as a fixture when dim1 != 2")
        if self.dim2 != 2 and self.a2 is None:
            raise ValueError("a2 must be given as a fixture when dim2 != 2")
        return self


class PostulateCompareParams(StrictModel):
    operator: Optional[FixtureRef] = None
    state: Optional[FixtureRef] = None
    rotation_deg: float = 45.0

    @field_validator("rotation_deg")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("rotation_deg must be finite")
        return value


class ChshParams(StrictModel):
    a: float = 0.0
    a_prime: float = math.pi / 2
    b: float = math.pi / 4
    b_prime: float = 3 * math.pi / 4
    n_samples: int = Field(default=100_000, ge=1)
    grid: Optional[int] = Field(default=None, ge=1)
    state: Optional[FixtureRef] = None

    @model_validator(mode="after")
    def _finite_angles(self):
        for name in ("a", "a_prime", "b", "b_prime"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"angle {name} must be finite")
        return self


class DelayModelParams(StrictModel):
    name: str = "reference"
    t0: float = Field(default=1000e-9, ge=0)
    exponent: float = Field(default=4.0, ge=0)
    response: Literal["sign", "malus"] = "sign"

    def model_kwargs(self) -> Dict[str, Any]:
        if self.name == "zero":
            return {"response": self.response}
        return {"t0": self.t0, "exponent": self.exponent, "response": self.response}


class WindowSweepParams(StrictModel):
    n_pairs: int = Field(default=1_000_000, ge=1)
    windows: List[float] = Field(default_factory=lambda: [math.inf, 1e-6, 1e-7, 1e-8, 1e-9])
    # Polarizer angles in radians
    a: float = 0.0
    a_prime: float = math.pi / 4
    b: float = math.pi / 8
    b_prime: float = 3 * math.pi / 8
    model: DelayModelParams = Field(default_factory=DelayModelParams)
    jitter_scale: float = Field(default=0.0, ge=0)
    emission_spacing: Optional[float] = Field(default=None, gt=0)
    export_clicks_dir: Optional[str] = None
    # Re-match recorded clicks instead of simulating
    clicks_path: Optional[str] = None

    @field_validator("windows", mode="before")
    @classmethod
    def _parse_windows(cls, value):
        if not isinstance(value, list) or not value:
            raise ValueError("windows must be a non-empty list")
        parsed = []
        for item in value:
            if isinstance(item, str) and item.strip().lower() in ("inf", "infinity", ".inf"):
                parsed.append(math.inf)
            else:
                parsed.append(item)
        return parsed

    @field_validator("windows")
    @classmethod
    def _non_negative(cls, value: List[float]) -> List[float]:
        for window in value:
            if math.isnan(window) or window < 0:
                raise ValueError(f"windows must be >= 0, got {window}")
        return value

    @property
    def spacing(self) -> float:
        if self.emission_spacing is not None:
            return self.emission_spacing
        return 10 * self.model.t0 if self.model.t0 > 0 else 1e-5


class CondProbParams(StrictModel):
    a_theta: float = 0.0
    b_theta: float = math.pi / 3
    a: Optional[FixtureRef] = None
    b: Optional[FixtureRef] = None
    state: Optional[FixtureRef] = None
    compare_state: Optional[FixtureRef] = None


PARAMS_MODELS = {
    "epr-demo": EprDemoParams,
    "postulate-compare": PostulateCompareParams,
    "chsh": ChshParams,
    "window-sweep": WindowSweepParams,
    "condprob": CondProbParams,
}

DEFAULT_FORMATS = {
    "epr-demo": "json",
    "postulate-compare": "json",
    "chsh": "csv",
    "window-sweep": "csv",
    "condprob": "json",
}

ParamsBlock = Union[
    EprDemoParams, PostulateCompareParams, ChshParams, WindowSweepParams, CondProbParams
]


class ExperimentConfig(StrictModel):
    experiment: ExperimentName
    seed: int = Field(default=0, ge=0)
    output_path: Optional[str] = None
    format: Optional[ReportFormat] = None
    params: ParamsBlock

    @model_validator(mode="before")
    @classmethod
    def _select_params_model(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        model = PARAMS_MODELS.get(data.get("experiment"))
        if model is not None:
            params = data.get("params") or {}
            if not isinstance(params, model):
                params = model.model_validate(params)
            data["params"] = params
        return data

    @property
    def report_format(self) -> str:
        return self.format or DEFAULT_FORMATS[self.experiment]


def _flatten_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item.get("loc", ()))
        parts.append(f"{location}: {item.get('msg')}" if location else str(item.get("msg")))
    return "; ".join(parts)


def read_config_file(path: str) -> Dict[str, Any]:
    """Parse a YAML config file into a mapping."""
    if not os.path.exists(path):
        raise ConfigParseError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigParseError(f"Invalid YAML in {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigParseError(f"Config root must be a mapping, got {type(data).__name__}")
    return data


def build_config(
    experiment: Optional[str] = None,
    config_path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Merge defaults, the config file and CLI overrides into a validated config.

    Args:
        experiment: Experiment selected on the command line
        config_path: Optional YAML config file
        overrides: CLI flag values (``None`` entries are ignored)

    Returns:
        Validated ExperimentConfig
    """
    data: Dict[str, Any] = read_config_file(config_path) if config_path else {}
    if experiment is not None:
        if data.get("experiment") not in (None, experiment):
            raise ConfigValidationError(
                f"Config file is for '{data['experiment']}' but '{experiment}' was requested"
            )
        data["experiment"] = experiment
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigValidationError(_flatten_validation_error(e)) from e
