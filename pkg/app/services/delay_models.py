"""Local detector response models: ±1 outcome and time delay per photon.

A model sees only the photon's polarization angle, its own side's setting and
its own random stream. New models are added with ``@register_delay_model``.
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, Tuple, Type

import numpy as np

from app.errors import InvalidModelParams

logger = logging.getLogger(__name__)

RESPONSES = ("sign", "malus")

DELAY_MODELS: Dict[str, Type["DelayModel"]] = {}


def register_delay_model(name: str):
    """Class decorator adding a model to the registry under ``name``."""

    def decorator(cls):
        cls.name = name
        DELAY_MODELS[name] = cls
        return cls

    return decorator


def get_delay_model(name: str, **params: Any) -> "DelayModel":
    """Instantiate a registered model; unknown names or parameters raise InvalidModelParams."""
    if name not in DELAY_MODELS:
        raise InvalidModelParams(
            f"Unknown delay model '{name}', available: {sorted(DELAY_MODELS)}"
        )
    try:
        return DELAY_MODELS[name](**params)
    except TypeError as e:
        raise InvalidModelParams(f"Bad parameters for delay model '{name}': {e}") from e


class DelayModel(ABC):
    name: str = "abstract"

    def __init__(self, response: str = "sign"):
        if response not in RESPONSES:
            raise InvalidModelParams(f"response must be one of {RESPONSES}, got '{response}'")
        self.response = response

    def outcomes(
        self, relative_angle: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        """±1 outcomes: sign(cos 2δ), or +1 with probability cos²δ for the Malus response."""
        draws = rng.random(len(relative_angle))
        if self.response == "sign":
            return np.where(np.cos(2 * relative_angle) >= 0, 1, -1).astype(np.int8)
        return np.where(draws < np.cos(relative_angle) ** 2, 1, -1).astype(np.int8)

    @abstractmethod
    def respond(
        self, photon_angle: np.ndarray, setting_angle: float, rng: np.random.Generator
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Return (outcomes, delays in seconds) for photons at the given polarization angles."""

    def params(self) -> Dict[str, Any]:
        return {"response": self.response}


@register_delay_model("zero")
class ZeroDelayModel(DelayModel):
    """Outcomes only; every photon is detected without delay."""

    def respond(self, photon_angle, setting_angle, rng):
        relative = np.asarray(photon_angle) - setting_angle
        return self.outcomes(relative, rng), np.zeros(len(relative))


@register_delay_model("reference")
class ReferenceDelayModel(DelayModel):
    """
    Delay T₀ · u · |sin 2δ|^d with u uniform on [0, 1] and δ = photon angle − setting.

    Photons far from the analyzer axes are delayed longer, so the time window
    keeps a setting-dependent subset of pairs.
    """

    def __init__(self, t0: float = 1000e-9, exponent: float = 4.0, response: str = "sign"):
        super().__init__(response=response)
        if not np.isfinite(t0) or t0 < 0:
            raise InvalidModelParams(f"t0 must be a non-negative number of seconds, got {t0}")
        if not np.isfinite(exponent) or exponent < 0:
            raise InvalidModelParams(f"exponent must be non-negative, got {exponent}")
        self.t0 = float(t0)
        self.exponent = float(exponent)

    def respond(self, photon_angle, setting_angle, rng):
        relative = np.asarray(photon_angle) - setting_angle
        u = rng.random(len(relative))
        delays = self.t0 * u * np.abs(np.sin(2 * relative)) ** self.exponent
        return self.outcomes(relative, rng), delays

    def params(self) -> Dict[str, Any]:
        return {"response": self.response, "t0": self.t0, "exponent": self.exponent}
