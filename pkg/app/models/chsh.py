"""CHSH settings and correlation estimates."""

import math
from dataclasses import dataclass
from typing import Iterator, Tuple

# Order of the four terms of S = E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)
SETTING_PAIRS: Tuple[Tuple[str, str], ...] = (
    ("a", "b"),
    ("a", "b_prime"),
    ("a_prime", "b"),
    ("a_prime", "b_prime"),
)
CHSH_SIGNS: Tuple[int, ...] = (1, -1, 1, 1)

# Reported standard error when a sample is too small to estimate one
UNDEFINED_STDERR = math.nan


@dataclass(frozen=True)
class ChshSetting:
    """Analyzer angles in radians for the two sides."""

    a: float
    a_prime: float
    b: float
    b_prime: float

    def __post_init__(self):
        for name in ("a", "a_prime", "b", "b_prime"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"CHSH angle {name} must be finite")

    @classmethod
    def tsirelson(cls) -> "ChshSetting":
        """Angles maximizing |S| for the singlet with the spin convention cosθ·σ_z + sinθ·σ_x."""
        return cls(a=0.0, a_prime=math.pi / 2, b=math.pi / 4, b_prime=3 * math.pi / 4)

    def pairs(self) -> Iterator[Tuple[float, float]]:
        """(θ_A, θ_B) for the four terms, in CHSH order."""
        for left, right in SETTING_PAIRS:
            yield getattr(self, left), getattr(self, right)


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    n_pairs: int
    std_error: float
