"""The five-level confidence ordinal shared by corpus, mapper, and SFT code."""

from __future__ import annotations

import enum

from .errors import InputError


class ConfidenceLevel(str, enum.Enum):
    """Ordinal hedging levels, weakest to strongest."""

    COMPLETELY_UNCERTAIN = "completely_uncertain"
    LOWEST = "lowest"
    LOW = "low"
    MODERATE = "moderate"
    HIGH = "high"

    @property
    def rank(self) -> int:
        return _RANK[self]

    def __lt__(self, other):  # ordinal comparisons used in tests
        if isinstance(other, ConfidenceLevel):
            return self.rank < other.rank
        return NotImplemented


_RANK = {
    ConfidenceLevel.COMPLETELY_UNCERTAIN: 0,
    ConfidenceLevel.LOWEST: 1,
    ConfidenceLevel.LOW: 2,
    ConfidenceLevel.MODERATE: 3,
    ConfidenceLevel.HIGH: 4,
}

LEVELS_ASCENDING: tuple[ConfidenceLevel, ...] = (
    ConfidenceLevel.COMPLETELY_UNCERTAIN,
    ConfidenceLevel.LOWEST,
    ConfidenceLevel.LOW,
    ConfidenceLevel.MODERATE,
    ConfidenceLevel.HIGH,
)

# Regression targets used when training on generator-labeled expressions.
LEVEL_TARGET: dict[ConfidenceLevel, float] = {
    ConfidenceLevel.COMPLETELY_UNCERTAIN: 0.0,
    ConfidenceLevel.LOWEST: 0.25,
    ConfidenceLevel.LOW: 0.5,
    ConfidenceLevel.MODERATE: 0.75,
    ConfidenceLevel.HIGH: 1.0,
}


def discretize_level(confidence: float) -> ConfidenceLevel:
    """Map a confidence in [0,1] onto the five-level ordinal.

    Intervals are (0.8,1.0] high, (0.6,0.8] moderate, (0.4,0.6] low,
    (0.2,0.4] lowest, [0,0.2] completely uncertain; each boundary belongs
    to the interval whose closed end it is.
    """
    if not 0.0 <= confidence <= 1.0:
        raise InputError(f"confidence {confidence} outside [0, 1]")
    if confidence > 0.8:
        return ConfidenceLevel.HIGH
    if confidence > 0.6:
        return ConfidenceLevel.MODERATE
    if confidence > 0.4:
        return ConfidenceLevel.LOW
    if confidence > 0.2:
        return ConfidenceLevel.LOWEST
    return ConfidenceLevel.COMPLETELY_UNCERTAIN
