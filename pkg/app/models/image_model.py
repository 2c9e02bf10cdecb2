"""
Image models: grey levels, binary images and ternary (partly undetermined) images.

Binary images are plain numpy arrays whose pixels take one of the two grey
levels; a ternary image adds a mask of pixels the dual solution left open.
"""

from enum import Enum
from typing import Tuple

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from app.utils.constants import TERNARY_CODE_U0, TERNARY_CODE_U1, TERNARY_CODE_UNDETERMINED

BinaryImage = npt.NDArray[np.float64]


class GreyLevels(BaseModel):
    """The two admissible pixel values u0 < u1."""
    model_config = ConfigDict(frozen=True)

    u0: float = -1.0
    u1: float = 1.0

    @model_validator(mode="after")
    def _check_order(self) -> "GreyLevels":
        if not self.u0 < self.u1:
            raise ValueError(f"grey levels must satisfy u0 < u1, got ({self.u0}, {self.u1})")
        return self

    @property
    def lower_slope(self) -> float:
        """Penalty slope on the negative side, |u0|."""
        return abs(self.u0)

    @property
    def upper_slope(self) -> float:
        """Penalty slope on the positive side, |u1|."""
        return abs(self.u1)

    @property
    def straddles_zero(self) -> bool:
        return self.u0 <= 0.0 <= self.u1

    @classmethod
    def symmetric(cls) -> "GreyLevels":
        return cls(u0=-1.0, u1=1.0)

    @classmethod
    def parse(cls, text: str) -> "GreyLevels":
        """Parse ``"u0,u1"``."""
        try:
            u0, u1 = (float(part) for part in text.split(","))
        except ValueError:
            raise ValueError(f"grey levels must look like 'u0,u1', got {text!r}") from None
        return cls(u0=u0, u1=u1)


class Completion(str, Enum):
    """How UNDETERMINED pixels are filled to obtain a feasible binary image."""
    U0 = "u0"
    U1 = "u1"
    MAJORITY = "majority"


class TernaryImage(BaseModel):
    """
    Pixels decided as u0 or u1, plus a mask of UNDETERMINED pixels.

    ``values`` holds the decided grey level and u0 at undetermined pixels;
    ``completed`` is the feasible binary image produced by the completion rule.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray
    undetermined: np.ndarray
    levels: GreyLevels
    completed: np.ndarray

    @field_validator("undetermined", mode="before")
    @classmethod
    def _as_mask(cls, value) -> np.ndarray:
        return np.asarray(value, dtype=bool)

    @model_validator(mode="after")
    def _check_shapes(self) -> "TernaryImage":
        if self.values.shape != self.undetermined.shape or self.values.shape != self.completed.shape:
            raise ValueError("ternary image arrays must share one shape")
        return self

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def undetermined_count(self) -> int:
        return int(self.undetermined.sum())

    def codes(self) -> np.ndarray:
        """Map u0 -> 0, UNDETERMINED -> 1, u1 -> 2."""
        out = np.where(self.values == self.levels.u1, TERNARY_CODE_U1, TERNARY_CODE_U0)
        out[self.undetermined] = TERNARY_CODE_UNDETERMINED
        return out.astype(np.uint8)

    def same_pattern(self, other: "TernaryImage") -> bool:
        """Same UNDETERMINED set and same decided pixels."""
        if self.shape != other.shape or not np.array_equal(self.undetermined, other.undetermined):
            return False
        decided = ~self.undetermined
        return bool(np.array_equal(self.values[decided], other.values[decided]))

    def agrees_on_decided(self, other: "TernaryImage") -> bool:
        """Every pixel decided here is decided identically in ``other`` (extra UNDETERMINED allowed)."""
        if self.shape != other.shape:
            return False
        decided = ~self.undetermined
        if np.any(other.undetermined[decided]):
            return False
        return bool(np.array_equal(self.values[decided], other.values[decided]))
