"""
Grid and acquisition geometry models.
"""

import math
from enum import Enum
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.utils.constants import CANONICAL_DIRECTION_ORDER, LATTICE_DIRECTIONS


class Kernel(str, Enum):
    """Discretisation of a parallel-beam ray."""
    JOSEPH = "joseph"
    STRIP = "strip"


class GridSpec(BaseModel):
    """An n x n pixel grid; pixels are indexed row-major from the top-left corner."""
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    pixel_size: float = Field(1.0, gt=0)

    @property
    def N(self) -> int:
        return self.n * self.n


class LatticeGeometry(BaseModel):
    """Sums along a subset of the horizontal, vertical and two diagonal lattice directions."""
    model_config = ConfigDict(frozen=True)

    directions: List[Tuple[int, int]]

    @field_validator("directions")
    @classmethod
    def _check_directions(cls, value: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
        if not value:
            raise ValueError("at least one lattice direction is required")
        allowed = set(LATTICE_DIRECTIONS.values())
        normalized = [tuple(int(c) for c in d) for d in value]
        for direction in normalized:
            if direction not in allowed:
                raise ValueError(f"unsupported lattice direction {direction}")
        if len(set(normalized)) != len(normalized):
            raise ValueError("lattice directions must be pairwise distinct")
        # canonical h, v, d, a order keeps projection keys comparable
        order = {LATTICE_DIRECTIONS[k]: i for i, k in enumerate(CANONICAL_DIRECTION_ORDER)}
        return sorted(normalized, key=order.__getitem__)

    @property
    def m_dirs(self) -> int:
        return len(self.directions)

    @property
    def code(self) -> str:
        names = {v: k for k, v in LATTICE_DIRECTIONS.items()}
        return "".join(names[d] for d in self.directions)

    @classmethod
    def from_code(cls, code: str) -> "LatticeGeometry":
        """Build from letters such as ``"hvd"`` (h, v, d, a)."""
        try:
            directions = [LATTICE_DIRECTIONS[c] for c in code.strip().lower()]
        except KeyError as e:
            raise ValueError(f"unknown lattice direction letter {e.args[0]!r}") from None
        return cls(directions=directions)


class ParallelGeometry(BaseModel):
    """
    Parallel-beam acquisition with a flat, center-aligned detector.

    At angle 0 the rays run down the image columns and detector cell j sits
    under column j when ``detector_count == n`` and the spacing equals the
    pixel size.
    """
    model_config = ConfigDict(frozen=True)

    angles: List[float]
    detector_count: int = Field(..., ge=1)
    detector_spacing: float = Field(1.0, gt=0)
    kernel: Kernel = Kernel.JOSEPH

    @field_validator("angles")
    @classmethod
    def _check_angles(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("at least one projection angle is required")
        for angle in value:
            if not (0.0 <= angle < 2 * math.pi):
                raise ValueError(f"angle {angle} outside [0, 2*pi)")
        return [float(a) for a in value]

    @property
    def rows(self) -> int:
        return len(self.angles) * self.detector_count

    @classmethod
    def uniform(
        cls,
        count: int,
        theta_max: float,
        detector_count: int,
        detector_spacing: float = 1.0,
        kernel: Kernel = Kernel.JOSEPH,
    ) -> "ParallelGeometry":
        """Equispaced angles on ``[0, theta_max)``."""
        angles = np.linspace(0.0, theta_max, count, endpoint=False)
        return cls(
            angles=angles.tolist(),
            detector_count=detector_count,
            detector_spacing=detector_spacing,
            kernel=kernel,
        )

    def with_kernel(self, kernel: Kernel) -> "ParallelGeometry":
        return self.model_copy(update={"kernel": kernel})
