"""
Enumeration oracle models.
"""

from typing import Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.image_model import TernaryImage


class InstanceClassification(BaseModel):
    """All binary images sharing one projection vector."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    projection_key: bytes
    projection: np.ndarray
    # stacked solutions, shape (k, n, n)
    solutions: np.ndarray
    intersection: TernaryImage

    @property
    def size(self) -> int:
        return int(self.solutions.shape[0])

    @property
    def unique(self) -> bool:
        return self.size == 1


class ClassVerdict(BaseModel):
    """Outcome of the dual check on one projection class."""
    projection_key: bytes
    class_size: int
    unique: bool
    correct: bool
    correct_relaxed: bool
    pinv_correct: bool
    failed: bool = False
    kkt_residual: float = 0.0
    message: str = ""


class EnumerationSummary(BaseModel):
    """Counts in the shape of the complete-enumeration table; counts are images, not classes."""
    n: int
    m_dirs: int
    directions: str = ""
    total: int
    unique_count: int
    multiple_count: int
    class_count: int = 0
    dual_correct_unique: int = 0
    dual_correct_multiple: int = 0
    dual_correct_multiple_relaxed: int = 0
    pinv_correct_unique: int = 0
    dual_failures: int = 0
    verified: bool = False
    sampled: bool = False
    failed_keys: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_counts(self) -> "EnumerationSummary":
        if self.unique_count + self.multiple_count != self.total:
            raise ValueError("unique and multiple counts must add up to the total")
        if self.dual_correct_unique > self.unique_count or self.dual_correct_multiple > self.multiple_count:
            raise ValueError("correct counts cannot exceed class totals")
        return self

    def table_row(self) -> Dict[str, str]:
        return {
            "m": str(self.m_dirs),
            "n": str(self.n),
            "total": str(self.total),
            "unique": f"{self.dual_correct_unique}/{self.unique_count}" if self.verified else str(self.unique_count),
            "multiple": f"{self.dual_correct_multiple}/{self.multiple_count}" if self.verified else str(self.multiple_count),
            "failures": str(self.dual_failures),
        }
