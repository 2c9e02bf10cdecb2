"""
Reconstruction quality measures.
"""

from typing import Optional

from pydantic import BaseModel, Field, model_validator


class MetricsReport(BaseModel):
    """Residual norm and pixel agreement of a reconstruction against ground truth."""

    rms: Optional[float] = Field(None, ge=0)
    ji: float = Field(..., ge=0, le=1)
    # truth u1, reconstruction u0
    missing_count: int = Field(0, ge=0)
    # truth u0, reconstruction u1
    over_count: int = Field(0, ge=0)
    pixel_count: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_ji(self) -> "MetricsReport":
        expected = 1.0 - (self.missing_count + self.over_count) / self.pixel_count
        if abs(expected - self.ji) > 1e-12:
            raise ValueError("ji must equal 1 - (missing + over) / pixel_count")
        return self
