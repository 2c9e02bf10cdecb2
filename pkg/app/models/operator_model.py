"""
Projection operator and measurement models.
"""

from typing import Any, Dict, Optional

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from app.models.geometry_model import GridSpec


class SparseOperator(BaseModel):
    """
    The projection matrix A in compressed-row storage.

    Immutable after construction; cached helpers such as the range projector
    are stored privately and never change the matrix.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: sp.csr_matrix
    grid: Optional[GridSpec] = None
    label: str = ""

    _cache: Dict[str, Any] = PrivateAttr(default_factory=dict)

    @field_validator("matrix", mode="before")
    @classmethod
    def _to_csr(cls, value: Any) -> sp.csr_matrix:
        matrix = sp.csr_matrix(value, dtype=np.float64)
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        matrix.sort_indices()
        return matrix

    @model_validator(mode="after")
    def _check_entries(self) -> "SparseOperator":
        if self.matrix.nnz and np.any(self.matrix.data < 0):
            raise ValueError("projection coefficients must be nonnegative")
        if self.grid is not None and self.grid.N != self.matrix.shape[1]:
            raise ValueError(f"operator has {self.matrix.shape[1]} columns, grid has {self.grid.N} pixels")
        return self

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def cached(self, key: str, factory):
        """Memoise a derived quantity (norm estimate, range basis) on this operator."""
        if key not in self._cache:
            self._cache[key] = factory()
        return self._cache[key]

    def row_scaled(self, scale: np.ndarray) -> "SparseOperator":
        """diag(scale) @ A, used to fold Lambda^(1/2) into the operator."""
        return SparseOperator(
            matrix=sp.diags(scale) @ self.matrix,
            grid=self.grid,
            label=f"{self.label}*w" if self.label else "weighted",
        )


class Sinogram(BaseModel):
    """Measurement vector y with optional per-ray weights and geometry metadata."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray
    weights: Optional[np.ndarray] = None
    geometry: str = ""
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("values", "weights", mode="before")
    @classmethod
    def _as_vector(cls, value: Any) -> Optional[np.ndarray]:
        if value is None:
            return None
        return np.asarray(value, dtype=np.float64).ravel()

    @model_validator(mode="after")
    def _check_weights(self) -> "Sinogram":
        if self.weights is not None:
            if self.weights.shape != self.values.shape:
                raise ValueError("weights must match the sinogram length")
            if np.any(self.weights <= 0):
                raise ValueError("sinogram weights must be strictly positive")
        return self

    @property
    def size(self) -> int:
        return int(self.values.size)
