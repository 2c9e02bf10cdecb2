"""
Request and response bodies for the HTTP routes.
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.models.enumeration_model import EnumerationSummary
from app.models.geometry_model import Kernel
from app.models.metrics_model import MetricsReport
from app.models.run_model import GeometrySpec, NoiseSpec


class PhantomRequest(BaseModel):
    name: str
    n: int = Field(..., ge=8, le=512)


class PhantomResponse(BaseModel):
    name: str
    n: int
    image: List[List[float]]


class ProjectionRequest(BaseModel):
    image: List[List[float]]
    geometry: GeometrySpec
    noise: NoiseSpec = Field(default_factory=NoiseSpec)


class ProjectionResponse(BaseModel):
    geometry: str
    values: List[float]
    weights: Optional[List[float]] = None
    metadata: Dict[str, Any]


class ReconstructionRequest(BaseModel):
    values: List[float]
    weights: Optional[List[float]] = None
    geometry: GeometrySpec
    method: str = "dp"
    levels: str = "0,1"
    kernel: Kernel = Kernel.JOSEPH
    lam: Optional[float] = Field(None, ge=0)
    noise_level: Optional[float] = Field(None, ge=0)
    truth: Optional[List[List[float]]] = None


class ReconstructionResponse(BaseModel):
    method: str
    image: List[List[float]]
    ternary: Optional[List[List[int]]] = None
    converged: bool
    iterations: int
    kkt_residual: Optional[float] = None
    branch: Optional[str] = None
    lam: Optional[float] = None
    undetermined_count: int = 0
    metrics: Optional[MetricsReport] = None


class EnumerationRequest(BaseModel):
    n: int = Field(..., ge=2, le=3)
    directions: str = "hv"
    mode: str = "counts"


class EnumerationResponse(BaseModel):
    summary: EnumerationSummary
    table_row: Dict[str, str]
