"""
Run-level models shared by the CLI, the HTTP routes and the benchmark harness.
"""

import math
import os
import re
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import settings
from app.models.geometry_model import GridSpec, Kernel, LatticeGeometry, ParallelGeometry
from app.models.image_model import GreyLevels
from app.models.metrics_model import MetricsReport
from app.models.solver_model import DualSolution, SolverConfig
from app.utils.constants import PHANTOM_LEVELS

_ANGLE_PATTERN = re.compile(r"^\s*([0-9.]*)\s*(pi)?\s*(?:/\s*([0-9.]+))?\s*$")


def parse_angle(text: Union[str, float]) -> float:
    """Parse radians written as ``1.2``, ``pi``, ``pi/2`` or ``7pi/12``."""
    if isinstance(text, (int, float)):
        return float(text)
    match = _ANGLE_PATTERN.match(text.lower())
    if not match or not (match.group(1) or match.group(2)):
        raise ValueError(f"cannot parse angle {text!r}")
    coefficient = float(match.group(1)) if match.group(1) else 1.0
    value = coefficient * (math.pi if match.group(2) else 1.0)
    if match.group(3):
        value /= float(match.group(3))
    return value


class GeometryKind(str, Enum):
    LATTICE = "lattice"
    PARALLEL = "parallel"


class NoiseKind(str, Enum):
    NONE = "none"
    GAUSSIAN = "gaussian"
    POISSON = "poisson"


class GeometrySpec(BaseModel):
    """
    Flat description of an acquisition, as carried in sinogram metadata.

    Lattice geometries use ``directions``; parallel geometries use either
    explicit ``angles`` or ``angle_count`` equispaced angles on ``[0, theta_max)``.
    """
    kind: GeometryKind = GeometryKind.PARALLEL
    n: int = Field(..., ge=1)
    pixel_size: float = Field(1.0, gt=0)
    directions: str = "hv"
    angles: Optional[List[float]] = None
    angle_count: int = Field(10, ge=1)
    theta_max: float = Field(math.pi, gt=0)
    detector_count: Optional[int] = Field(None, ge=1)
    detector_spacing: float = Field(1.0, gt=0)
    kernel: Kernel = Kernel.STRIP

    @field_validator("theta_max", mode="before")
    @classmethod
    def _parse_theta(cls, value: Any) -> float:
        return parse_angle(value)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(n=self.n, pixel_size=self.pixel_size)

    def build(self) -> Tuple[GridSpec, Union[LatticeGeometry, ParallelGeometry]]:
        if self.kind == GeometryKind.LATTICE:
            return self.grid, LatticeGeometry.from_code(self.directions)
        detectors = self.detector_count or self.n
        if self.angles is not None:
            geom = ParallelGeometry(angles=self.angles, detector_count=detectors,
                                    detector_spacing=self.detector_spacing, kernel=self.kernel)
        else:
            geom = ParallelGeometry.uniform(self.angle_count, self.theta_max, detectors,
                                            self.detector_spacing, self.kernel)
        return self.grid, geom

    def with_kernel(self, kernel: Kernel) -> "GeometrySpec":
        return self.model_copy(update={"kernel": kernel})

    def to_metadata(self) -> Dict[str, Any]:
        """Key/value pairs for a sinogram header; parallel angles are always listed explicitly."""
        meta: Dict[str, Any] = {"n": self.n, "pixel_size": self.pixel_size}
        if self.kind == GeometryKind.LATTICE:
            meta["directions"] = LatticeGeometry.from_code(self.directions).code
            return meta
        _, geom = self.build()
        meta.update(angles=list(geom.angles), detector_count=geom.detector_count,
                    detector_spacing=geom.detector_spacing, kernel=geom.kernel.value)
        return meta

    @classmethod
    def from_metadata(cls, kind: str, meta: Dict[str, Any]) -> "GeometrySpec":
        """Inverse of ``to_metadata``; values may be strings as read from a file."""
        try:
            values: Dict[str, Any] = {"kind": GeometryKind(kind or GeometryKind.PARALLEL.value), "n": int(meta["n"])}
        except (KeyError, ValueError) as exc:
            raise ValueError(f"sinogram metadata lacks a usable geometry ({exc})") from None
        if "pixel_size" in meta:
            values["pixel_size"] = float(meta["pixel_size"])
        if values["kind"] == GeometryKind.LATTICE:
            values["directions"] = str(meta.get("directions", "hv"))
            return cls(**values)
        angles = meta.get("angles")
        if isinstance(angles, str):
            angles = [float(a) for a in angles.split(",") if a.strip()]
        values["angles"] = angles
        if "detector_count" in meta:
            values["detector_count"] = int(meta["detector_count"])
        if "detector_spacing" in meta:
            values["detector_spacing"] = float(meta["detector_spacing"])
        if "kernel" in meta:
            values["kernel"] = Kernel(meta["kernel"])
        return cls(**values)


class NoiseSpec(BaseModel):
    kind: NoiseKind = NoiseKind.NONE
    snr_db: Optional[float] = None
    I0: Optional[float] = Field(None, gt=0)
    seed: int = Field(default_factory=lambda: settings.SEED)

    @model_validator(mode="after")
    def _check_parameters(self) -> "NoiseSpec":
        if self.kind == NoiseKind.GAUSSIAN and self.snr_db is None:
            raise ValueError("gaussian noise needs snr_db")
        if self.kind == NoiseKind.POISSON and self.I0 is None:
            raise ValueError("poisson noise needs I0")
        return self


class RunConfig(BaseModel):
    """Everything one command needs: paths, seed, workers and solver settings."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    command: str
    seed: int = Field(default_factory=lambda: settings.SEED)
    output_dir: str = Field(default_factory=lambda: settings.OUTPUT_DIR)
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)
    solver: SolverConfig = Field(default_factory=SolverConfig.from_settings)
    inputs: Dict[str, str] = Field(default_factory=dict)
    options: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_inputs(self) -> "RunConfig":
        missing = [f"{k}={p}" for k, p in self.inputs.items() if p and not os.path.exists(p)]
        if missing:
            raise ValueError(f"input files not found: {', '.join(missing)}")
        return self


class ReconstructionResult(BaseModel):
    """Image, diagnostics and optional quality measures of one reconstruction."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    method: str
    image: np.ndarray
    levels: GreyLevels = GreyLevels(u0=PHANTOM_LEVELS[0], u1=PHANTOM_LEVELS[1])
    ternary_codes: Optional[np.ndarray] = None
    converged: bool = True
    iterations: int = 0
    kkt_residual: Optional[float] = None
    branch: Optional[str] = None
    lam: Optional[float] = None
    undetermined_count: int = 0
    metrics: Optional[MetricsReport] = None
    # full dual solution for the dp methods
    dual: Optional[DualSolution] = Field(None, exclude=True)

    def summary(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "method": self.method,
            "converged": self.converged,
            "iterations": self.iterations,
            "undetermined": self.undetermined_count,
        }
        if self.kkt_residual is not None:
            row["kkt_residual"] = self.kkt_residual
        if self.branch is not None:
            row["branch"] = self.branch
        if self.lam is not None:
            row["lambda"] = self.lam
        if self.metrics is not None:
            row["rms"] = self.metrics.rms
            row["ji"] = self.metrics.ji
        return row

    def as_lists(self) -> Dict[str, Any]:
        out = {"image": np.asarray(self.image).tolist()}
        if self.ternary_codes is not None:
            out["ternary"] = np.asarray(self.ternary_codes).tolist()
        return out
