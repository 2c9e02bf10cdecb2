# app/services/acquisition_service.py
"""
Acquisition service: operators from geometry descriptions and simulated
measurements with self-describing metadata.
"""

from typing import List, Optional, Tuple

import numpy as np

from app.models.geometry_model import GridSpec, LatticeGeometry, ParallelGeometry
from app.models.operator_model import Sinogram, SparseOperator
from app.models.run_model import GeometryKind, GeometrySpec, NoiseKind, NoiseSpec
from app.services.noise_service import add_gaussian_noise, simulate_poisson
from app.services.projection_service import apply_forward, build_lattice_operator, build_parallel_operator
from app.utils.logger import get_logger
from app.utils.validators import DimensionMismatchError

logger = get_logger(__name__)

RowIndex = List[Tuple[int, int]]


class AcquisitionService:
    """Builds operators and forward-projects images, with optional noise."""

    def build_operator(self, spec: GeometrySpec) -> SparseOperator:
        grid, geom = spec.build()
        if isinstance(geom, LatticeGeometry):
            return build_lattice_operator(grid, geom)
        return build_parallel_operator(grid, geom)

    def row_index(self, spec: GeometrySpec) -> RowIndex:
        """(angle or direction index, detector or line index) for every operator row."""
        grid, geom = spec.build()
        if isinstance(geom, ParallelGeometry):
            return [(k, j) for k in range(len(geom.angles)) for j in range(geom.detector_count)]
        index: RowIndex = []
        for k, direction in enumerate(geom.directions):
            lines = grid.n if direction in ((0, 1), (1, 0)) else 2 * grid.n - 1
            index.extend((k, j) for j in range(lines))
        return index

    def project(self, image: np.ndarray, spec: GeometrySpec, noise: Optional[NoiseSpec] = None) -> Tuple[Sinogram, RowIndex]:
        """
        Forward-project ``image`` and apply the requested noise model.

        Args:
            image: n x n image.
            spec: Acquisition geometry; its ``n`` must match the image.
            noise: Noise model; noise-free when omitted.

        Returns:
            The sinogram (geometry, noise and seed recorded in its metadata)
            and its row index.
        """
        noise = noise or NoiseSpec()
        image = np.asarray(image, dtype=np.float64)
        if image.shape != (spec.n, spec.n):
            raise DimensionMismatchError(f"image shape {image.shape} does not match the {spec.n}x{spec.n} geometry")
        A = self.build_operator(spec)
        clean = apply_forward(A, image.ravel())
        meta = spec.to_metadata()

        if noise.kind == NoiseKind.GAUSSIAN:
            sinogram = add_gaussian_noise(clean, noise.snr_db, noise.seed)
        elif noise.kind == NoiseKind.POISSON:
            sinogram, _ = simulate_poisson(clean, noise.I0, noise.seed)
        else:
            sinogram = Sinogram(values=clean, metadata={"noise": "none", "noise_norm": 0.0, "seed": noise.seed})
        sinogram = sinogram.model_copy(update={
            "geometry": spec.kind.value,
            "metadata": {**meta, **sinogram.metadata},
        })
        logger.info("Projected image", geometry=spec.kind.value, rows=A.rows, noise=noise.kind.value)
        return sinogram, self.row_index(spec)

    def geometry_of(self, sinogram: Sinogram) -> GeometrySpec:
        return GeometrySpec.from_metadata(sinogram.geometry or GeometryKind.PARALLEL.value, sinogram.metadata)


acquisition_service = AcquisitionService()
