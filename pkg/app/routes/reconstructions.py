# app/routes/reconstructions.py
"""
Reconstruction routes.
"""

import numpy as np
from fastapi import APIRouter, HTTPException

from app.models.api_model import ReconstructionRequest, ReconstructionResponse
from app.models.image_model import GreyLevels
from app.models.operator_model import Sinogram
from app.services.reconstruction_service import reconstruction_service
from app.utils.logger import get_logger
from app.utils.validators import TomographyError

logger = get_logger(__name__)

router = APIRouter(prefix="/reconstructions", tags=["Reconstructions"])


@router.post("", response_model=ReconstructionResponse)
def reconstruct(request: ReconstructionRequest):
    """
    Reconstruct a binary image from projection data.

    Args:
        request: Sinogram values, geometry, method and options.

    Returns:
        The segmented image, the ternary map for dual methods, solver
        diagnostics and metrics when ``truth`` is given.
    """
    try:
        sinogram = Sinogram(values=request.values, weights=request.weights,
                            geometry=request.geometry.kind.value, metadata={})
        result = reconstruction_service.reconstruct(
            sinogram,
            method=request.method,
            levels=GreyLevels.parse(request.levels),
            truth=None if request.truth is None else np.asarray(request.truth),
            kernel=request.kernel,
            lam=request.lam,
            noise_level=request.noise_level,
            spec=request.geometry,
        )
    except (TomographyError, ValueError) as e:
        logger.warning("Rejected reconstruction request", method=request.method, error=str(e))
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error("Error reconstructing", method=request.method, error=str(e))
        raise HTTPException(status_code=500, detail="Failed to reconstruct image")

    lists = result.as_lists()
    return ReconstructionResponse(
        method=result.method,
        image=lists["image"],
        ternary=lists.get("ternary"),
        converged=result.converged,
        iterations=result.iterations,
        kkt_residual=result.kkt_residual,
        branch=result.branch,
        lam=result.lam,
        undetermined_count=result.undetermined_count,
        metrics=result.metrics,
    )
