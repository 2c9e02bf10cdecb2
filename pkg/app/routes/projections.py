# app/routes/projections.py
"""
Projection routes.
"""

import numpy as np
from fastapi import APIRouter, HTTPException

from app.models.api_model import ProjectionRequest, ProjectionResponse
from app.services.acquisition_service import acquisition_service
from app.utils.logger import get_logger
from app.utils.validators import TomographyError

logger = get_logger(__name__)

router = APIRouter(prefix="/projections", tags=["Projections"])


@router.post("", response_model=ProjectionResponse)
async def project_image(request: ProjectionRequest):
    """Forward-project an image for a lattice or parallel-beam geometry, optionally with noise."""
    try:
        sinogram, _ = acquisition_service.project(np.asarray(request.image), request.geometry, request.noise)
        return ProjectionResponse(
            geometry=sinogram.geometry,
            values=sinogram.values.tolist(),
            weights=None if sinogram.weights is None else sinogram.weights.tolist(),
            metadata=sinogram.metadata,
        )
    except (TomographyError, ValueError) as e:
        logger.warning("Rejected projection request", error=str(e))
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error("Error projecting image", error=str(e))
        raise HTTPException(status_code=500, detail="Failed to project image")
