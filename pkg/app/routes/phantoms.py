# app/routes/phantoms.py
"""
Phantom routes.
"""

from fastapi import APIRouter, HTTPException

from app.models.api_model import PhantomRequest, PhantomResponse
from app.services.phantom_service import make_phantom
from app.utils.logger import get_logger

logger = get_logger(__name__)

router = APIRouter(prefix="/phantoms", tags=["Phantoms"])


@router.post("", response_model=PhantomResponse)
async def create_phantom(request: PhantomRequest):
    """
    Build an analytic binary phantom.

    Args:
        request: Phantom name and size.

    Returns:
        The phantom as nested lists of 0/1 values.
    """
    try:
        image = make_phantom(request.name, request.n)
        return PhantomResponse(name=request.name, n=request.n, image=image.tolist())
    except ValueError as e:
        logger.warning("Rejected phantom request", name=request.name, error=str(e))
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error("Error building phantom", error=str(e))
        raise HTTPException(status_code=500, detail="Failed to build phantom")
