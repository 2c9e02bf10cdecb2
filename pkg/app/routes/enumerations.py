# app/routes/enumerations.py
"""
Enumeration routes. Only n <= 3 is served over HTTP.
"""

from fastapi import APIRouter, HTTPException

from app.models.api_model import EnumerationRequest, EnumerationResponse
from app.services.enumeration_service import EnumerationService
from app.utils.logger import get_logger
from app.utils.validators import TomographyError

logger = get_logger(__name__)

router = APIRouter(prefix="/enumerations", tags=["Enumerations"])

http_enumeration_service = EnumerationService(max_n=3)


@router.post("", response_model=EnumerationResponse)
def enumerate_images(request: EnumerationRequest):
    """Image counts per projection class, or the full dual recovery check in ``verify`` mode."""
    try:
        summary = http_enumeration_service.run(request.n, request.directions, request.mode)
        return EnumerationResponse(summary=summary, table_row=summary.table_row())
    except (TomographyError, ValueError) as e:
        logger.warning("Rejected enumeration request", n=request.n, error=str(e))
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error("Error enumerating", n=request.n, error=str(e))
        raise HTTPException(status_code=500, detail="Failed to enumerate images")
