"""
Quality measures: projection residual and pixelwise agreement.
"""

from typing import Optional

import numpy as np

from app.models.image_model import GreyLevels
from app.models.metrics_model import MetricsReport
from app.models.operator_model import SparseOperator
from app.utils.validators import check_binary_image, check_same_shape, check_vector_length


def rms(A: SparseOperator, x_star: np.ndarray, y: np.ndarray) -> float:
    """Euclidean residual ||A x* - y||, not divided by the ray count."""
    x_star = check_vector_length(x_star, A.cols, "image")
    y = check_vector_length(y, A.rows, "sinogram")
    return float(np.linalg.norm(A.matrix @ x_star - y))


def jaccard(x_star: np.ndarray, x_true: np.ndarray, levels: Optional[GreyLevels] = None,
            residual: Optional[float] = None) -> MetricsReport:
    """
    Pixel agreement 1 - (missing + over) / N between two binary images.

    This is pixel accuracy rather than the set-theoretic Jaccard index.
    """
    levels = levels or GreyLevels(u0=0.0, u1=1.0)
    check_same_shape(x_star, x_true, "reconstruction and ground truth must have the same shape")
    recon = check_binary_image(x_star, levels.u0, levels.u1, "reconstruction")
    truth = check_binary_image(x_true, levels.u0, levels.u1, "ground truth")
    missing = int(np.sum((truth == levels.u1) & (recon == levels.u0)))
    over = int(np.sum((truth == levels.u0) & (recon == levels.u1)))
    size = int(truth.size)
    return MetricsReport(
        rms=residual,
        ji=1.0 - (missing + over) / size,
        missing_count=missing,
        over_count=over,
        pixel_count=size,
    )


def evaluate(A: SparseOperator, x_star: np.ndarray, y: np.ndarray, x_true: np.ndarray,
             levels: Optional[GreyLevels] = None) -> MetricsReport:
    """Both measures in one report."""
    return jaccard(x_star, x_true, levels, residual=rms(A, np.ravel(x_star), y))
