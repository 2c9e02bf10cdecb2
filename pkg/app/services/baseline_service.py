"""
Reference reconstructions: LSQR with Otsu segmentation and anisotropic
total variation solved by Chambolle-Pock, with the regularisation weight
picked by the discrepancy principle.
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsqr, svds
from skimage.filters import threshold_otsu

from app.models.image_model import GreyLevels
from app.models.operator_model import SparseOperator
from app.models.solver_model import TvConfig, TvResult
from app.services.projection_service import estimate_operator_norm
from app.utils.constants import DISCREPANCY_FACTOR, OTSU_BINS, TV_LAMBDA_GRID
from app.utils.logger import get_logger
from app.utils.validators import SolverError, check_positive, check_vector_length

logger = get_logger(__name__)


def solve_least_squares(A: SparseOperator, y: np.ndarray, max_iters: int = 1000, tol: float = 1e-6) -> np.ndarray:
    """
    Least-squares image by LSQR.

    Args:
        A: Projection operator.
        y: Sinogram values.
        max_iters: Iteration cap.
        tol: Stopping tolerance passed to LSQR as atol and btol.

    Returns:
        Flat image of length A.cols.
    """
    y = check_vector_length(y, A.rows, "sinogram")
    if A.nnz == 0:
        raise SolverError("least squares needs an operator with nonzero coefficients")
    x, istop, itn = lsqr(A.matrix, y, atol=tol, btol=tol, iter_lim=max_iters)[:3]
    if istop == 7:
        logger.warning("LSQR reached the iteration cap", iterations=itn)
    logger.info("LSQR solve finished", iterations=int(itn), istop=int(istop))
    return x


def otsu_level(x: np.ndarray) -> Optional[float]:
    """Otsu threshold over a 256-bin histogram; None for a constant image."""
    values = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("Otsu thresholding needs finite pixel values")
    if values.size == 0 or np.ptp(values) == 0:
        return None
    return float(threshold_otsu(values, nbins=OTSU_BINS))


def otsu_threshold(x: np.ndarray, levels: Optional[GreyLevels] = None) -> np.ndarray:
    """Segment ``x`` into u0/u1 at the Otsu threshold; a constant image maps to all u0."""
    levels = levels or GreyLevels(u0=0.0, u1=1.0)
    values = np.asarray(x, dtype=np.float64)
    cut = otsu_level(values)
    if cut is None:
        return np.full(values.shape, levels.u0)
    return np.where(values > cut, levels.u1, levels.u0)


# ---------- Total variation ----------

def _forward_difference(n: int) -> sp.csr_matrix:
    """1-D forward difference with a zero last row (Neumann boundary)."""
    main = -np.ones(n)
    main[-1] = 0.0
    return sp.diags([main, np.ones(n - 1)], [0, 1], shape=(n, n), format="csr")


def gradient_operator(n: int) -> sp.csr_matrix:
    """Stacked horizontal and vertical forward differences of a row-major n x n image."""
    step = _forward_difference(n)
    eye = sp.identity(n, format="csr")
    return sp.vstack([sp.kron(eye, step), sp.kron(step, eye)], format="csr")


def _spectral_norm(matrix: sp.spmatrix) -> float:
    if matrix.nnz == 0:
        return 0.0
    if min(matrix.shape) < 3:
        return float(np.linalg.norm(matrix.toarray(), 2))
    return float(svds(matrix, k=1, return_singular_vectors=False, random_state=0)[0])


def tv_objective(A: SparseOperator, y: np.ndarray, D: sp.spmatrix, x: np.ndarray, lam: float) -> float:
    """||A x - y||^2 + lam ||D x||_1."""
    residual = A.matrix @ x - y
    return float(residual @ residual) + lam * float(np.abs(D @ x).sum())


def solve_tv(A: SparseOperator, y: np.ndarray, D: Optional[sp.spmatrix] = None,
             cfg: Optional[TvConfig] = None) -> TvResult:
    """
    Minimise ||A x - y||^2 + lam ||D x||_1 (optionally with x >= 0) by Chambolle-Pock.

    A and D are rescaled to unit norm before iterating. The stopping test is
    the relative gap against a dual bound taken over the box [0, B] (or
    [-B, B] without the sign constraint), B twice the largest current pixel
    magnitude, and the best primal iterate seen at a checkpoint is returned.
    """
    cfg = cfg or TvConfig()
    y = check_vector_length(y, A.rows, "sinogram")
    if A.nnz == 0:
        raise SolverError("TV needs an operator with nonzero coefficients")
    if D is None:
        if A.grid is None:
            raise SolverError("TV needs a gradient operator or an operator with a square grid")
        D = gradient_operator(A.grid.n)
    lam = cfg.lam

    a_norm = estimate_operator_norm(A)
    d_norm = _spectral_norm(D) or 1.0
    K_data = A.matrix / a_norm
    K_grad = D / d_norm
    c = y / a_norm
    # K = [A/|A|; D/|D|] has norm at most sqrt(2)
    tau = sigma = 0.99 / math.sqrt(2.0)
    curvature = 1.0 + sigma / (2.0 * a_norm ** 2)
    bound = lam * d_norm
    logger.info("TV solve", rows=A.rows, cols=A.cols, lam=lam, nonneg=cfg.nonneg)

    x = np.zeros(A.cols)
    x_bar = x.copy()
    q = np.zeros(A.rows)
    p = np.zeros(D.shape[0])
    best_x, best_value = x.copy(), tv_objective(A, y, D, x, lam)
    history = [best_value]
    gap = math.inf

    for k in range(1, cfg.max_iters + 1):
        q = (q + sigma * (K_data @ x_bar) - sigma * c) / curvature
        p = np.clip(p + sigma * (K_grad @ x_bar), -bound, bound)
        x_old = x
        x = x - tau * (K_data.T @ q + K_grad.T @ p)
        if cfg.nonneg:
            x = np.maximum(x, 0.0)
        x_bar = 2.0 * x - x_old

        if k % cfg.check_every and k != cfg.max_iters:
            continue
        value = tv_objective(A, y, D, x, lam)
        if value <= best_value:
            best_x, best_value = x.copy(), value
        history.append(best_value)
        gap = _relative_gap(value, q, c, K_data, K_grad, p, x, a_norm, cfg.nonneg)
        if gap <= cfg.tol_gap:
            return TvResult(image=best_x, lam=lam, iterations=k, relative_gap=gap, converged=True,
                            objective_history=history)

    logger.warning("TV solve reached the iteration cap", iterations=cfg.max_iters, relative_gap=gap)
    return TvResult(image=best_x, lam=lam, iterations=cfg.max_iters, relative_gap=gap, converged=False,
                    objective_history=history)


def _relative_gap(primal: float, q: np.ndarray, c: np.ndarray, K_data, K_grad, p: np.ndarray,
                  x: np.ndarray, a_norm: float, nonneg: bool) -> float:
    # dual of a^2 ||v - c||^2 is <q, c> + ||q||^2 / (4 a^2); the l1 term's conjugate is zero on the clipped box
    dual = -float(q @ c) - float(q @ q) / (4.0 * a_norm ** 2)
    slope = -(K_data.T @ q + K_grad.T @ p)
    box = 2.0 * max(float(np.max(np.abs(x), initial=0.0)), 1.0)
    dual -= box * float(np.maximum(slope, 0.0).sum() if nonneg else np.abs(slope).sum())
    return max(primal - dual, 0.0) / max(abs(primal), 1e-12)


def select_lambda_discrepancy(A: SparseOperator, y: np.ndarray, noise_level: float,
                              lambda_grid: Sequence[float] = TV_LAMBDA_GRID,
                              cfg: Optional[TvConfig] = None,
                              D: Optional[sp.spmatrix] = None) -> Tuple[float, TvResult]:
    """
    Morozov's discrepancy principle over a grid of TV weights.

    Picks the largest grid value whose reconstruction keeps ||A x - y|| within
    DISCREPANCY_FACTOR times the noise level; the smallest grid value when none does.

    Returns:
        The selected weight and its TV result.
    """
    check_positive(noise_level, "noise_level", allow_zero=True)
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ValueError("lambda grid must not be empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be strictly increasing")
    cfg = cfg or TvConfig()
    y = check_vector_length(y, A.rows, "sinogram")
    limit = DISCREPANCY_FACTOR * noise_level

    chosen: Optional[Tuple[float, TvResult]] = None
    for lam in grid:
        result = solve_tv(A, y, D, cfg.model_copy(update={"lam": lam}))
        residual = float(np.linalg.norm(A.matrix @ result.image - y))
        logger.info("Discrepancy check", lam=lam, residual=residual, limit=limit)
        if chosen is None and residual > limit:
            # the residual grows with lam, so no larger weight can pass either
            return lam, result
        if residual > limit:
            break
        chosen = (lam, result)
    return chosen
