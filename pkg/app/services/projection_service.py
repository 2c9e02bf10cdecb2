"""
Projection operators: lattice-direction sums and parallel-beam ray transforms,
forward/adjoint application and the orthogonal projector onto range(A).
"""

import math
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsqr

from app.config import settings
from app.models.geometry_model import GridSpec, Kernel, LatticeGeometry, ParallelGeometry
from app.models.operator_model import SparseOperator
from app.utils.constants import POWER_ITERATIONS, RANK_PROBE_TOLERANCE
from app.utils.logger import get_logger
from app.utils.validators import GeometryError, SolverError, check_vector_length

logger = get_logger(__name__)


# ---------- Lattice directions ----------

def _line_index(direction, rows: np.ndarray, cols: np.ndarray, n: int) -> tuple:
    """Line index of every pixel along ``direction`` and the number of lines."""
    if direction == (0, 1):
        return rows, n
    if direction == (1, 0):
        return cols, n
    if direction == (1, 1):
        return rows + cols, 2 * n - 1
    if direction == (1, -1):
        return rows - cols + (n - 1), 2 * n - 1
    raise GeometryError(f"unsupported lattice direction {direction}")


def build_lattice_operator(grid: GridSpec, geom: LatticeGeometry) -> SparseOperator:
    """
    Build the 0/1 operator summing pixels along discrete lattice lines.

    Rows are grouped per direction in h, v, d, a order; within a direction the
    lines are ordered by row, column, row+col and row-col+n-1 respectively.

    Args:
        grid: The image grid.
        geom: Lattice directions.

    Returns:
        SparseOperator with one row per discrete line.
    """
    n = grid.n
    pixel = np.arange(grid.N)
    rows, cols = np.divmod(pixel, n)

    row_blocks, col_blocks = [], []
    offset = 0
    for direction in geom.directions:
        line, count = _line_index(tuple(direction), rows, cols, n)
        row_blocks.append(line + offset)
        col_blocks.append(pixel)
        offset += count

    row_idx = np.concatenate(row_blocks)
    col_idx = np.concatenate(col_blocks)
    matrix = sp.csr_matrix(
        (np.ones(row_idx.size), (row_idx, col_idx)), shape=(offset, grid.N)
    )
    logger.info("Built lattice operator", n=n, directions=geom.code, rows=offset)
    return SparseOperator(matrix=matrix, grid=grid, label=f"lattice-{geom.code}")


# ---------- Parallel beam ----------

def _pixel_centers(grid: GridSpec) -> tuple:
    """Pixel centres with x to the right and y downwards, origin at the grid centre."""
    n, h = grid.n, grid.pixel_size
    offsets = (np.arange(n) - (n - 1) / 2.0) * h
    cy, cx = np.meshgrid(offsets, offsets, indexing="ij")
    return cx.ravel(), cy.ravel()


def _detector_centers(geom: ParallelGeometry) -> np.ndarray:
    return (np.arange(geom.detector_count) - (geom.detector_count - 1) / 2.0) * geom.detector_spacing


def _joseph_rays(grid: GridSpec, theta: float, s: np.ndarray) -> tuple:
    """
    Joseph interpolation for all detector positions ``s`` at one angle.

    Marches along the dominant axis of the ray direction (-sin, cos) and splits
    each slab crossing linearly between the two straddling pixels.
    """
    n, h = grid.n, grid.pixel_size
    c, si = math.cos(theta), math.sin(theta)
    offsets = (np.arange(n) - (n - 1) / 2.0) * h
    ray = np.repeat(np.arange(s.size), n)
    slab = np.tile(np.arange(n), s.size)
    s_rep = s[ray]
    pos = offsets[slab]

    if abs(c) >= abs(si):
        # one sample per pixel row: y fixed, solve for x
        t = (pos - s_rep * si) / c
        transverse = s_rep * c - t * si
        scale = h / abs(c)
    else:
        # one sample per pixel column: x fixed, solve for y
        t = (s_rep * c - pos) / si
        transverse = s_rep * si + t * c
        scale = h / abs(si)

    u = transverse / h + (n - 1) / 2.0
    # snap round-off so axis-aligned rays hit pixel centres exactly
    nearest = np.round(u)
    u = np.where(np.abs(u - nearest) < 1e-9, nearest, u)
    lower = np.floor(u).astype(np.int64)
    frac = u - lower

    rays_out, pix_out, val_out = [], [], []
    for idx, weight in ((lower, 1.0 - frac), (lower + 1, frac)):
        keep = (idx >= 0) & (idx < n) & (weight > 0)
        if abs(c) >= abs(si):
            pixels = slab[keep] * n + idx[keep]
        else:
            pixels = idx[keep] * n + slab[keep]
        rays_out.append(ray[keep])
        pix_out.append(pixels)
        val_out.append(weight[keep] * scale)
    return np.concatenate(rays_out), np.concatenate(pix_out), np.concatenate(val_out)


def _uniform_sum_cdf(u: np.ndarray, a: float, b: float) -> np.ndarray:
    """CDF of U(-a/2, a/2) + U(-b/2, b/2) evaluated at ``u`` (a >= b >= 0)."""
    if b <= 1e-12 * max(a, 1.0):
        return np.clip((u + a / 2.0) / a, 0.0, 1.0)
    w = u + (a + b) / 2.0
    out = np.zeros_like(w)
    rising = (w > 0) & (w <= b)
    flat = (w > b) & (w <= a)
    falling = (w > a) & (w < a + b)
    out[rising] = w[rising] ** 2 / (2 * a * b)
    out[flat] = (w[flat] - b / 2.0) / a
    out[falling] = 1.0 - (a + b - w[falling]) ** 2 / (2 * a * b)
    out[w >= a + b] = 1.0
    return out


def _strip_rays(grid: GridSpec, geom: ParallelGeometry, theta: float, s: np.ndarray) -> tuple:
    """Exact pixel/strip overlap areas divided by the detector spacing."""
    h, spacing = grid.pixel_size, geom.detector_spacing
    c, si = math.cos(theta), math.sin(theta)
    cx, cy = _pixel_centers(grid)
    center = cx * c + cy * si
    a, b = sorted((h * abs(c), h * abs(si)), reverse=True)
    half_support = (a + b) / 2.0

    first = np.ceil((center - half_support - spacing / 2.0 - s[0]) / spacing).astype(np.int64)
    span = int(math.ceil((a + b) / spacing)) + 2
    pixel = np.arange(grid.N)

    rays_out, pix_out, val_out = [], [], []
    for k in range(span):
        det = first + k
        keep = (det >= 0) & (det < s.size)
        d_idx, p_idx = det[keep], pixel[keep]
        lo = s[d_idx] - spacing / 2.0 - center[keep]
        hi = s[d_idx] + spacing / 2.0 - center[keep]
        area = h * h * (_uniform_sum_cdf(hi, a, b) - _uniform_sum_cdf(lo, a, b))
        nonzero = area > 1e-15
        rays_out.append(d_idx[nonzero])
        pix_out.append(p_idx[nonzero])
        val_out.append(area[nonzero] / spacing)
    return np.concatenate(rays_out), np.concatenate(pix_out), np.concatenate(val_out)


def build_parallel_operator(grid: GridSpec, geom: ParallelGeometry) -> SparseOperator:
    """
    Build a parallel-beam ray transform.

    Row ``k * detector_count + j`` holds detector cell j at angle k. Rays that
    miss the grid stay as zero rows so the sinogram keeps its shape.

    Args:
        grid: The image grid.
        geom: Angles, detector layout and kernel.

    Returns:
        SparseOperator with ``len(angles) * detector_count`` rows.
    """
    if not geom.detector_spacing > 0:
        raise GeometryError(f"detector spacing must be positive, got {geom.detector_spacing}")
    s = _detector_centers(geom)

    row_blocks, col_blocks, val_blocks = [], [], []
    for k, theta in enumerate(geom.angles):
        if geom.kernel == Kernel.JOSEPH:
            rays, pixels, values = _joseph_rays(grid, theta, s)
        else:
            rays, pixels, values = _strip_rays(grid, geom, theta, s)
        row_blocks.append(rays + k * geom.detector_count)
        col_blocks.append(pixels)
        val_blocks.append(values)

    matrix = sp.coo_matrix(
        (np.concatenate(val_blocks), (np.concatenate(row_blocks), np.concatenate(col_blocks))),
        shape=(geom.rows, grid.N),
    ).tocsr()
    logger.info(
        "Built parallel-beam operator",
        n=grid.n, angles=len(geom.angles), detectors=geom.detector_count,
        kernel=geom.kernel.value, nnz=matrix.nnz,
    )
    return SparseOperator(matrix=matrix, grid=grid, label=f"parallel-{geom.kernel.value}")


# ---------- Application ----------

def apply_forward(A: SparseOperator, x: np.ndarray) -> np.ndarray:
    """y = A x."""
    x = check_vector_length(x, A.cols, "image")
    return A.matrix @ x


def apply_adjoint(A: SparseOperator, r: np.ndarray) -> np.ndarray:
    """A^T r, the back projection of ``r``."""
    r = check_vector_length(r, A.rows, "sinogram")
    return A.matrix.T @ r


def estimate_operator_norm(A: SparseOperator, iterations: int = POWER_ITERATIONS, seed: int = 0) -> float:
    """Spectral norm of A from power iterations on A^T A, padded by 1% so step rules stay safe."""
    def _estimate() -> float:
        if A.nnz == 0:
            return 0.0
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(A.cols)
        v /= np.linalg.norm(v)
        sigma = 0.0
        for _ in range(iterations):
            w = A.matrix.T @ (A.matrix @ v)
            sigma = float(np.linalg.norm(w))
            if sigma == 0.0:
                break
            v = w / sigma
        return 1.01 * math.sqrt(sigma)

    return A.cached(f"norm:{iterations}:{seed}", _estimate)


# ---------- Range projection ----------

class RangeProjector:
    """
    Orthogonal projector P = A A^+ onto range(A).

    Small operators use a thin SVD basis; larger ones solve min ||A z - r||
    with LSQR and return A z.
    """

    def __init__(self, A: SparseOperator, dense_threshold: Optional[int] = None,
                 tol: float = 1e-12, max_iters: Optional[int] = None):
        self.A = A
        self.dense_threshold = settings.DENSE_THRESHOLD if dense_threshold is None else dense_threshold
        self.tol = tol
        self.max_iters = max_iters or max(10 * A.cols, 1000)
        self.dense = A.rows * A.cols <= self.dense_threshold
        self.basis: Optional[np.ndarray] = None
        if self.dense:
            self.basis = self._range_basis(A.toarray())

    @staticmethod
    def _range_basis(matrix: np.ndarray) -> np.ndarray:
        if matrix.size == 0:
            return np.zeros((matrix.shape[0], 0))
        u, s, _ = np.linalg.svd(matrix, full_matrices=False)
        cutoff = s[0] * max(matrix.shape) * np.finfo(float).eps if s.size else 0.0
        rank = int(np.sum(s > cutoff))
        return u[:, :rank]

    @property
    def rank(self) -> Optional[int]:
        return None if self.basis is None else int(self.basis.shape[1])

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = check_vector_length(r, self.A.rows, "range vector")
        if self.basis is not None:
            return self.basis @ (self.basis.T @ r)
        result = lsqr(self.A.matrix, r, atol=self.tol, btol=self.tol, iter_lim=self.max_iters)
        z, istop = result[0], result[1]
        if istop == 7:
            logger.error("LSQR range projection hit its iteration cap", iterations=result[2])
            raise SolverError("range projection did not converge; the operator is ill-conditioned")
        return self.A.matrix @ z

    @classmethod
    def for_operator(cls, A: SparseOperator, dense_threshold: Optional[int] = None) -> "RangeProjector":
        threshold = settings.DENSE_THRESHOLD if dense_threshold is None else dense_threshold
        return A.cached(f"range:{threshold}", lambda: cls(A, dense_threshold=threshold))


def project_onto_range(A: SparseOperator, r: np.ndarray, dense_threshold: Optional[int] = None) -> np.ndarray:
    """Apply the orthogonal projector A A^+ to ``r``."""
    return RangeProjector.for_operator(A, dense_threshold)(r)


def has_full_row_rank(A: SparseOperator, dense_threshold: Optional[int] = None, seed: int = 0,
                      probes: int = 2) -> bool:
    """
    Probe whether range(A) is all of R^m.

    Random vectors are projected onto range(A); a relative residual above
    the probe tolerance means some direction is missing.
    """
    if A.rows > A.cols:
        return False

    def _probe() -> bool:
        projector = RangeProjector.for_operator(A, dense_threshold)
        rng = np.random.default_rng(seed)
        for _ in range(probes):
            r = rng.standard_normal(A.rows)
            if np.linalg.norm(r - projector(r)) > RANK_PROBE_TOLERANCE * np.linalg.norm(r):
                return False
        return True

    return A.cached(f"full-row-rank:{dense_threshold}:{seed}:{probes}", _probe)


def has_full_column_rank(A: SparseOperator, dense_threshold: Optional[int] = None) -> bool:
    """Whether A^T A is invertible, judged from the singular values of A."""
    threshold = settings.DENSE_THRESHOLD if dense_threshold is None else dense_threshold
    if A.rows < A.cols:
        return False

    def _check() -> bool:
        if A.rows * A.cols <= threshold:
            s = np.linalg.svd(A.toarray(), compute_uv=False)
            return bool(s.size == A.cols and s[0] > 0 and s[-1] > s[0] * 1e-10)
        acond = lsqr(A.matrix, np.ones(A.rows), iter_lim=max(10 * A.cols, 1000))[6]
        return bool(np.isfinite(acond) and acond < 1e10)

    return A.cached(f"full-column-rank:{threshold}", _check)
