# app/services/enumeration_service.py
"""
Exhaustive enumeration of small binary images.

Every n x n image over {-1, +1} is projected with a lattice operator, images
are grouped by their (integer) projection vector, and each group is checked
against the dual reconstruction.
"""

from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from app.config import settings
from app.models.enumeration_model import ClassVerdict, EnumerationSummary, InstanceClassification
from app.models.geometry_model import GridSpec, LatticeGeometry
from app.models.image_model import GreyLevels, TernaryImage
from app.models.operator_model import SparseOperator
from app.models.solver_model import SolverConfig
from app.services.dual_service import (
    certificate_bounds,
    pseudo_inverse_sign,
    recover_primal,
    solve_dual_primal_dual,
)
from app.services.projection_service import build_lattice_operator, has_full_row_rank
from app.utils.constants import LATTICE_DIRECTIONS, MAX_ENUMERATION_N
from app.utils.io import write_rows_csv
from app.utils.logger import get_logger
from app.utils.validators import DimensionMismatchError, EnumerationError, TomographyError

logger = get_logger(__name__)

ENUMERATION_LEVELS = GreyLevels.symmetric()

TABLE_COLUMNS = ["m", "n", "total", "unique", "multiple", "failures"]


def _check_size(n: int) -> None:
    if n < 2:
        raise EnumerationError(f"image side must be >= 2, got {n}")
    if n > MAX_ENUMERATION_N:
        raise EnumerationError(f"enumeration is limited to n <= {MAX_ENUMERATION_N}, got n={n}")


def all_images(n: int) -> np.ndarray:
    """All 2^(n^2) images as rows of +-1 pixels; bit j of the row index is pixel j (row-major)."""
    _check_size(n)
    size = n * n
    codes = np.arange(2 ** size, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(size, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.int8)


def projection_key(projection: np.ndarray) -> bytes:
    """Canonical byte encoding of an integer projection vector."""
    return np.ascontiguousarray(projection, dtype="<i8").tobytes()


def intersection_of(solutions: Sequence[np.ndarray], levels: GreyLevels = ENUMERATION_LEVELS) -> TernaryImage:
    """
    Pixelwise agreement of a set of binary images.

    Pixels on which every solution agrees keep their value; the rest are
    UNDETERMINED.
    """
    if len(solutions) == 0:
        raise EnumerationError("intersection of an empty solution set is undefined")
    stack = np.stack([np.asarray(s, dtype=np.float64) for s in solutions])
    if any(np.shape(s) != stack.shape[1:] for s in solutions):
        raise DimensionMismatchError("solutions must share one shape")
    first = stack[0]
    agree = np.all(stack == first, axis=0)
    values = np.where(agree, first, levels.u0)
    return TernaryImage(values=values, undetermined=~agree, levels=levels, completed=values.copy())


def enumerate_all(n: int, geom: LatticeGeometry) -> Dict[bytes, InstanceClassification]:
    """
    Group every n x n binary image by its lattice projection.

    Args:
        n: Image side, from 2 to ``MAX_ENUMERATION_N``.
        geom: Lattice directions.

    Returns:
        Mapping from projection key to the class of images sharing it, in
        ascending order of the projection vector.
    """
    _check_size(n)
    A = build_lattice_operator(GridSpec(n=n), geom)
    images = all_images(n)
    projections = np.rint(images.astype(np.float64) @ A.toarray().T).astype(np.int64)
    keys, inverse, counts = np.unique(projections, axis=0, return_inverse=True, return_counts=True)
    inverse = np.asarray(inverse).ravel()
    order = np.argsort(inverse, kind="stable")
    groups = np.split(order, np.cumsum(counts)[:-1])

    classes: Dict[bytes, InstanceClassification] = {}
    for projection, members in zip(keys, groups):
        solutions = images[members].reshape(-1, n, n).astype(np.float64)
        key = projection_key(projection)
        classes[key] = InstanceClassification(
            projection_key=key,
            projection=projection,
            solutions=solutions,
            intersection=intersection_of(list(solutions)),
        )
    logger.info("Enumerated binary images", n=n, directions=geom.code, images=len(images), classes=len(classes))
    return classes


def summarize_counts(n: int, geom: LatticeGeometry,
                     classes: Optional[Dict[bytes, InstanceClassification]] = None) -> EnumerationSummary:
    """Unique/multiple image counts without running any solver."""
    classes = classes if classes is not None else enumerate_all(n, geom)
    unique = sum(c.size for c in classes.values() if c.unique)
    total = sum(c.size for c in classes.values())
    return EnumerationSummary(
        n=n, m_dirs=geom.m_dirs, directions=geom.code, total=total,
        unique_count=unique, multiple_count=total - unique, class_count=len(classes),
    )


def _check_class(A: SparseOperator, instance: InstanceClassification, cfg: SolverConfig,
                 project_range: bool, n: int) -> ClassVerdict:
    """Run the dual solve on one projection class and compare with the brute-force answer."""
    y = instance.projection.astype(np.float64)
    pinv_correct = False
    try:
        solution = solve_dual_primal_dual(A, y, ENUMERATION_LEVELS, cfg=cfg, project_range=project_range)
        ternary = recover_primal(solution.nu, ENUMERATION_LEVELS, cfg.zero_threshold, cfg.completion, (n, n),
                                 subgradient=solution.subgradient,
                                 bounds=certificate_bounds(ENUMERATION_LEVELS, cfg.penalty_weight))
        if instance.unique:
            pinv_correct = pseudo_inverse_sign(A, y, ENUMERATION_LEVELS).same_pattern(instance.intersection)
    except TomographyError as exc:
        logger.warning("Dual check failed", size=instance.size, error=str(exc))
        return ClassVerdict(projection_key=instance.projection_key, class_size=instance.size,
                            unique=instance.unique, correct=False, correct_relaxed=False,
                            pinv_correct=False, failed=True, kkt_residual=float("inf"), message=str(exc))

    if instance.unique:
        correct = bool(np.array_equal(ternary.completed, instance.solutions[0]))
    else:
        correct = ternary.same_pattern(instance.intersection)
    relaxed = correct or ternary.agrees_on_decided(instance.intersection)
    failed = not solution.converged
    return ClassVerdict(
        projection_key=instance.projection_key,
        class_size=instance.size,
        unique=instance.unique,
        correct=correct,
        correct_relaxed=relaxed,
        pinv_correct=pinv_correct,
        failed=failed,
        kkt_residual=solution.kkt_residual,
        message="solver did not reach the KKT tolerance" if failed else "",
    )


def select_sample(classes: Dict[bytes, InstanceClassification], sample: int, seed: int,
                  include_multiple: bool = False) -> List[InstanceClassification]:
    """Random subset of ``sample`` classes, optionally with every multiple-solution class added."""
    ordered = list(classes.values())
    rng = np.random.default_rng(seed)
    picked = set(rng.choice(len(ordered), size=min(sample, len(ordered)), replace=False).tolist())
    if include_multiple:
        picked.update(i for i, c in enumerate(ordered) if not c.unique)
    return [ordered[i] for i in sorted(picked)]


def reduce_verdicts(n: int, geom: LatticeGeometry, verdicts: Iterable[ClassVerdict], total: int,
                    sampled: bool = False) -> EnumerationSummary:
    """Fold per-class verdicts into image counts."""
    verdicts = list(verdicts)
    unique = sum(v.class_size for v in verdicts if v.unique)
    covered = sum(v.class_size for v in verdicts)
    return EnumerationSummary(
        n=n,
        m_dirs=geom.m_dirs,
        directions=geom.code,
        total=covered if sampled else total,
        unique_count=unique,
        multiple_count=covered - unique,
        class_count=len(verdicts),
        dual_correct_unique=sum(v.class_size for v in verdicts if v.unique and v.correct),
        dual_correct_multiple=sum(v.class_size for v in verdicts if not v.unique and v.correct),
        dual_correct_multiple_relaxed=sum(v.class_size for v in verdicts if not v.unique and v.correct_relaxed),
        pinv_correct_unique=sum(v.class_size for v in verdicts if v.unique and v.pinv_correct),
        dual_failures=sum(v.class_size for v in verdicts if v.failed),
        verified=True,
        sampled=sampled,
        failed_keys=[str(np.frombuffer(v.projection_key, dtype="<i8").tolist()) for v in verdicts if v.failed],
    )


def verify_dual_conjecture(n: int, geom: LatticeGeometry, solver_cfg: Optional[SolverConfig] = None,
                           sample: Optional[int] = None, include_multiple: bool = False,
                           workers: Optional[int] = None) -> EnumerationSummary:
    """
    Check that the dual recovers the unique solution, or the intersection of
    all solutions, for every projection class.

    Args:
        n: Image side.
        geom: Lattice directions.
        solver_cfg: Solver settings; ``zero_threshold`` decides UNDETERMINED pixels.
        sample: Check only this many randomly chosen classes (seeded by ``solver_cfg.seed``).
        include_multiple: With ``sample``, also check every multiple-solution class.
        workers: Parallel jobs; defaults to ``settings.WORKERS``.

    Returns:
        Summary whose counts are images; with ``sample`` the totals cover the
        checked classes only.
    """
    cfg = solver_cfg or SolverConfig.from_settings()
    classes = enumerate_all(n, geom)
    A = build_lattice_operator(GridSpec(n=n), geom)
    project_range = not has_full_row_rank(A, cfg.dense_threshold, seed=cfg.seed)
    total = 2 ** (n * n)

    todo = list(classes.values())
    if sample is not None:
        todo = select_sample(classes, sample, cfg.seed, include_multiple)
    jobs = workers or settings.WORKERS
    logger.info("Verifying dual recovery", n=n, directions=geom.code, classes=len(todo), workers=jobs,
                range_projected=project_range)

    verdicts = Parallel(n_jobs=jobs)(
        delayed(_check_class)(A, instance, cfg, project_range, n) for instance in todo
    )
    summary = reduce_verdicts(n, geom, verdicts, total, sampled=sample is not None)
    if summary.dual_failures:
        logger.warning("Dual solver failures during verification", failures=summary.dual_failures)
    return summary


# ---------- Shape predicates ----------

def hvd_convexity_check(x: np.ndarray, levels: GreyLevels = ENUMERATION_LEVELS) -> bool:
    """True iff the u1 pixels form an unbroken run on every line of all four lattice directions."""
    image = np.asarray(x)
    if image.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D image, got shape {image.shape}")
    mask = image == levels.u1
    rows, cols = image.shape
    for step in LATTICE_DIRECTIONS.values():
        for line in _lattice_lines(rows, cols, step):
            hits = np.flatnonzero(mask[line])
            if hits.size and hits[-1] - hits[0] + 1 != hits.size:
                return False
    return True


def _lattice_lines(rows: int, cols: int, step: Tuple[int, int]) -> Iterable[Tuple[np.ndarray, np.ndarray]]:
    """Pixel coordinates of every discrete line along ``step``, ordered along the line."""
    r, c = np.indices((rows, cols))
    if step == (0, 1):
        return [(r[i], c[i]) for i in range(rows)]
    if step == (1, 0):
        return [(r[:, j], c[:, j]) for j in range(cols)]
    flip = step == (1, -1)
    grid_r, grid_c = (r, c[:, ::-1]) if flip else (r, c)
    return [(np.diagonal(grid_r, k), np.diagonal(grid_c, k)) for k in range(-(rows - 1), cols)]


# ---------- Dihedral symmetry ----------

DIHEDRAL_TRANSFORMS = {
    "identity": lambda img: img,
    "rot90": lambda img: np.rot90(img, 1),
    "rot180": lambda img: np.rot90(img, 2),
    "rot270": lambda img: np.rot90(img, 3),
    "flip_rows": lambda img: img[::-1, :],
    "flip_cols": lambda img: img[:, ::-1],
    "transpose": lambda img: img.T,
    "antitranspose": lambda img: np.rot90(img, 2).T,
}


def _map_direction(name: str, transform: str) -> str:
    probe = np.zeros((3, 3), dtype=int)
    dr, dc = LATTICE_DIRECTIONS[name]
    probe[1, 1] = 1
    probe[1 + dr, 1 + dc] = 1
    image = DIHEDRAL_TRANSFORMS[transform](probe)
    (r0, c0), (r1, c1) = np.argwhere(image == 1)
    step = (r1 - r0, c1 - c0)
    for key, (sr, sc) in LATTICE_DIRECTIONS.items():
        if step in ((sr, sc), (-sr, -sc)):
            return key
    raise EnumerationError(f"direction {name} has no lattice image under {transform}")


def symmetries_preserving(geom: LatticeGeometry) -> List[str]:
    """Names of the dihedral transforms mapping the direction set onto itself."""
    own = set(geom.code)
    return [t for t in DIHEDRAL_TRANSFORMS if {_map_direction(d, t) for d in own} == own]


def class_size_profile(classes: Dict[bytes, InstanceClassification]) -> Dict[int, int]:
    """Histogram of class sizes: size -> number of classes."""
    sizes, counts = np.unique([c.size for c in classes.values()], return_counts=True)
    return dict(zip(sizes.tolist(), counts.tolist()))


def transformed_size_profile(n: int, geom: LatticeGeometry, transform: str) -> Dict[int, int]:
    """Class-size histogram after applying ``transform`` to every image before projection."""
    A = build_lattice_operator(GridSpec(n=n), geom).toarray()
    images = all_images(n).reshape(-1, n, n)
    moved = np.stack([DIHEDRAL_TRANSFORMS[transform](img) for img in images]).reshape(len(images), -1)
    projections = np.rint(moved.astype(np.float64) @ A.T).astype(np.int64)
    _, counts = np.unique(projections, axis=0, return_counts=True)
    sizes, hist = np.unique(counts, return_counts=True)
    return dict(zip(sizes.tolist(), hist.tolist()))


# ---------- Reporting ----------

def write_summary_csv(summaries: Sequence[EnumerationSummary], path: str) -> None:
    """Table of m, n, total, unique, multiple and failures, one row per summary."""
    write_rows_csv(path, [summary.table_row() for summary in summaries], TABLE_COLUMNS)


class EnumerationService:
    """Service front end for counts and verification runs."""

    def __init__(self, max_n: int = MAX_ENUMERATION_N):
        self.max_n = max_n

    def run(self, n: int, directions: str, mode: str = "counts", cfg: Optional[SolverConfig] = None,
            sample: Optional[int] = None, workers: Optional[int] = None) -> EnumerationSummary:
        """
        Run an enumeration in ``counts`` or ``verify`` mode.

        Args:
            n: Image side.
            directions: Direction code such as ``"hvd"``.
            mode: ``counts`` or ``verify``.
            cfg: Solver settings for ``verify``.
            sample: Optional class sample size for ``verify``.
            workers: Parallel jobs for ``verify``.
        """
        if n > self.max_n:
            raise EnumerationError(f"enumeration is limited to n <= {self.max_n} here, got n={n}")
        geom = LatticeGeometry.from_code(directions)
        if mode == "counts":
            return summarize_counts(n, geom)
        if mode == "verify":
            return verify_dual_conjecture(n, geom, cfg, sample=sample,
                                          include_multiple=sample is not None and geom.m_dirs == 4, workers=workers)
        raise EnumerationError(f"unknown enumeration mode {mode!r}; use 'counts' or 'verify'")


enumeration_service = EnumerationService()
