"""
Dual formulation of binary tomography and its solvers.

The constrained least-squares problem over {u0, u1}^N is replaced by its
Lagrange dual, a generalized LASSO in the data-space variable mu:

    min_mu  1/2 ||mu - y||^2 + p(A^T mu),
    p(nu) = sum |u0| max(-nu_i, 0) + |u1| max(nu_i, 0),

and the image is read off the sign pattern of nu = A^T mu. Weights Lambda
enter by replacing A with Lambda^(1/2) A and y with Lambda^(1/2) y; a
rank-deficient A replaces y with its projection onto range(A).
"""

import math
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import lsq_linear, minimize

from app.models.image_model import Completion, GreyLevels, TernaryImage
from app.models.operator_model import Sinogram, SparseOperator
from app.models.solver_model import DualSolution, SolverConfig
from app.services.projection_service import (
    RangeProjector,
    estimate_operator_norm,
    has_full_column_rank,
    has_full_row_rank,
)
from app.utils.constants import ATTENUATION_PEAK, MAX_ATTENUATION, SIDE_TOLERANCE
from app.utils.logger import get_logger
from app.utils.validators import SolverError, check_positive, check_vector_length

logger = get_logger(__name__)


# ---------- Proximal maps ----------

def soft_threshold(t, tau: float):
    """S_tau(t) = max(|t| - tau, 0) sign(t), componentwise."""
    if tau < 0:
        raise ValueError(f"threshold must be >= 0, got {tau}")
    out = np.sign(t) * np.maximum(np.abs(t) - tau, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def asym_soft_threshold(t, a, b):
    """
    Prox of the asymmetric one-norm a*max(-x, 0) + b*max(x, 0).

    t - b for t >= b, t + a for t <= -a, 0 in between. The thresholds may be
    arrays broadcasting against ``t``.
    """
    if np.any(np.asarray(a) < 0) or np.any(np.asarray(b) < 0):
        raise ValueError(f"thresholds must be >= 0, got ({a}, {b})")
    t_arr = np.asarray(t, dtype=np.float64)
    out = np.where(t_arr >= b, t_arr - b, np.where(t_arr <= -a, t_arr + a, 0.0))
    return float(out) if np.ndim(out) == 0 else out


def asymmetric_penalty(nu: np.ndarray, levels: GreyLevels, weight: float = 1.0) -> float:
    """p(nu) = sum |u0| max(-nu, 0) + |u1| max(nu, 0), scaled by ``weight``."""
    nu = np.asarray(nu, dtype=np.float64)
    return float(weight * (
        levels.lower_slope * np.maximum(-nu, 0.0).sum() + levels.upper_slope * np.maximum(nu, 0.0).sum()
    ))


def _slopes(levels: GreyLevels, weight: float) -> Tuple[float, float]:
    return weight * levels.lower_slope, weight * levels.upper_slope


# ---------- Objectives ----------

def effective_problem(A: SparseOperator, y: np.ndarray,
                      weights: Optional[np.ndarray] = None) -> Tuple[SparseOperator, np.ndarray]:
    """Fold Lambda^(1/2) into the operator rows and the data."""
    y = check_vector_length(y, A.rows, "sinogram")
    if weights is None:
        return A, y
    weights = check_vector_length(weights, A.rows, "weights")
    if np.any(weights <= 0):
        raise ValueError("weights must be strictly positive")
    root = np.sqrt(weights)
    return A.row_scaled(root), root * y


def eval_dual_terms(A: SparseOperator, y: np.ndarray, mu: np.ndarray, levels: GreyLevels,
                    weights: Optional[np.ndarray] = None, penalty_weight: float = 1.0) -> Tuple[float, float]:
    """Return (1/2 ||mu - Lambda^(1/2) y||^2, p(A^T Lambda^(1/2) mu))."""
    B, y_eff = effective_problem(A, y, weights)
    mu = check_vector_length(mu, A.rows, "mu")
    data = 0.5 * float(np.dot(mu - y_eff, mu - y_eff))
    penalty = asymmetric_penalty(B.matrix.T @ mu, levels, penalty_weight)
    return data, penalty


def eval_dual_objective(A: SparseOperator, y: np.ndarray, mu: np.ndarray, levels: GreyLevels,
                        weights: Optional[np.ndarray] = None, penalty_weight: float = 1.0) -> float:
    """Simplified dual objective 1/2 ||mu - y||^2 + p(A^T mu) (weighted form when ``weights`` given)."""
    data, penalty = eval_dual_terms(A, y, mu, levels, weights, penalty_weight)
    return data + penalty


def smoothed_penalty(nu: np.ndarray, epsilon: float, levels: GreyLevels, weight: float = 1.0) -> Tuple[float, np.ndarray]:
    """
    Smoothed asymmetric one-norm and its derivative.

    |t| becomes sqrt(t^2 + eps) and max(+-t, 0) becomes (sqrt(t^2 + eps) +- t) / 2,
    so symmetric levels give exactly sum sqrt(nu^2 + eps).
    """
    a, b = _slopes(levels, weight)
    root = np.sqrt(nu * nu + epsilon)
    if a == b:
        return float(a * root.sum()), a * nu / root
    value = 0.5 * (b * (root + nu) + a * (root - nu)).sum()
    derivative = 0.5 * (b * (nu / root + 1.0) + a * (nu / root - 1.0))
    return float(value), derivative


def smoothed_objective(A: SparseOperator, y: np.ndarray, mu: np.ndarray, epsilon: float, levels: GreyLevels,
                       weights: Optional[np.ndarray] = None, penalty_weight: float = 1.0) -> float:
    B, y_eff = effective_problem(A, y, weights)
    mu = check_vector_length(mu, A.rows, "mu")
    value, _ = smoothed_penalty(B.matrix.T @ mu, epsilon, levels, penalty_weight)
    return 0.5 * float(np.dot(mu - y_eff, mu - y_eff)) + value


def grad_smoothed_objective(A: SparseOperator, y: np.ndarray, mu: np.ndarray, epsilon: float, levels: GreyLevels,
                            weights: Optional[np.ndarray] = None, penalty_weight: float = 1.0) -> np.ndarray:
    """Gradient (mu - y) + A s with s the derivative of the smoothed penalty at A^T mu."""
    check_positive(epsilon, "epsilon")
    B, y_eff = effective_problem(A, y, weights)
    mu = check_vector_length(mu, A.rows, "mu")
    _, derivative = smoothed_penalty(B.matrix.T @ mu, epsilon, levels, penalty_weight)
    return (mu - y_eff) + B.matrix @ derivative


# ---------- Optimality certificate ----------

def kkt_residual(B: SparseOperator, y_eff: np.ndarray, mu: np.ndarray, nu: np.ndarray, subgradient: np.ndarray,
                 levels: GreyLevels, penalty_weight: float = 1.0) -> float:
    """
    Infinity-norm residual of the generalized-LASSO optimality conditions.

    Stationarity mu - y + B z = 0 and z in the subdifferential of p at nu,
    the latter measured as nu - prox_p(nu + z), which vanishes exactly when
    the inclusion holds.
    """
    a, b = _slopes(levels, penalty_weight)
    stationarity = mu - y_eff + B.matrix @ subgradient
    inclusion = nu - asym_soft_threshold(nu + subgradient, a, b)
    return float(max(np.max(np.abs(stationarity), initial=0.0), np.max(np.abs(inclusion), initial=0.0)))


def _gap(B: SparseOperator, y_eff: np.ndarray, mu: np.ndarray, nu: np.ndarray, z: np.ndarray,
         levels: GreyLevels, weight: float) -> Tuple[float, float, float]:
    """Primal-dual gap of the saddle problem, plus the data and penalty terms at mu."""
    data = 0.5 * float(np.dot(mu - y_eff, mu - y_eff))
    penalty = asymmetric_penalty(nu, levels, weight)
    bz = B.matrix @ z
    dual = float(np.dot(y_eff, bz)) - 0.5 * float(np.dot(bz, bz))
    return max(data + penalty - dual, 0.0), data, penalty


# ---------- Support polishing ----------

def _polish(B: SparseOperator, y_eff: np.ndarray, mu: np.ndarray, levels: GreyLevels,
            weight: float) -> Optional[Tuple[np.ndarray, np.ndarray, float]]:
    """
    Solve exactly on the face picked out by the sign pattern of A^T mu.

    With the positive/negative sets frozen, mu is the projection of
    y - B_S z_S onto the null space of B_Z^T; the zero-set subgradient is fit by
    bounded least squares. Returns (mu, z, residual) for the best face tried.
    """
    a, b = _slopes(levels, weight)
    if a == 0.0 and b == 0.0:
        return None
    dense = B.toarray()
    nu = dense.T @ mu
    scale = max(1.0, float(np.max(np.abs(nu), initial=0.0)))
    best = None
    for relative in (1e-7, 1e-5, 1e-3, 1e-2, 3e-2):
        delta = relative * scale
        pos, neg = nu > delta, nu < -delta
        zero = ~(pos | neg)
        z = np.zeros(B.cols)
        z[pos], z[neg] = b, -a
        target = y_eff - dense @ z
        if zero.any():
            cols = dense[:, zero]
            coef = np.linalg.lstsq(cols, target, rcond=None)[0]
            mu_face = target - cols @ coef
        else:
            mu_face = target
        nu_face = dense.T @ mu_face
        if np.any(nu_face[pos] <= 0) or np.any(nu_face[neg] >= 0):
            continue
        if zero.any():
            fit = lsq_linear(dense[:, zero], target - mu_face, bounds=(-a, b), method="bvls")
            z[zero] = fit.x
        residual = kkt_residual(B, y_eff, mu_face, nu_face, z, levels, weight)
        if best is None or residual < best[2]:
            best = (mu_face, z, residual)
    return best


# ---------- Solvers ----------

def _prepare(A: SparseOperator, y: np.ndarray, weights: Optional[np.ndarray], cfg: SolverConfig,
             project_range: Optional[bool]) -> Tuple[SparseOperator, np.ndarray, str]:
    B, y_eff = effective_problem(A, y, weights)
    if project_range is None:
        # positive row weights leave the row rank unchanged
        project_range = not has_full_row_rank(A, cfg.dense_threshold, seed=cfg.seed)
    if project_range:
        y_eff = RangeProjector.for_operator(B, cfg.dense_threshold)(y_eff)
        return B, y_eff, "range-projected"
    return B, y_eff, "full-row-rank"


def solve_dual_primal_dual(A: SparseOperator, y: np.ndarray, levels: Optional[GreyLevels] = None,
                           weights: Optional[np.ndarray] = None, cfg: Optional[SolverConfig] = None,
                           project_range: Optional[bool] = None) -> DualSolution:
    """
    Solve the dual with the accelerated primal-dual (Chambolle-Pock) iteration.

    G(mu) = 1/2 ||mu - y||^2 is 1-strongly convex, so the step sizes follow
    the accelerated schedule starting from tau = sigma = 1/||A||. The dual
    variable z stays in the box [-|u0|, |u1|], the conjugate domain of p.

    Args:
        A: Projection operator.
        y: Sinogram values.
        levels: Grey levels, (-1, 1) when omitted.
        weights: Optional per-ray weights Lambda.
        cfg: Solver settings.
        project_range: Force (True) or skip (False) the range projection of y;
            detected with a rank probe when None.

    Returns:
        DualSolution; ``converged`` is False when the iteration cap was hit.
    """
    levels = levels or GreyLevels.symmetric()
    cfg = cfg or SolverConfig.from_settings()
    B, y_eff, branch = _prepare(A, y, weights, cfg, project_range)
    a, b = _slopes(levels, cfg.penalty_weight)
    can_polish = cfg.polish and B.rows * B.cols <= cfg.dense_threshold

    norm = cfg.operator_norm or estimate_operator_norm(B, seed=cfg.seed)
    logger.info("Primal-dual dual solve", rows=B.rows, cols=B.cols, branch=branch, norm=round(norm, 6))

    mu = np.zeros(B.rows)
    z = np.zeros(B.cols)
    if norm == 0.0:
        mu = y_eff.copy()
        nu = B.matrix.T @ mu
        return _finish(B, y_eff, mu, nu, z, levels, cfg, 0, True, False, branch, [])

    tau = sigma = 1.0 / norm
    mu_bar = mu.copy()
    best = None
    history: List[float] = []
    # polish when the residual halves or the iteration count doubles since the last attempt
    last_polish, last_polish_k = math.inf, 0

    for k in range(1, cfg.primal_dual_max_iters + 1):
        z = np.clip(z + sigma * (B.matrix.T @ mu_bar), -a, b)
        mu_next = (mu - tau * (B.matrix @ z) + tau * y_eff) / (1.0 + tau)
        theta = 1.0 / math.sqrt(1.0 + 2.0 * tau)
        tau, sigma = theta * tau, sigma / theta
        mu_bar = mu_next + theta * (mu_next - mu)
        mu = mu_next

        if k % cfg.check_every and k != cfg.primal_dual_max_iters:
            continue
        nu = B.matrix.T @ mu
        residual = kkt_residual(B, y_eff, mu, nu, z, levels, cfg.penalty_weight)
        gap, data, penalty = _gap(B, y_eff, mu, nu, z, levels, cfg.penalty_weight)
        history.append(data + penalty)
        if best is None or residual < best[0]:
            best = (residual, mu.copy(), z.copy())
        if residual <= cfg.tol_kkt and gap <= cfg.tol_kkt * (1.0 + abs(data + penalty)):
            return _finish(B, y_eff, mu, nu, z, levels, cfg, k, True, False, branch, history)
        due = residual < 0.5 * last_polish or k >= 2 * last_polish_k
        if can_polish and residual <= cfg.polish_trigger and due:
            last_polish, last_polish_k = residual, k
            polished = _try_polish(B, y_eff, mu, levels, cfg)
            if polished is not None:
                mu_p, z_p = polished
                return _finish(B, y_eff, mu_p, B.matrix.T @ mu_p, z_p, levels, cfg, k, True, True, branch, history)

    _, mu, z = best
    if can_polish:
        for candidate in (mu, mu_next):
            polished = _try_polish(B, y_eff, candidate, levels, cfg)
            if polished is not None:
                mu_p, z_p = polished
                return _finish(B, y_eff, mu_p, B.matrix.T @ mu_p, z_p, levels, cfg, cfg.primal_dual_max_iters,
                               True, True, branch, history)
    logger.warning("Primal-dual solve reached the iteration cap", iterations=cfg.primal_dual_max_iters,
                   kkt=best[0])
    return _finish(B, y_eff, mu, B.matrix.T @ mu, z, levels, cfg, cfg.primal_dual_max_iters, False, False,
                   branch, history)


def _try_polish(B: SparseOperator, y_eff: np.ndarray, mu: np.ndarray, levels: GreyLevels,
                cfg: SolverConfig) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Polished (mu, z) when the face solution is certified to ``tol_kkt``."""
    polished = _polish(B, y_eff, mu, levels, cfg.penalty_weight)
    if polished is None or polished[2] > cfg.tol_kkt:
        return None
    mu_p, z_p, _ = polished
    gap, data, penalty = _gap(B, y_eff, mu_p, B.matrix.T @ mu_p, z_p, levels, cfg.penalty_weight)
    if gap > cfg.tol_kkt * (1.0 + abs(data + penalty)):
        return None
    return mu_p, z_p


def _finish(B, y_eff, mu, nu, z, levels, cfg, iterations, converged, polished, branch, history) -> DualSolution:
    residual = kkt_residual(B, y_eff, mu, nu, z, levels, cfg.penalty_weight)
    gap, data, penalty = _gap(B, y_eff, mu, nu, z, levels, cfg.penalty_weight)
    return DualSolution(
        mu=mu, nu=nu, subgradient=z, y_effective=y_eff,
        objective_value=data + penalty, data_term=data, penalty_term=penalty,
        kkt_residual=residual, gap=gap, iterations=iterations, converged=converged,
        polished=polished, branch=branch, objective_history=history,
    )


def solve_dual_smoothed(A: SparseOperator, y: np.ndarray, levels: Optional[GreyLevels] = None,
                        weights: Optional[np.ndarray] = None, cfg: Optional[SolverConfig] = None,
                        project_range: Optional[bool] = None) -> DualSolution:
    """
    Minimise the smoothed dual with L-BFGS.

    The one-norm is replaced by sqrt(t^2 + eps) with a fixed eps; the reported
    ``kkt_residual`` is the Euclidean norm of the smoothed gradient and
    ``subgradient`` holds the smoothed penalty derivative.
    """
    levels = levels or GreyLevels.symmetric()
    cfg = cfg or SolverConfig.from_settings()
    B, y_eff, branch = _prepare(A, y, weights, cfg, project_range)
    eps = cfg.smoothing_epsilon
    target = cfg.tol_kkt * (1.0 + float(np.linalg.norm(y_eff)))
    logger.info("Smoothed dual solve", rows=B.rows, cols=B.cols, epsilon=eps, branch=branch)

    def fun(mu: np.ndarray):
        value, derivative = smoothed_penalty(B.matrix.T @ mu, eps, levels, cfg.penalty_weight)
        residual = mu - y_eff
        return 0.5 * float(np.dot(residual, residual)) + value, residual + B.matrix @ derivative

    result = minimize(
        fun, np.zeros(B.rows), jac=True, method="L-BFGS-B",
        options={"maxiter": cfg.max_iters, "gtol": target / math.sqrt(max(B.rows, 1)), "ftol": 1e-15, "maxcor": 20},
    )
    mu = result.x
    nu = B.matrix.T @ mu
    _, derivative = smoothed_penalty(nu, eps, levels, cfg.penalty_weight)
    grad = (mu - y_eff) + B.matrix @ derivative
    grad_norm = float(np.linalg.norm(grad))
    converged = grad_norm <= target
    if not converged:
        logger.warning("Smoothed solve did not reach the gradient tolerance",
                       grad_norm=grad_norm, target=target, message=str(result.message))
    data = 0.5 * float(np.dot(mu - y_eff, mu - y_eff))
    penalty = asymmetric_penalty(nu, levels, cfg.penalty_weight)
    return DualSolution(
        mu=mu, nu=nu, subgradient=derivative, y_effective=y_eff,
        objective_value=data + penalty, data_term=data, penalty_term=penalty,
        kkt_residual=grad_norm, iterations=int(result.nit), converged=converged,
        branch=f"smoothed/{branch}",
    )


def prox_gradient_invertible(A: SparseOperator, y: np.ndarray, cfg: Optional[SolverConfig] = None,
                             levels: Optional[GreyLevels] = None,
                             weights: Optional[np.ndarray] = None) -> DualSolution:
    """
    Iterative shrinkage on the image-space dual for A with invertible A^T A.

    nu_{k+1} = S_{1/L}(nu_k - L^{-1} (A^T A)^{-1} (nu_k - A^T y)),
    L = ||(A^T A)^{-1}||, starting at nu_0 = 0 so the first iterate is a
    thresholded pseudo-inverse reconstruction.
    """
    levels = levels or GreyLevels.symmetric()
    cfg = cfg or SolverConfig.from_settings()
    B, y_eff = effective_problem(A, y, weights)
    if not has_full_column_rank(B, cfg.dense_threshold):
        raise SolverError("prox_gradient_invertible needs A^T A invertible (square, nonsingular A)")

    dense = B.toarray()
    gram = dense.T @ dense
    factor = cho_factor(gram)
    lipschitz = 1.0 / float(np.linalg.eigvalsh(gram)[0])
    a, b = _slopes(levels, cfg.penalty_weight)
    backprojection = dense.T @ y_eff
    projected_y = dense @ cho_solve(factor, backprojection)
    logger.info("Proximal-gradient dual solve", size=B.cols, lipschitz=lipschitz)

    def objective(nu: np.ndarray, direction: np.ndarray) -> float:
        return 0.5 * float(np.dot(nu - backprojection, direction)) + asymmetric_penalty(nu, levels, cfg.penalty_weight)

    nu = np.zeros(B.cols)
    direction = cho_solve(factor, nu - backprojection)
    history = [objective(nu, direction)]
    converged = False
    iterations = 0
    for iterations in range(1, cfg.primal_dual_max_iters + 1):
        nu = asym_soft_threshold(nu - direction / lipschitz, a / lipschitz, b / lipschitz)
        direction = cho_solve(factor, nu - backprojection)
        history.append(objective(nu, direction))
        inclusion = nu - asym_soft_threshold(nu - direction, a, b)
        if np.max(np.abs(inclusion), initial=0.0) <= cfg.tol_kkt:
            converged = True
            break
    if not converged:
        logger.warning("Proximal-gradient solve reached the iteration cap", iterations=iterations)

    mu = dense @ cho_solve(factor, nu)
    z = -direction
    nu_mu = B.matrix.T @ mu
    residual = kkt_residual(B, projected_y, mu, nu_mu, z, levels, cfg.penalty_weight)
    data = 0.5 * float(np.dot(mu - projected_y, mu - projected_y))
    penalty = asymmetric_penalty(nu_mu, levels, cfg.penalty_weight)
    return DualSolution(
        mu=mu, nu=nu_mu, subgradient=z, y_effective=projected_y,
        objective_value=data + penalty, data_term=data, penalty_term=penalty,
        kkt_residual=residual, iterations=iterations, converged=converged,
        branch="invertible", objective_history=history,
    )


# ---------- Primal recovery ----------

def _square_shape(size: int) -> Tuple[int, ...]:
    side = int(round(math.sqrt(size)))
    return (side, side) if side * side == size else (size,)


def certificate_bounds(levels: GreyLevels, penalty_weight: float = 1.0) -> Tuple[float, float]:
    """The box [-|u0|, |u1|] (scaled by the penalty weight) that holds the certificate z."""
    a, b = _slopes(levels, penalty_weight)
    return -a, b


def recover_primal(nu: np.ndarray, levels: Optional[GreyLevels] = None, zero_threshold: float = 1e-9,
                   completion: Completion = Completion.U0, shape: Optional[Tuple[int, ...]] = None,
                   subgradient: Optional[np.ndarray] = None,
                   bounds: Optional[Tuple[float, float]] = None) -> TernaryImage:
    """
    Map the dual image to a ternary image: u1 where nu > threshold, u0 where
    nu < -threshold, UNDETERMINED otherwise.

    Noise-free binary data put many entries of nu exactly on zero. When the
    certificate ``subgradient`` and its box ``bounds`` are given, such a pixel
    is decided by the side of the box its certificate sits on (upper -> u1,
    lower -> u0); a certificate strictly inside the box leaves it UNDETERMINED.

    ``completed`` fills UNDETERMINED pixels with u0 (default), u1, or the
    majority of the decided pixels in the surrounding 3x3 window (ties go to u0).
    """
    levels = levels or GreyLevels.symmetric()
    check_positive(zero_threshold, "zero_threshold", allow_zero=True)
    nu = np.asarray(nu, dtype=np.float64)
    shape = shape or _square_shape(nu.size)
    nu = nu.reshape(shape)

    undetermined = np.abs(nu) <= zero_threshold
    upper = nu > zero_threshold
    if subgradient is not None and bounds is not None:
        z = np.asarray(subgradient, dtype=np.float64).reshape(shape)
        low, high = bounds
        tol = SIDE_TOLERANCE * max(abs(low), abs(high))
        if high - low > 2.0 * tol:
            at_high = undetermined & (z >= high - tol)
            at_low = undetermined & (z <= low + tol)
            upper = upper | at_high
            undetermined = undetermined & ~(at_high | at_low)
    values = np.where(upper, levels.u1, levels.u0)

    completion = Completion(completion)
    if completion == Completion.U1:
        completed = np.where(undetermined, levels.u1, values)
    elif completion == Completion.MAJORITY and undetermined.any():
        window = np.ones((3,) * nu.ndim)
        upper_votes = ndimage.convolve(upper.astype(float), window, mode="constant")
        lower_votes = ndimage.convolve((~upper & ~undetermined).astype(float), window, mode="constant")
        filled = np.where(upper_votes > lower_votes, levels.u1, levels.u0)
        completed = np.where(undetermined, filled, values)
    else:
        completed = values.copy()

    return TernaryImage(values=values, undetermined=undetermined, levels=levels, completed=completed)


def pseudo_inverse_sign(A: SparseOperator, y: np.ndarray, levels: Optional[GreyLevels] = None,
                        zero_threshold: float = 1e-9) -> TernaryImage:
    """Segment the minimum-norm least-squares image A^+ y at the midpoint of the grey levels."""
    levels = levels or GreyLevels.symmetric()
    y = check_vector_length(y, A.rows, "sinogram")
    x = np.linalg.lstsq(A.toarray(), y, rcond=None)[0]
    midpoint = 0.5 * (levels.u0 + levels.u1)
    return recover_primal(x - midpoint, levels, zero_threshold, shape=_square_shape(A.cols))


# ---------- Poisson weights ----------

def attenuation_scale(y: np.ndarray) -> float:
    """Scale c = ATTENUATION_PEAK / max(y), so max(c * y) stays below MAX_ATTENUATION. All-zero data keeps c = 1."""
    peak = float(np.max(y, initial=0.0))
    return 1.0 if peak <= 0.0 else ATTENUATION_PEAK / peak


def build_poisson_weights(y, I0: float, scale: Optional[float] = None) -> np.ndarray:
    """
    Transmission-CT weights Lambda_i = I0 exp(-c y_i).

    Args:
        y: Sinogram or array of line integrals.
        I0: Incident photon count.
        scale: Attenuation scale c; derived from ``y`` when omitted.
    """
    if not I0 > 0:
        raise ValueError(f"incident photon count must be positive, got {I0}")
    values = y.values if isinstance(y, Sinogram) else np.asarray(y, dtype=np.float64).ravel()
    c = attenuation_scale(values) if scale is None else scale
    return I0 * np.exp(-np.minimum(c * values, MAX_ATTENUATION))


# ---------- Dispatch ----------

def solve_dual(A: SparseOperator, y: np.ndarray, levels: Optional[GreyLevels] = None,
               weights: Optional[np.ndarray] = None, cfg: Optional[SolverConfig] = None,
               smoothed: bool = False) -> Tuple[DualSolution, TernaryImage]:
    """
    Pick the dual formulation from the rank of A and recover the image.

    m >= N with A^T A invertible uses proximal gradient on the image-space
    dual; otherwise the data-space dual is solved, range-projecting y when A
    lacks full row rank. Grey levels that do not straddle zero are shifted to
    (0, u1 - u0) first.

    Returns:
        The dual solution and the recovered ternary image.
    """
    levels = levels or GreyLevels.symmetric()
    cfg = cfg or SolverConfig.from_settings()
    y = check_vector_length(y, A.rows, "sinogram")

    solve_levels, solve_y = levels, y
    if not levels.straddles_zero:
        solve_levels = GreyLevels(u0=0.0, u1=levels.u1 - levels.u0)
        solve_y = y - levels.u0 * (A.matrix @ np.ones(A.cols))
        logger.info("Shifted grey levels to straddle zero", u0=levels.u0, u1=levels.u1)

    if smoothed:
        solution = solve_dual_smoothed(A, solve_y, solve_levels, weights, cfg)
    elif A.rows >= A.cols and has_full_column_rank(A, cfg.dense_threshold):
        solution = prox_gradient_invertible(A, solve_y, cfg, solve_levels, weights)
    else:
        solution = solve_dual_primal_dual(A, solve_y, solve_levels, weights, cfg)

    shape = (A.grid.n, A.grid.n) if A.grid is not None else None
    # the smoothed solver's derivative never reaches the box bounds
    bounds = None if smoothed else certificate_bounds(solve_levels, cfg.penalty_weight)
    image = recover_primal(solution.nu, levels, cfg.zero_threshold, cfg.completion, shape,
                           subgradient=solution.subgradient, bounds=bounds)
    return solution, image
