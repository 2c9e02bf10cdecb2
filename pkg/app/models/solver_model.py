"""
Solver configuration and result models.
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.config import settings
from app.models.image_model import Completion


class SolverConfig(BaseModel):
    """Settings shared by the dual solvers."""
    model_config = ConfigDict(frozen=True)

    max_iters: int = Field(500, ge=1)
    primal_dual_max_iters: int = Field(20000, ge=1)
    tol_kkt: float = Field(1e-6, gt=0)
    smoothing_epsilon: float = Field(1e-1, gt=0)
    zero_threshold: float = Field(1e-9, ge=0)
    # explicit operator norm; estimated by power iteration when None
    operator_norm: Optional[float] = Field(None, gt=0)
    penalty_weight: float = Field(1.0, ge=0)
    check_every: int = Field(25, ge=1)
    polish: bool = True
    polish_trigger: float = Field(1e-2, gt=0)
    dense_threshold: int = Field(1_000_000, ge=0)
    completion: Completion = Completion.U0
    seed: int = 20180101

    @classmethod
    def from_settings(cls, **overrides) -> "SolverConfig":
        """Defaults from the environment-driven ``settings``, then explicit overrides."""
        values = dict(
            max_iters=settings.MAX_ITERS,
            primal_dual_max_iters=settings.PRIMAL_DUAL_MAX_ITERS,
            tol_kkt=settings.TOL_KKT,
            smoothing_epsilon=settings.SMOOTHING_EPSILON,
            zero_threshold=settings.ZERO_THRESHOLD,
            dense_threshold=settings.DENSE_THRESHOLD,
            seed=settings.SEED,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class DualSolution(BaseModel):
    """
    Result of a dual solve.

    ``nu`` is the adjoint image of ``mu`` under the effective operator of the
    solve (A, or Lambda^(1/2)-weighted A). ``subgradient`` is the certificate
    z with z in the subdifferential of the penalty at ``nu``.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    mu: np.ndarray
    nu: np.ndarray
    subgradient: np.ndarray
    # data vector of the problem actually solved (weighted and/or range-projected y)
    y_effective: np.ndarray
    objective_value: float
    data_term: float
    penalty_term: float
    kkt_residual: float = Field(..., ge=0)
    gap: float = 0.0
    iterations: int = 0
    converged: bool = True
    polished: bool = False
    branch: str = "full-row-rank"
    objective_history: List[float] = Field(default_factory=list)

    def report(self) -> str:
        """Plain-text report: objective, kkt_residual, iterations, then nu one value per line."""
        lines = [
            f"objective {self.objective_value:.17g}",
            f"kkt_residual {self.kkt_residual:.17g}",
            f"iterations {self.iterations}",
        ]
        lines.extend(f"{value:.17g}" for value in self.nu)
        return "\n".join(lines) + "\n"


class TvConfig(BaseModel):
    """Total-variation baseline settings."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(0.0, ge=0, alias="lambda")
    tol_gap: float = Field(1e-4, gt=0)
    nonneg: bool = True
    max_iters: int = Field(5000, ge=1)
    check_every: int = Field(10, ge=1)


class TvResult(BaseModel):
    """Output of the total-variation baseline."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    image: np.ndarray
    lam: float
    iterations: int
    relative_gap: float
    converged: bool
    # best primal objective seen at each gap checkpoint
    objective_history: List[float] = Field(default_factory=list)
