# tests/test_dual_service.py
import numpy as np
import pytest

from app.models.geometry_model import GridSpec, LatticeGeometry
from app.models.image_model import Completion, GreyLevels
from app.models.operator_model import SparseOperator
from app.models.solver_model import SolverConfig
from app.services.dual_service import (
    asym_soft_threshold,
    asymmetric_penalty,
    attenuation_scale,
    build_poisson_weights,
    effective_problem,
    eval_dual_objective,
    grad_smoothed_objective,
    kkt_residual,
    prox_gradient_invertible,
    pseudo_inverse_sign,
    recover_primal,
    smoothed_objective,
    smoothed_penalty,
    soft_threshold,
    solve_dual,
    solve_dual_primal_dual,
    solve_dual_smoothed,
)
from app.services.metrics_service import jaccard
from app.services.phantom_service import make_phantom
from app.services.projection_service import build_lattice_operator
from app.utils.validators import SolverError


# ---------- proximal maps ----------

def test_soft_threshold_values():
    assert soft_threshold(3.0, 1.0) == pytest.approx(2.0)
    assert soft_threshold(-3.0, 1.0) == pytest.approx(-2.0)
    assert soft_threshold(0.5, 1.0) == 0.0
    assert np.allclose(soft_threshold(np.array([2.0, -0.2]), 0.5), [1.5, 0.0])


def test_soft_threshold_rejects_negative_threshold():
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


def test_asym_soft_threshold_values():
    t = np.array([3.0, -3.0, 0.5, -1.5])
    assert np.allclose(asym_soft_threshold(t, 2.0, 1.0), [2.0, -1.0, 0.0, 0.0])


def test_asym_soft_threshold_reduces_to_symmetric(rng):
    t = rng.standard_normal(50) * 3
    assert np.array_equal(asym_soft_threshold(t, 0.7, 0.7), soft_threshold(t, 0.7))


def test_asym_soft_threshold_matches_grid_minimiser():
    rng = np.random.default_rng(20180101)
    t = rng.uniform(-3.0, 3.0, 10_000)
    a = rng.uniform(0.0, 2.0, 10_000)
    b = rng.uniform(0.0, 2.0, 10_000)
    step = 1e-3
    grid = np.arange(-5.0, 5.0 + step / 2, step)
    for chunk in np.array_split(np.arange(t.size), 40):
        tc, ac, bc = t[chunk, None], a[chunk, None], b[chunk, None]
        objective = 0.5 * (grid - tc) ** 2 + ac * np.maximum(-grid, 0.0) + bc * np.maximum(grid, 0.0)
        best = grid[np.argmin(objective, axis=1)]
        prox = asym_soft_threshold(t[chunk], a[chunk], b[chunk])
        assert np.max(np.abs(best - prox)) <= step + 1e-12
    assert np.array_equal(asym_soft_threshold(t, 0.8, 0.8), soft_threshold(t, 0.8))


def test_asymmetric_penalty():
    levels = GreyLevels(u0=-2.0, u1=3.0)
    assert asymmetric_penalty(np.array([-1.0, 2.0]), levels) == pytest.approx(8.0)
    nu = np.array([-1.0, 0.0, 2.5])
    assert asymmetric_penalty(nu, GreyLevels.symmetric()) == pytest.approx(np.abs(nu).sum())


def test_penalty_with_zero_lower_level_ignores_negative_part(rng, unit_levels):
    nu = rng.standard_normal(20)
    assert asymmetric_penalty(nu, unit_levels) == pytest.approx(np.maximum(nu, 0).sum())


# ---------- objectives ----------

def test_dual_objective_scalar_cases(scalar_operator, symmetric_levels):
    assert eval_dual_objective(scalar_operator, np.array([1.5]), np.array([0.0]), symmetric_levels) == pytest.approx(1.125)
    assert eval_dual_objective(scalar_operator, np.array([1.5]), np.array([0.5]), symmetric_levels) == pytest.approx(1.0)


def test_dual_objective_with_weights(scalar_operator, symmetric_levels):
    # Lambda = 4: y -> 3, A -> [2]
    value = eval_dual_objective(scalar_operator, np.array([1.5]), np.array([0.5]), symmetric_levels,
                                weights=np.array([4.0]))
    assert value == pytest.approx(0.5 * 2.5 ** 2 + 1.0)


def test_effective_problem_rejects_nonpositive_weights(scalar_operator):
    with pytest.raises(ValueError):
        effective_problem(scalar_operator, np.array([1.0]), np.array([0.0]))


def test_smoothed_penalty_symmetric_form(rng):
    nu = rng.standard_normal(10)
    value, derivative = smoothed_penalty(nu, 0.1, GreyLevels.symmetric())
    assert value == pytest.approx(np.sqrt(nu ** 2 + 0.1).sum())
    assert np.allclose(derivative, nu / np.sqrt(nu ** 2 + 0.1))


def test_smoothed_gradient_is_zero_at_origin(scalar_operator, symmetric_levels):
    grad = grad_smoothed_objective(scalar_operator, np.zeros(1), np.zeros(1), 0.1, symmetric_levels)
    assert np.allclose(grad, 0.0)


@pytest.mark.parametrize("levels", [GreyLevels.symmetric(), GreyLevels(u0=-0.5, u1=2.0)])
def test_smoothed_gradient_matches_finite_differences(lattice_hv_3, rng, levels):
    y = rng.standard_normal(lattice_hv_3.rows)
    mu = rng.standard_normal(lattice_hv_3.rows)
    grad = grad_smoothed_objective(lattice_hv_3, y, mu, 0.05, levels)
    h = 1e-6
    numeric = np.array([
        (smoothed_objective(lattice_hv_3, y, mu + h * e, 0.05, levels)
         - smoothed_objective(lattice_hv_3, y, mu - h * e, 0.05, levels)) / (2 * h)
        for e in np.eye(lattice_hv_3.rows)
    ])
    assert np.allclose(grad, numeric, atol=1e-5)


def test_smoothed_gradient_requires_positive_epsilon(scalar_operator, symmetric_levels):
    with pytest.raises(ValueError):
        grad_smoothed_objective(scalar_operator, np.ones(1), np.ones(1), 0.0, symmetric_levels)


# ---------- solvers ----------

@pytest.mark.parametrize("y", np.linspace(-3.0, 3.0, 61))
def test_primal_dual_scalar_closed_form(scalar_operator, solver_cfg, y):
    solution = solve_dual_primal_dual(scalar_operator, np.array([y]), cfg=solver_cfg)
    expected = max(abs(y) - 1.0, 0.0) * np.sign(y)
    assert solution.converged
    assert solution.mu[0] == pytest.approx(expected, abs=1e-5)
    assert solution.kkt_residual >= 0


def test_primal_dual_scalar_sign(scalar_operator, solver_cfg):
    solution, image = solve_dual(scalar_operator, np.array([1.5]), cfg=solver_cfg)
    assert solution.mu[0] == pytest.approx(0.5, abs=1e-6)
    assert image.completed.ravel()[0] == 1.0

    small = solve_dual_primal_dual(scalar_operator, np.array([0.5]), cfg=solver_cfg)
    assert abs(small.mu[0]) < 1e-6
    assert recover_primal(small.nu, zero_threshold=1e-6).undetermined_count == 1


def test_primal_dual_reports_consistent_certificate(lattice_hv_3, solver_cfg):
    image = np.array([[1, 1, -1], [1, -1, -1], [-1, -1, 1]], dtype=float)
    y = lattice_hv_3.matrix @ image.ravel()
    solution = solve_dual_primal_dual(lattice_hv_3, y, cfg=solver_cfg)
    assert solution.branch == "range-projected"
    assert np.allclose(solution.nu, lattice_hv_3.matrix.T @ solution.mu, atol=1e-12)
    recomputed = kkt_residual(lattice_hv_3, solution.y_effective, solution.mu, solution.nu,
                              solution.subgradient, GreyLevels.symmetric())
    assert recomputed == pytest.approx(solution.kkt_residual, abs=1e-12)


def test_primal_dual_is_sign_equivariant(lattice_hv_3, solver_cfg, rng):
    image = rng.choice([-1.0, 1.0], size=9)
    y = lattice_hv_3.matrix @ image
    plus = solve_dual_primal_dual(lattice_hv_3, y, cfg=solver_cfg)
    minus = solve_dual_primal_dual(lattice_hv_3, -y, cfg=solver_cfg)
    assert plus.converged and minus.converged
    assert np.allclose(plus.mu, -minus.mu, atol=1e-5)


def test_primal_dual_hits_iteration_cap(lattice_hv_3):
    cfg = SolverConfig(primal_dual_max_iters=3, check_every=1, polish=False, tol_kkt=1e-12)
    y = lattice_hv_3.matrix @ np.array([1, -1, 1, -1, 1, -1, 1, -1, 1], dtype=float)
    solution = solve_dual_primal_dual(lattice_hv_3, y, cfg=cfg)
    assert not solution.converged
    assert solution.iterations == 3


def test_primal_dual_certifies_random_full_row_rank_instances():
    rng = np.random.default_rng(8)
    cfg = SolverConfig(tol_kkt=1e-6, seed=8)
    for _ in range(50):
        m = int(rng.integers(5, 41))
        N = int(rng.integers(m + 1, 65))
        A = SparseOperator(matrix=rng.standard_normal((m, N)) / np.sqrt(m))
        y = A.matrix @ rng.choice([-1.0, 1.0], size=N) + 0.1 * rng.standard_normal(m)
        solution = solve_dual_primal_dual(A, y, cfg=cfg)
        assert solution.branch == "full-row-rank"
        assert solution.converged
        assert solution.kkt_residual <= 1e-6
        # stationarity and the subgradient inclusion, recomputed from the stored iterate
        nu = A.matrix.T @ solution.mu
        z = solution.subgradient
        stationarity = solution.mu - y + A.matrix @ z
        inclusion = nu - soft_threshold(nu + z, 1.0)
        recomputed = max(np.max(np.abs(stationarity)), np.max(np.abs(inclusion)))
        assert recomputed == pytest.approx(solution.kkt_residual, abs=1e-12)


def test_primal_dual_recovers_a_stalled_two_by_two_instance():
    A = build_lattice_operator(GridSpec(n=2), LatticeGeometry.from_code("hvd"))
    y = np.array([-2.0, 2.0, 0.0, 0.0, -1.0, 0.0, 1.0])
    cfg = SolverConfig(tol_kkt=1e-7, seed=3)
    solution, image = solve_dual(A, y, cfg=cfg)
    assert solution.converged
    assert solution.kkt_residual <= 1e-7
    assert np.array_equal(image.completed, np.array([[-1.0, -1.0], [1.0, 1.0]]))
    assert image.undetermined_count == 0


def test_primal_dual_polishes_the_best_iterate_at_the_cap(lattice_hv_3):
    # far too few iterations for the raw iteration; the final face solve still certifies
    cfg = SolverConfig(primal_dual_max_iters=400, tol_kkt=1e-8, polish_trigger=1e-12)
    y = lattice_hv_3.matrix @ np.array([1, 1, -1, 1, -1, -1, -1, -1, 1], dtype=float)
    solution = solve_dual_primal_dual(lattice_hv_3, y, cfg=cfg)
    assert solution.converged
    assert solution.polished
    assert solution.kkt_residual <= 1e-8


def test_prox_gradient_agrees_with_primal_dual(rng, solver_cfg):
    for _ in range(5):
        A = SparseOperator(matrix=np.eye(16) + 0.2 * rng.standard_normal((16, 16)) / 4.0, grid=GridSpec(n=4))
        y = A.matrix @ rng.choice([-1.0, 1.0], size=16) + 0.3 * rng.standard_normal(16)
        ista = prox_gradient_invertible(A, y, solver_cfg)
        splitting = solve_dual_primal_dual(A, y, cfg=solver_cfg)
        assert ista.converged and splitting.converged
        assert np.allclose(ista.mu, splitting.mu, atol=1e-5)
        history = np.array(ista.objective_history)
        assert np.all(np.diff(history) <= 1e-12 * (1.0 + np.abs(history[:-1])))


def test_smoothed_solution_keeps_the_exact_signs(rng, solver_cfg):
    eps = 0.1
    cfg = SolverConfig(smoothing_epsilon=eps, tol_kkt=1e-8)
    A = SparseOperator(matrix=np.eye(16) + 0.2 * rng.standard_normal((16, 16)) / 4.0, grid=GridSpec(n=4))
    y = 3.0 * (A.matrix @ rng.choice([-1.0, 1.0], size=16))
    exact = solve_dual_primal_dual(A, y, cfg=solver_cfg)
    smooth = solve_dual_smoothed(A, y, cfg=cfg)
    clear = np.abs(exact.nu) > 10 * eps
    assert clear.any()
    assert np.array_equal(np.sign(smooth.nu[clear]), np.sign(exact.nu[clear]))


@pytest.mark.slow
def test_smoothed_and_exact_images_agree_on_a_disk():
    n = 32
    A = build_lattice_operator(GridSpec(n=n), LatticeGeometry.from_code("hvda"))
    truth = make_phantom("disk", n)
    y = A.matrix @ truth.ravel()
    levels = GreyLevels(u0=0.0, u1=1.0)
    _, exact = solve_dual(A, y, levels, cfg=SolverConfig(tol_kkt=1e-6))
    _, smooth = solve_dual(A, y, levels, cfg=SolverConfig(smoothing_epsilon=0.1), smoothed=True)
    assert jaccard(smooth.completed, exact.completed, levels).ji >= 0.99


def test_zero_penalty_weight_returns_data(scalar_operator):
    cfg = SolverConfig(penalty_weight=0.0, tol_kkt=1e-8)
    solution = solve_dual_smoothed(scalar_operator, np.array([1.7]), cfg=cfg)
    assert solution.mu[0] == pytest.approx(1.7, abs=1e-6)


def test_smoothed_solver_keeps_the_sign(scalar_operator):
    cfg = SolverConfig(smoothing_epsilon=0.1, tol_kkt=1e-8)
    solution = solve_dual_smoothed(scalar_operator, np.array([1.5]), cfg=cfg)
    assert solution.mu[0] > 0
    assert solution.branch.startswith("smoothed/")


def test_prox_gradient_invertible_scalar(scalar_operator, solver_cfg):
    solution = prox_gradient_invertible(scalar_operator, np.array([1.5]), solver_cfg)
    assert solution.converged
    assert solution.branch == "invertible"
    assert solution.mu[0] == pytest.approx(0.5)
    assert solution.kkt_residual == pytest.approx(0.0, abs=1e-12)


def test_prox_gradient_invertible_rejects_wide_operator(lattice_hv_3):
    with pytest.raises(SolverError):
        prox_gradient_invertible(lattice_hv_3, np.zeros(lattice_hv_3.rows))


def test_dispatcher_uses_invertible_branch_for_identity(solver_cfg):
    A = SparseOperator(matrix=np.eye(4), grid=GridSpec(n=2))
    y = np.array([2.0, -3.0, 1.5, -1.2])
    solution, image = solve_dual(A, y, cfg=solver_cfg)
    assert solution.branch == "invertible"
    assert np.array_equal(image.completed, np.array([[1.0, -1.0], [1.0, -1.0]]))


def test_dispatcher_shifts_levels_that_do_not_straddle_zero(solver_cfg):
    A = SparseOperator(matrix=np.eye(4), grid=GridSpec(n=2))
    truth = np.array([1.0, 3.0, 3.0, 1.0])
    # y - u0 * A 1 = [0, 2, 2, 0]; the (0, 2) problem thresholds at 0 and 2
    y = truth * 1.0 + np.array([0.0, 1.5, 1.5, 0.0])
    _, image = solve_dual(A, y, GreyLevels(u0=1.0, u1=3.0), cfg=solver_cfg)
    assert np.array_equal(image.completed.ravel(), truth)


# ---------- primal recovery ----------

def test_recover_primal_ternary_pattern():
    nu = np.array([0.5, -0.5, 0.0, 1e-12])
    image = recover_primal(nu, GreyLevels.symmetric(), zero_threshold=1e-9)
    assert image.shape == (2, 2)
    assert np.array_equal(image.values, [[1.0, -1.0], [-1.0, -1.0]])
    assert image.undetermined_count == 2
    assert np.array_equal(image.codes(), [[2, 0], [1, 1]])


def test_recover_primal_completions():
    nu = np.ones((3, 3))
    nu[1, 1] = 0.0
    levels = GreyLevels.symmetric()
    assert recover_primal(nu, levels, completion=Completion.U0).completed[1, 1] == -1.0
    assert recover_primal(nu, levels, completion=Completion.U1).completed[1, 1] == 1.0
    assert recover_primal(nu, levels, completion=Completion.MAJORITY).completed[1, 1] == 1.0


def test_recover_primal_decides_zero_entries_by_certificate_side():
    nu = np.zeros(4)
    z = np.array([1.0, -1.0, 0.2, 1.0 - 1e-9])
    image = recover_primal(nu, GreyLevels.symmetric(), subgradient=z, bounds=(-1.0, 1.0))
    assert np.array_equal(image.values, [[1.0, -1.0], [-1.0, 1.0]])
    assert np.array_equal(image.undetermined, [[False, False], [True, False]])


def test_exact_binary_data_is_recovered_through_the_certificate(solver_cfg):
    # y = x puts nu exactly on zero; the certificate carries the image
    A = SparseOperator(matrix=np.eye(4), grid=GridSpec(n=2))
    x = np.array([1.0, -1.0, -1.0, 1.0])
    solution, image = solve_dual(A, x, cfg=solver_cfg)
    assert np.allclose(solution.nu, 0.0)
    assert image.undetermined_count == 0
    assert np.array_equal(image.completed.ravel(), x)


def test_pseudo_inverse_sign_on_identity_and_switching_pair():
    identity = SparseOperator(matrix=np.eye(4), grid=GridSpec(n=2))
    image = pseudo_inverse_sign(identity, np.array([1.0, -1.0, -1.0, 1.0]))
    assert np.array_equal(image.values, [[1.0, -1.0], [-1.0, 1.0]])
    # a +-1 checkerboard has zero row and column sums, so A^+ y vanishes
    A = build_lattice_operator(GridSpec(n=2), LatticeGeometry.from_code("hv"))
    y = A.matrix @ np.array([1.0, -1.0, -1.0, 1.0])
    assert pseudo_inverse_sign(A, y).undetermined_count == 4


def test_recover_primal_rejects_negative_threshold():
    with pytest.raises(ValueError):
        recover_primal(np.zeros(4), zero_threshold=-1.0)


# ---------- weights ----------

def test_poisson_weights():
    y = np.array([0.0, 1.0, 2.0])
    weights = build_poisson_weights(y, 1e4)
    # peak attenuation scaled to 6
    assert np.allclose(weights, 1e4 * np.exp(-3.0 * y))
    assert np.all(weights > 0)


def test_poisson_weights_scale_large_attenuation():
    y = np.array([0.0, 40.0])
    weights = build_poisson_weights(y, 100.0)
    assert attenuation_scale(y) == pytest.approx(6.0 / 40.0)
    assert weights[1] == pytest.approx(100.0 * np.exp(-6.0))
    assert weights[0] == 100.0


def test_attenuation_scale_zero_data_and_explicit_scale():
    assert attenuation_scale(np.zeros(4)) == 1.0
    weights = build_poisson_weights(np.array([0.0, 1.0]), 10.0, scale=20.0)
    # exponent clipped at the attenuation bound
    assert weights[1] == pytest.approx(10.0 * np.exp(-10.0))


def test_poisson_weights_reject_nonpositive_count():
    with pytest.raises(ValueError):
        build_poisson_weights(np.ones(3), 0.0)

