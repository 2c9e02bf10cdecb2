# tests/test_metrics_noise.py
import math

import numpy as np
import pytest

from app.models.geometry_model import Kernel
from app.models.image_model import GreyLevels
from app.models.metrics_model import MetricsReport
from app.models.operator_model import Sinogram, SparseOperator
from app.models.run_model import GeometrySpec
from app.services.acquisition_service import acquisition_service
from app.services.benchmark_service import BASE_ANGLE_COUNT
from app.services.metrics_service import evaluate, jaccard, rms
from app.services.noise_service import add_gaussian_noise, realized_snr_db, simulate_poisson
from app.services.phantom_service import make_phantom
from app.utils.constants import MAX_ATTENUATION
from app.utils.validators import DimensionMismatchError, InputFormatError


def test_rms_is_the_plain_residual_norm():
    A = SparseOperator(matrix=np.eye(3))
    assert rms(A, np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 0.0])) == pytest.approx(1.0)
    assert rms(A, np.ones(3), np.ones(3)) == 0.0


def test_jaccard_counts_missing_and_over():
    truth = np.array([[1.0, 1.0], [0.0, 0.0]])
    recon = np.array([[1.0, 0.0], [1.0, 0.0]])
    report = jaccard(recon, truth)
    assert report.missing_count == 1
    assert report.over_count == 1
    assert report.ji == pytest.approx(0.5)
    assert jaccard(truth, truth).ji == 1.0


def test_jaccard_rejects_non_binary_and_mismatched_images():
    with pytest.raises(InputFormatError):
        jaccard(np.array([0.5, 1.0]), np.array([0.0, 1.0]))
    with pytest.raises(DimensionMismatchError):
        jaccard(np.zeros(3), np.zeros(4))


def test_jaccard_with_custom_levels():
    levels = GreyLevels(u0=-1.0, u1=1.0)
    report = jaccard(np.array([-1.0, 1.0, 1.0]), np.array([-1.0, 1.0, -1.0]), levels)
    assert report.over_count == 1
    assert report.ji == pytest.approx(2.0 / 3.0)


def test_evaluate_combines_both_measures():
    A = SparseOperator(matrix=np.eye(4))
    truth = np.array([[1.0, 0.0], [0.0, 1.0]])
    report = evaluate(A, truth, truth.ravel(), truth, GreyLevels(u0=0.0, u1=1.0))
    assert report.rms == 0.0
    assert report.ji == 1.0


def test_metrics_report_checks_consistency():
    with pytest.raises(ValueError):
        MetricsReport(ji=0.9, missing_count=0, over_count=0, pixel_count=10)


def test_gaussian_noise_hits_the_target_snr():
    y = np.linspace(1.0, 5.0, 40)
    noisy = add_gaussian_noise(y, 20.0, seed=3)
    assert realized_snr_db(y, noisy.values) == pytest.approx(20.0, abs=1e-9)
    assert noisy.metadata["noise_norm"] == pytest.approx(np.linalg.norm(y) / 10.0)


def test_gaussian_noise_is_deterministic_per_seed():
    y = np.linspace(1.0, 5.0, 40)
    a = add_gaussian_noise(y, 10.0, seed=11)
    b = add_gaussian_noise(y, 10.0, seed=11)
    c = add_gaussian_noise(y, 10.0, seed=12)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_gaussian_noise_infinite_snr_and_zero_signal():
    y = Sinogram(values=[1.0, 2.0], geometry="parallel")
    clean = add_gaussian_noise(y, math.inf, seed=0)
    assert np.array_equal(clean.values, y.values)
    assert clean.metadata["noise_norm"] == 0.0
    assert clean.geometry == "parallel"
    with pytest.raises(ValueError):
        add_gaussian_noise(np.zeros(3), 10.0, seed=0)


def test_poisson_simulation_weights_and_determinism():
    y = np.linspace(0.0, 4.0, 30)
    noisy, weights = simulate_poisson(y, 1e4, seed=5)
    again, _ = simulate_poisson(y, 1e4, seed=5)
    assert np.array_equal(noisy.values, again.values)
    # y peaks at 4, so c = 6 / 4
    assert np.allclose(weights, 1e4 * np.exp(-1.5 * y))
    assert noisy.metadata["attenuation_scale"] == pytest.approx(1.5)
    assert np.array_equal(noisy.weights, weights)
    assert noisy.metadata["noise"] == "poisson"


def test_poisson_noise_shrinks_with_more_photons():
    y = np.linspace(0.0, 4.0, 200)
    low, _ = simulate_poisson(y, 1e2, seed=1)
    high, _ = simulate_poisson(y, 1e6, seed=1)
    assert np.linalg.norm(high.values - y) < np.linalg.norm(low.values - y)


def test_poisson_rejects_nonpositive_photon_count():
    with pytest.raises(ValueError):
        simulate_poisson(np.ones(3), 0.0, seed=0)


@pytest.mark.parametrize("phantom", ["disk", "P1"])
def test_poisson_snr_at_a_million_photons(phantom):
    spec = GeometrySpec(n=32, angle_count=BASE_ANGLE_COUNT, theta_max=math.pi / 2, kernel=Kernel.STRIP)
    clean, _ = acquisition_service.project(make_phantom(phantom, 32), spec)
    noisy, _ = simulate_poisson(clean, 1e6, seed=20180101)
    assert 45.0 <= realized_snr_db(clean.values, noisy.values) <= 55.0
    assert np.max(noisy.metadata["attenuation_scale"] * clean.values) <= MAX_ATTENUATION
