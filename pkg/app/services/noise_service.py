"""
Measurement noise: additive Gaussian at a target SNR and transmission-CT
Poisson counts with matching weights.
"""

import math
from typing import Tuple, Union

import numpy as np

from app.models.operator_model import Sinogram
from app.services.dual_service import attenuation_scale, build_poisson_weights
from app.utils.logger import get_logger

logger = get_logger(__name__)

SinogramLike = Union[Sinogram, np.ndarray]


def _values(y: SinogramLike) -> Tuple[np.ndarray, str]:
    if isinstance(y, Sinogram):
        return y.values, y.geometry
    return np.asarray(y, dtype=np.float64).ravel(), ""


def realized_snr_db(clean: np.ndarray, noisy: np.ndarray) -> float:
    """20 log10(||y|| / ||noisy - y||); infinite for identical vectors."""
    noise = float(np.linalg.norm(np.asarray(noisy) - np.asarray(clean)))
    if noise == 0.0:
        return math.inf
    return 20.0 * math.log10(float(np.linalg.norm(clean)) / noise)


def add_gaussian_noise(y: SinogramLike, snr_db: float, seed: int) -> Sinogram:
    """
    Add white Gaussian noise scaled to an exact signal-to-noise ratio.

    Args:
        y: Clean sinogram.
        snr_db: Target 20 log10(||y|| / ||e||); +inf returns ``y`` unchanged.
        seed: Generator seed.

    Returns:
        Noisy sinogram; ``metadata["noise_norm"]`` is the realized ||e||.
    """
    values, geometry = _values(y)
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise ValueError(f"SNR must be a number or +inf, got {snr_db}")
    signal = float(np.linalg.norm(values))
    if signal == 0.0:
        raise ValueError("cannot set an SNR for a zero signal")
    if snr_db == math.inf:
        return Sinogram(values=values.copy(), geometry=geometry,
                        metadata={"noise": "none", "snr_db": "inf", "noise_norm": 0.0, "seed": seed})

    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(values.size)
    noise_norm = signal / 10.0 ** (snr_db / 20.0)
    noise = direction * (noise_norm / np.linalg.norm(direction))
    logger.info("Added Gaussian noise", snr_db=snr_db, noise_norm=noise_norm, seed=seed)
    return Sinogram(values=values + noise, geometry=geometry,
                    metadata={"noise": "gaussian", "snr_db": snr_db, "noise_norm": noise_norm, "seed": seed})


def simulate_poisson(y: SinogramLike, I0: float, seed: int) -> Tuple[Sinogram, np.ndarray]:
    """
    Draw transmission counts c_i ~ Poisson(I0 exp(-s y_i)) and log-transform back.

    Counts are clipped to at least one photon before the logarithm, which
    biases very low I0 upwards.

    Returns:
        The noisy sinogram (weights attached) and the weights
        I0 exp(-s y) of the noiseless data.
    """
    if not I0 > 0:
        raise ValueError(f"incident photon count must be positive, got {I0}")
    values, geometry = _values(y)
    scale = attenuation_scale(values)
    weights = build_poisson_weights(values, I0, scale=scale)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(weights)
    noisy = -np.log(np.maximum(counts, 1) / I0) / scale
    noise_norm = float(np.linalg.norm(noisy - values))
    logger.info("Simulated Poisson counts", I0=I0, scale=scale, noise_norm=noise_norm, seed=seed)
    sinogram = Sinogram(
        values=noisy,
        weights=weights,
        geometry=geometry,
        metadata={"noise": "poisson", "I0": I0, "attenuation_scale": scale, "noise_norm": noise_norm, "seed": seed},
    )
    return sinogram, weights
