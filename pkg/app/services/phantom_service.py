# app/services/phantom_service.py
"""
Analytic binary phantoms on an n x n grid, drawn with ``skimage.draw``.

Shapes are defined in fractions of the image side so every phantom exists
at any resolution n >= 8. Pixels are 0 (background) or 1 (object).
"""

from typing import Callable, Dict

import numpy as np
from skimage.draw import disk, ellipse, polygon, rectangle

from app.models.image_model import GreyLevels
from app.utils.constants import PHANTOM_LEVELS, PHANTOM_NAMES
from app.utils.logger import get_logger

logger = get_logger(__name__)

MIN_PHANTOM_SIZE = 8


def _canvas(n: int) -> np.ndarray:
    return np.zeros((n, n), dtype=np.float64)


def _box(image: np.ndarray, top: float, left: float, bottom: float, right: float, value: float = 1.0) -> None:
    """Fill the rectangle given in fractions of the side."""
    n = image.shape[0]
    start = (int(round(top * n)), int(round(left * n)))
    end = (max(int(round(bottom * n)) - 1, start[0]), max(int(round(right * n)) - 1, start[1]))
    rr, cc = rectangle(start, end=end, shape=image.shape)
    image[rr, cc] = value


def _p1(n: int) -> np.ndarray:
    # rectangle with two holes
    image = _canvas(n)
    _box(image, 0.15, 0.2, 0.85, 0.8)
    _box(image, 0.3, 0.32, 0.45, 0.48, 0.0)
    _box(image, 0.55, 0.52, 0.7, 0.68, 0.0)
    return image


def _p2(n: int) -> np.ndarray:
    # scattered blobs of different sizes
    image = _canvas(n)
    for (r, c, rad) in ((0.3, 0.3, 0.14), (0.3, 0.72, 0.1), (0.7, 0.4, 0.18), (0.72, 0.78, 0.08)):
        rr, cc = disk((r * (n - 1), c * (n - 1)), rad * n, shape=image.shape)
        image[rr, cc] = 1.0
    return image


def _p3(n: int) -> np.ndarray:
    # tilted ellipse with an elliptic cavity
    image = _canvas(n)
    centre = (n - 1) / 2.0
    rr, cc = ellipse(centre, centre, 0.42 * n, 0.28 * n, shape=image.shape, rotation=np.pi / 6)
    image[rr, cc] = 1.0
    rr, cc = ellipse(centre, centre, 0.18 * n, 0.1 * n, shape=image.shape, rotation=np.pi / 6)
    image[rr, cc] = 0.0
    return image


def _p4(n: int) -> np.ndarray:
    # triangle, bar and small disk
    image = _canvas(n)
    scale = n - 1
    rr, cc = polygon(np.array([0.1, 0.55, 0.55]) * scale, np.array([0.3, 0.08, 0.52]) * scale, shape=image.shape)
    image[rr, cc] = 1.0
    _box(image, 0.65, 0.1, 0.8, 0.9)
    rr, cc = disk((0.3 * scale, 0.75 * scale), 0.12 * n, shape=image.shape)
    image[rr, cc] = 1.0
    return image


def _disk(n: int) -> np.ndarray:
    image = _canvas(n)
    centre = (n - 1) / 2.0
    rr, cc = disk((centre, centre), 0.4 * n, shape=image.shape)
    image[rr, cc] = 1.0
    return image


def _rings(n: int) -> np.ndarray:
    # concentric annuli: radii are (outer, inner) fractions of n
    image = _canvas(n)
    centre = (n - 1) / 2.0
    r, c = np.indices((n, n))
    radius = np.hypot(r - centre, c - centre) / n
    for outer, inner in ((0.45, 0.36), (0.28, 0.19), (0.11, 0.0)):
        image[(radius < outer) & (radius >= inner)] = 1.0
    return image


def _letters(n: int) -> np.ndarray:
    # block letters T, L and H side by side
    image = _canvas(n)
    _box(image, 0.2, 0.05, 0.3, 0.33)
    _box(image, 0.2, 0.15, 0.8, 0.23)
    _box(image, 0.2, 0.38, 0.8, 0.46)
    _box(image, 0.7, 0.38, 0.8, 0.62)
    _box(image, 0.2, 0.68, 0.8, 0.76)
    _box(image, 0.2, 0.87, 0.8, 0.95)
    _box(image, 0.45, 0.68, 0.55, 0.95)
    return image


PHANTOMS: Dict[str, Callable[[int], np.ndarray]] = {
    "P1": _p1,
    "P2": _p2,
    "P3": _p3,
    "P4": _p4,
    "disk": _disk,
    "rings": _rings,
    "letters": _letters,
}


def make_phantom(name: str, n: int, levels: GreyLevels = GreyLevels(u0=PHANTOM_LEVELS[0], u1=PHANTOM_LEVELS[1])) -> np.ndarray:
    """
    Build a named phantom.

    Args:
        name: One of ``PHANTOM_NAMES``.
        n: Image side, at least 8.
        levels: Grey levels for background and object.

    Returns:
        n x n array with values in {u0, u1}.
    """
    if name not in PHANTOMS:
        raise ValueError(f"unknown phantom {name!r}; choose from {', '.join(PHANTOM_NAMES)}")
    if n < MIN_PHANTOM_SIZE:
        raise ValueError(f"phantoms need n >= {MIN_PHANTOM_SIZE}, got {n}")
    mask = PHANTOMS[name](n) > 0.5
    logger.info("Built phantom", name=name, n=n, object_pixels=int(mask.sum()))
    return np.where(mask, levels.u1, levels.u0)
