"""
Error types and argument checks shared across the toolkit.
"""

from typing import Optional

import numpy as np


class TomographyError(Exception):
    """Base class for every error raised by the toolkit."""


class GeometryError(TomographyError, ValueError):
    """Invalid grid, direction set or beam geometry."""


class DimensionMismatchError(TomographyError, ValueError):
    """Vector or image shape does not conform to the operator."""


class SolverError(TomographyError, RuntimeError):
    """A solver cannot run on the given problem (singular or ill-conditioned operator)."""


class EnumerationError(TomographyError, ValueError):
    """Enumeration request outside the supported range."""


class InputFormatError(TomographyError, ValueError):
    """Malformed image, sinogram, report or operator file."""


def check_vector_length(vector: np.ndarray, expected: int, name: str = "vector") -> np.ndarray:
    """
    Return ``vector`` as a flat float array, checking its length.

    Args:
        vector: Array-like input.
        expected: Required number of entries.
        name: Name used in the error message.

    Returns:
        The flattened float64 array.
    """
    arr = np.asarray(vector, dtype=np.float64).ravel()
    if arr.size != expected:
        raise DimensionMismatchError(f"{name} has length {arr.size}, expected {expected}")
    return arr


def check_positive(value: float, name: str, allow_zero: bool = False) -> float:
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return float(value)


def check_binary_image(image: np.ndarray, u0: float, u1: float, name: str = "image") -> np.ndarray:
    """Ensure every pixel of ``image`` equals one of the two grey levels."""
    arr = np.asarray(image, dtype=np.float64)
    if not np.all((arr == u0) | (arr == u1)):
        raise InputFormatError(f"{name} has values outside the grey levels ({u0}, {u1})")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, message: Optional[str] = None) -> None:
    if np.shape(a) != np.shape(b):
        raise DimensionMismatchError(message or f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")
