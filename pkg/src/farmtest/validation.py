"""Input validation helpers shared by the estimators and the functional core."""

from __future__ import annotations

import numpy as np

from .errors import StructuralError


def as_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a 2-d float64 array with finite entries."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise StructuralError(f"{name} must be a 2-d array, got ndim={arr.ndim}")
    if arr.size == 0:
        raise StructuralError(f"{name} must be non-empty")
    if not np.isfinite(arr).all():
        raise StructuralError(f"{name} contains non-finite entries")
    return arr


def as_vector(y, name: str = "y") -> np.ndarray:
    """Coerce to a 1-d float64 array with finite entries.

    A single-column 2-d array is accepted and flattened.
    """
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise StructuralError(f"{name} must be a 1-d array, got ndim={arr.ndim}")
    if arr.size == 0:
        raise StructuralError(f"{name} must be non-empty")
    if not np.isfinite(arr).all():
        raise StructuralError(f"{name} contains non-finite entries")
    return arr


def check_paired(X: np.ndarray, y: np.ndarray) -> None:
    """Require one response per row of X and at least two observations."""
    if X.shape[0] != y.shape[0]:
        raise StructuralError(
            f"X has {X.shape[0]} rows but y has length {y.shape[0]}"
        )
    if X.shape[0] < 2:
        raise StructuralError("need at least 2 observations")


def check_symmetric(S: np.ndarray, rtol: float = 1e-8, name: str = "S") -> np.ndarray:
    """Validate symmetry within a relative max-norm tolerance; return the
    symmetrized matrix so downstream solvers see an exactly symmetric input."""
    S = as_matrix(S, name)
    if S.shape[0] != S.shape[1]:
        raise StructuralError(f"{name} must be square, got shape {S.shape}")
    scale = np.abs(S).max()
    asym = np.abs(S - S.T).max()
    if asym > rtol * (scale + 1e-300):
        raise StructuralError(
            f"{name} is not symmetric: max|S - S^T| = {asym:.3e} "
            f"exceeds {rtol:.1e} * max|S| = {rtol * scale:.3e}"
        )
    return (S + S.T) / 2.0
