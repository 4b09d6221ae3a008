"""Dense symmetric eigensolving and data-driven factor-count selection.

The Gram matrix of the observed covariates is small (n x n at desk scale),
so a full dense decomposition is cheaper and more robust than iterative
subspace methods; the top-k pairs are truncated afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateDataError, DomainError, NumericalError
from .validation import check_symmetric

# Relative floor applied to eigenvalues before forming successive ratios,
# guarding against division by numerically-zero tail eigenvalues.
RATIO_FLOOR = 1e-12


@dataclass(frozen=True)
class SymmetricSpectrum:
    """Top-k eigenpairs of a symmetric PSD matrix, eigenvalues descending.

    ``vectors`` columns are orthonormal and sign-fixed: in each column the
    entry of largest absolute value is positive, so repeated runs on the
    same input bits produce identical output.
    """

    values: np.ndarray   # (k,) descending
    vectors: np.ndarray  # (n, k) column-orthonormal

    def __post_init__(self):
        if self.values.ndim != 1 or self.vectors.ndim != 2:
            raise DomainError("values must be 1-d and vectors 2-d")
        if self.vectors.shape[1] != self.values.shape[0]:
            raise DomainError("one eigenvector column per eigenvalue required")
        if np.any(np.diff(self.values) > 0):
            raise DomainError("eigenvalues must be non-increasing")


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-|entry| coordinate is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eigen_topk(S, k: int) -> SymmetricSpectrum:
    """Top-k eigenpairs of a symmetric matrix S, descending by eigenvalue.

    S must be symmetric within 1e-8 relative max-norm tolerance and is
    symmetrized before factorization. Raises DomainError for k outside
    [1, n] and NumericalError if the LAPACK solver does not converge.
    """
    S = check_symmetric(S)
    n = S.shape[0]
    if not 1 <= k <= n:
        raise DomainError(f"k must be in [1, {n}], got {k}")
    try:
        values, vectors = scipy.linalg.eigh(S)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - hard to trigger
        raise NumericalError(f"symmetric eigensolver failed on {n}x{n} input: {exc}") from exc
    # ascending from LAPACK; reverse and truncate
    values = values[::-1][:k].copy()
    vectors = _fix_signs(vectors[:, ::-1][:, :k].copy())
    return SymmetricSpectrum(values=values, vectors=vectors)


def default_kmax(n: int, p: int, cap: int = 20) -> int:
    """Upper bound for the factor count search: min(cap, min(n, p) // 2), at least 1."""
    return max(1, min(cap, min(n, p) // 2))


def eigenvalue_ratio_khat(values, kmax: int) -> int:
    """Estimate the number of factors as argmax_k values[k-1] / values[k], k <= kmax.

    ``values`` must be a non-increasing eigenvalue sequence with at least
    kmax + 1 entries. Eigenvalues are floored at RATIO_FLOOR * values[0]
    before dividing, so a rank-deficient spectrum cannot produce inf/NaN;
    ties break toward the smallest k.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise DomainError("values must be a 1-d sequence")
    if kmax < 1:
        raise DomainError(f"kmax must be >= 1, got {kmax}")
    if values.shape[0] < kmax + 1:
        raise DomainError(
            f"need at least kmax+1 = {kmax + 1} eigenvalues, got {values.shape[0]}"
        )
    if np.any(np.diff(values) > 1e-9 * max(abs(values[0]), 1.0)):
        raise DomainError("values must be non-increasing")
    if values[0] <= 0:
        raise DegenerateDataError("leading eigenvalue is non-positive")
    floored = np.maximum(values[: kmax + 1], RATIO_FLOOR * values[0])
    ratios = floored[:-1] / floored[1:]
    return int(np.argmax(ratios)) + 1
