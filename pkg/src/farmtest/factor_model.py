"""Latent factor estimation for the factor-augmented regression model.

Given observed covariates X (n x p) and response Y (n), the factors are
the sqrt(n)-scaled top eigenvectors of the Gram matrix X X^T, loadings are
the regression of covariates on factors, and the idiosyncratic matrix is
the residual of X after projecting out the factor space. The response is
regressed on the estimated factors only; the adequacy tests downstream ask
whether that regression is enough.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, DomainError, StructuralError
from .spectra import default_kmax, eigenvalue_ratio_khat, sym_eigen_topk
from .validation import as_matrix, as_vector, check_paired


@dataclass(frozen=True)
class DataMatrixPair:
    """Observed covariate matrix X (n x p) and response vector Y (n)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        Y = as_vector(self.Y, "Y")
        check_paired(X, Y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class FactorFit:
    """Estimated factor structure and factor regression for one dataset.

    Satisfies, up to floating point: n^-1 Fhat^T Fhat = I_K,
    Fhat^T Uhat = 0, Fhat^T residuals = 0, and Uhat = X - Fhat Bhat^T.
    """

    Fhat: np.ndarray       # (n, K) factors, n^-1-orthonormal columns
    Bhat: np.ndarray       # (p, K) loadings
    Uhat: np.ndarray       # (n, p) idiosyncratic estimates
    gamma_hat: np.ndarray  # (K,) factor regression coefficient
    residuals: np.ndarray  # (n,) Y - Fhat @ gamma_hat
    eigvals: np.ndarray    # (K,) leading eigenvalues of X X^T
    K: int
    k_estimated: bool = field(default=False)

    @property
    def n(self) -> int:
        return self.Fhat.shape[0]

    @property
    def p(self) -> int:
        return self.Uhat.shape[1]


def estimate_factors(X, K: int):
    """Estimate factors, loadings and idiosyncratic components for a fixed K.

    Returns (Fhat, Bhat, Uhat, eigvals). Fhat is sqrt(n) times the top-K
    eigenvectors of X X^T (sign-fixed), Bhat = n^-1 X^T Fhat, and
    Uhat = X - Fhat Bhat^T.
    """
    X = as_matrix(X, "X")
    n = X.shape[0]
    if not 1 <= K < n:
        raise DomainError(f"K must satisfy 1 <= K < n = {n}, got {K}")
    if not np.any(X):
        raise DegenerateDataError("X is identically zero; no factor structure to estimate")
    spectrum = sym_eigen_topk(X @ X.T, K)
    Fhat = np.sqrt(n) * spectrum.vectors
    Bhat = (X.T @ Fhat) / n
    Uhat = X - Fhat @ Bhat.T
    return Fhat, Bhat, Uhat, spectrum.values


def fit_gamma(Fhat, Y) -> np.ndarray:
    """Factor regression coefficient gamma_hat = n^-1 Fhat^T Y.

    Relies on the n^-1-orthonormality of Fhat's columns, which makes the
    least-squares solution a plain cross-moment.
    """
    Fhat = as_matrix(Fhat, "Fhat")
    Y = as_vector(Y, "Y")
    if Fhat.shape[0] != Y.shape[0]:
        raise StructuralError(
            f"Fhat has {Fhat.shape[0]} rows but Y has length {Y.shape[0]}"
        )
    return (Fhat.T @ Y) / Fhat.shape[0]


def residualize(Fhat, gamma_hat, Y) -> np.ndarray:
    """Residuals e_i = Y_i - fhat_i^T gamma_hat of the factor regression."""
    Fhat = as_matrix(Fhat, "Fhat")
    gamma_hat = as_vector(gamma_hat, "gamma_hat")
    Y = as_vector(Y, "Y")
    if Fhat.shape[0] != Y.shape[0]:
        raise StructuralError(
            f"Fhat has {Fhat.shape[0]} rows but Y has length {Y.shape[0]}"
        )
    if Fhat.shape[1] != gamma_hat.shape[0]:
        raise StructuralError(
            f"Fhat has {Fhat.shape[1]} columns but gamma_hat has length {gamma_hat.shape[0]}"
        )
    return Y - Fhat @ gamma_hat


def fit_factor_model(pair: DataMatrixPair, K: int | None = None,
                     kmax: int | None = None) -> FactorFit:
    """Full pipeline: select K if not given, then factors, gamma, residuals.

    When K is None the factor count is chosen by the eigenvalue ratio
    estimator over k <= kmax (default min(20, min(n, p) // 2)), and the
    returned fit records that K was estimated. A requested kmax is capped
    at min(n, p) // 2: past that the ratio of near-zero tail eigenvalues
    is meaningless and the estimator would lock onto the rank edge.
    """
    if not isinstance(pair, DataMatrixPair):
        pair = DataMatrixPair(*pair)
    X, Y = pair.X, pair.Y
    n = pair.n

    k_estimated = K is None
    if k_estimated:
        if kmax is None:
            kmax = default_kmax(n, pair.p)
        else:
            kmax = min(kmax, default_kmax(n, pair.p, cap=kmax))
        if kmax + 1 > n:
            raise DomainError(f"kmax + 1 = {kmax + 1} exceeds n = {n}")
        if not np.any(X):
            raise DegenerateDataError("X is identically zero; no factor structure to estimate")
        spectrum = sym_eigen_topk(X @ X.T, kmax + 1)
        K = eigenvalue_ratio_khat(spectrum.values, kmax)
        Fhat = np.sqrt(n) * spectrum.vectors[:, :K]
        Bhat = (X.T @ Fhat) / n
        Uhat = X - Fhat @ Bhat.T
        eigvals = spectrum.values[:K]
    else:
        Fhat, Bhat, Uhat, eigvals = estimate_factors(X, K)

    gamma_hat = fit_gamma(Fhat, Y)
    residuals = residualize(Fhat, gamma_hat, Y)
    return FactorFit(
        Fhat=Fhat,
        Bhat=Bhat,
        Uhat=Uhat,
        gamma_hat=gamma_hat,
        residuals=residuals,
        eigvals=eigvals,
        K=int(K),
        k_estimated=k_estimated,
    )
