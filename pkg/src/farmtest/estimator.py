"""Sklearn-style front end so the test plugs into the usual fit/params idiom."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .adequacy import TestReport, run_tests
from .factor_model import DataMatrixPair, fit_factor_model
from .validation import as_matrix, as_vector, check_paired


class FactorAdequacyTest(BaseEstimator):
    """Tests whether a pure latent-factor regression explains the response.

    fit(X, y) estimates the factor structure of X, regresses y on the
    estimated factors, and runs three tests of the null "the idiosyncratic
    part of X carries no signal": a max-type test (sparse alternatives),
    a quadratic-type test (dense alternatives), and their Fisher
    combination (adaptive to unknown sparsity).

    Parameters
    ----------
    k : int or None
        Number of latent factors. None selects it by the eigenvalue
        ratio estimator.
    kmax : int or None
        Search bound for the ratio estimator; default min(20, min(n, p)//2).
    alpha : float
        Significance level for the reject decisions.

    Attributes
    ----------
    report_ : TestReport with statistics, p-values and decisions.
    factors_, loadings_, idiosyncratic_, gamma_, residuals_ : the fitted
        factor regression, in the usual n^-1-orthonormal factor scaling.
    k_ : int, factor count used; k_estimated_ : whether it was data-driven.

    Usage::

        test = FactorAdequacyTest(alpha=0.05).fit(X, y)
        test.pvalues_["fisher"], test.rejects_["fisher"]
    """

    def __init__(self, k: int | None = None, kmax: int | None = None,
                 alpha: float = 0.05):
        self.k = k
        self.kmax = kmax
        self.alpha = alpha

    def fit(self, X, y) -> "FactorAdequacyTest":
        X = as_matrix(X, "X")
        y = as_vector(y, "y")
        check_paired(X, y)
        fit = fit_factor_model(DataMatrixPair(X=X, Y=y), K=self.k, kmax=self.kmax)
        report = run_tests(fit, alpha=self.alpha)
        self.factor_fit_ = fit
        self.report_ = report
        self.factors_ = fit.Fhat
        self.loadings_ = fit.Bhat
        self.idiosyncratic_ = fit.Uhat
        self.gamma_ = fit.gamma_hat
        self.residuals_ = fit.residuals
        self.eigenvalues_ = fit.eigvals
        self.k_ = fit.K
        self.k_estimated_ = fit.k_estimated
        self.statistics_ = {
            "s_tilde_sq": report.statistics.s_tilde_sq,
            "m_n": report.statistics.m_n,
            "t_n": report.statistics.t_n,
        }
        self.pvalues_ = {
            "max": report.pvalues.p_max,
            "quad": report.pvalues.p_quad,
            "fisher": report.pvalues.p_fisher,
        }
        self.rejects_ = {
            "max": report.reject_max,
            "quad": report.reject_quad,
            "fisher": report.reject_fisher,
        }
        return self

    def transform(self, X) -> np.ndarray:
        """Factor scores for rows of X: least-squares regression on the
        fitted loadings, f_i = (B^T B)^-1 B^T x_i."""
        self._check_fitted()
        X = as_matrix(X, "X")
        if X.shape[1] != self.loadings_.shape[0]:
            raise ValueError(
                f"X has {X.shape[1]} columns but the fit used {self.loadings_.shape[0]}"
            )
        gram = self.loadings_.T @ self.loadings_
        return np.linalg.solve(gram, self.loadings_.T @ X.T).T

    def predict(self, X) -> np.ndarray:
        """Response predicted by the factor regression at the scores of X.

        On the training sample this differs slightly from factors_ @ gamma_
        because scores come from the loading regression rather than the
        Gram eigenvectors.
        """
        return self.transform(X) @ self.gamma_

    def summary(self) -> str:
        self._check_fitted()
        r = self.report_
        lines = [
            f"factor adequacy test (n={r.n}, p={r.p}, k={r.k}"
            + (", estimated" if r.k_estimated else ", given")
            + f", alpha={r.alpha:g})",
            f"  max-type   : stat={r.statistics.s_tilde_sq:.4f}  "
            f"p={r.pvalues.p_max:.4g}  {'reject' if r.reject_max else 'accept'}",
            f"  quad-type  : stat={r.statistics.m_n:.4f}  "
            f"p={r.pvalues.p_quad:.4g}  {'reject' if r.reject_quad else 'accept'}",
            f"  fisher     : stat={r.pvalues.f_n:.4f}  "
            f"p={r.pvalues.p_fisher:.4g}  {'reject' if r.reject_fisher else 'accept'}",
        ]
        return "\n".join(lines)

    def _check_fitted(self):
        if not hasattr(self, "report_"):
            raise RuntimeError("estimator is not fitted; call fit(X, y) first")

    @property
    def test_report(self) -> TestReport:
        self._check_fitted()
        return self.report_
