"""Test statistics and decisions for factor-regression adequacy.

Three tests of the null "no idiosyncratic contribution to the response":

* max-type: the largest squared standardized coordinate score, calibrated
  by a Gumbel limit; sensitive to a few strong signals.
* quadratic-type: a studentized U-statistic aggregating pairwise
  residual-weighted inner products of idiosyncratic rows, calibrated by a
  normal limit; sensitive to many weak signals.
* Fisher-adaptive: -2 times the summed log p-values of the two tests,
  calibrated by chi-square with 4 degrees of freedom; their asymptotic
  independence makes the combination valid whatever the sparsity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DegenerateDataError, DomainError, StructuralError
from .factor_model import FactorFit
from .validation import as_matrix, as_vector

# Lower clamp for p-values so log-combination stays finite. An
# astronomically small p-value still rejects; it never faults.
P_FLOOR = 1e-300

# Relative floor for the per-coordinate variance estimates; a coordinate
# below it cannot be standardized meaningfully.
SIGMA_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StatisticSet:
    """All raw statistics computed from one fitted dataset."""

    s_tilde_sq: float        # max-type statistic (largest squared score)
    per_coord: np.ndarray    # (p,) standardized coordinate scores
    t_n: float               # quadratic-type U-statistic
    trace_hat: float         # estimate of tr(Sigma_u^2)
    sigma_eps_sq: float      # mean squared residual
    m_n: float               # studentized quadratic statistic


def max_statistic(Uhat, residuals) -> tuple[float, np.ndarray]:
    """Standardized max-type statistic and the per-coordinate scores.

    score_j = sum_i Uhat[i, j] * e_i / (sqrt(n) * sigma_j) with
    sigma_j^2 = n^-1 sum_i Uhat[i, j]^2 e_i^2. Raises DegenerateDataError
    when the residuals vanish or some coordinate's variance estimate
    falls below the relative floor.
    """
    Uhat = as_matrix(Uhat, "Uhat")
    e = as_vector(residuals, "residuals")
    n, p = Uhat.shape
    if e.shape[0] != n:
        raise StructuralError(f"Uhat has {n} rows but residuals has length {e.shape[0]}")
    if n < 2:
        raise DomainError("need n >= 2 observations")

    e_sq_mean = float(np.mean(e**2))
    if e_sq_mean == 0.0:
        raise DegenerateDataError(
            "residuals are identically zero (response lies in the factor span); "
            "coordinate scores cannot be standardized"
        )
    sigma_sq = np.mean(Uhat**2 * e[:, None] ** 2, axis=0)
    col_scale = np.mean(Uhat**2, axis=0)
    floor = SIGMA_FLOOR * e_sq_mean * (col_scale + 1.0)
    bad = np.flatnonzero(sigma_sq < floor)
    if bad.size:
        j = int(bad[0])
        raise DegenerateDataError(
            f"variance estimate for coordinate {j} is degenerate "
            f"({sigma_sq[j]:.3e} below floor {floor[j]:.3e})"
        )
    per_coord = (Uhat.T @ e) / (math.sqrt(n) * np.sqrt(sigma_sq))
    s_tilde_sq = float(np.max(per_coord**2))
    return s_tilde_sq, per_coord


def quad_statistic(Uhat, residuals) -> float:
    """Quadratic-type statistic: pairwise sum of e_i e_j <u_i, u_j> over i != j,
    divided by n(n-1).

    Computed in closed form as (||Uhat^T e||^2 - sum_i e_i^2 ||u_i||^2) / (n(n-1)),
    which is algebraically identical to the double loop but O(np).
    """
    Uhat = as_matrix(Uhat, "Uhat")
    e = as_vector(residuals, "residuals")
    n = Uhat.shape[0]
    if e.shape[0] != n:
        raise StructuralError(f"Uhat has {n} rows but residuals has length {e.shape[0]}")
    if n < 2:
        raise DomainError("need n >= 2 observations")
    cross = Uhat.T @ e
    diag = np.sum(e**2 * np.sum(Uhat**2, axis=1))
    return float((cross @ cross - diag) / (n * (n - 1)))


def trace_estimator(Uhat) -> float:
    """Estimate tr(Sigma_u^2) as the mean of (u_i^T u_j)^2 over ordered pairs i != j."""
    Uhat = as_matrix(Uhat, "Uhat")
    n = Uhat.shape[0]
    if n < 2:
        raise DomainError("need n >= 2 observations")
    G = Uhat @ Uhat.T
    off_sq = float(np.sum(G**2) - np.sum(np.diag(G) ** 2))
    return off_sq / (n * (n - 1))


def noise_variance(residuals) -> float:
    """Mean squared residual, the plug-in noise variance estimate."""
    e = as_vector(residuals, "residuals")
    return float(np.mean(e**2))


def m_statistic(t_n: float, trace_hat: float, sigma_eps_sq: float, n: int) -> float:
    """Studentized quadratic statistic n * t_n / sqrt(2 * trace_hat * sigma_eps_sq^2)."""
    if trace_hat <= 0:
        raise DegenerateDataError(f"trace estimate must be positive, got {trace_hat}")
    if sigma_eps_sq <= 0:
        raise DegenerateDataError(f"noise variance must be positive, got {sigma_eps_sq}")
    return float(n * t_n / math.sqrt(2.0 * trace_hat * sigma_eps_sq**2))


def compute_statistics(fit: FactorFit) -> StatisticSet:
    """All statistics for one FactorFit.

    Raises DegenerateDataError when the residuals are zero at working
    precision relative to the response (the response lies in the factor
    span), in which case no test statistic is meaningful.
    """
    y = fit.Fhat @ fit.gamma_hat + fit.residuals
    if float(np.mean(fit.residuals**2)) <= 1e-20 * float(np.mean(y**2)):
        raise DegenerateDataError(
            "residuals are numerically zero relative to the response "
            "(response lies in the factor span)"
        )
    s_tilde_sq, per_coord = max_statistic(fit.Uhat, fit.residuals)
    t_n = quad_statistic(fit.Uhat, fit.residuals)
    trace_hat = trace_estimator(fit.Uhat)
    sigma_eps_sq = noise_variance(fit.residuals)
    m_n = m_statistic(t_n, trace_hat, sigma_eps_sq, fit.n)
    return StatisticSet(
        s_tilde_sq=s_tilde_sq,
        per_coord=per_coord,
        t_n=t_n,
        trace_hat=trace_hat,
        sigma_eps_sq=sigma_eps_sq,
        m_n=m_n,
    )


# ---------------------------------------------------------------------------
# Tail distributions
# ---------------------------------------------------------------------------

def gumbel_cdf(y: float) -> float:
    """CDF of the calibrating Gumbel law: exp(-exp(-y/2) / sqrt(pi))."""
    return math.exp(-math.exp(-y / 2.0) / math.sqrt(math.pi))


def gumbel_survival(y: float) -> float:
    """1 - gumbel_cdf(y), evaluated without cancellation for large y."""
    a = math.exp(-y / 2.0) / math.sqrt(math.pi)
    return -math.expm1(-a)


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def std_normal_survival(x: float) -> float:
    """1 - Phi(x), stable in the far right tail."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def chi4_survival(x: float) -> float:
    """Survival function of chi-square with 4 degrees of freedom: exp(-x/2)(1 + x/2)."""
    if x < 0:
        raise DomainError(f"chi-square statistic must be >= 0, got {x}")
    return math.exp(-x / 2.0) * (1.0 + x / 2.0)


def critical_value_max(alpha: float, p: int) -> float:
    """Rejection threshold for the max-type statistic at level alpha.

    c(alpha) = 2 log p - log log p + q_alpha where q_alpha is the upper
    alpha-quantile of the calibrating Gumbel law.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    if p < 3:
        raise DomainError(f"need p >= 3 for the Gumbel centering, got p = {p}")
    q_alpha = -math.log(math.pi) - 2.0 * math.log(math.log(1.0 / (1.0 - alpha)))
    return 2.0 * math.log(p) - math.log(math.log(p)) + q_alpha


def std_normal_quantile(alpha: float) -> float:
    """Upper alpha-quantile z(alpha) of N(0, 1) by bisection of the CDF.

    Bisection against std_normal_cdf to 1e-12, so the decision rule is an
    exact inverse of the CDF used everywhere else.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    target = 1.0 - alpha
    lo, hi = -40.0, 40.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if std_normal_cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def chi4_quantile(alpha: float) -> float:
    """Upper alpha-quantile of chi-square(4) by bisection of the survival function."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    lo, hi = 0.0, 4000.0
    while hi - lo > 1e-12 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if chi4_survival(mid) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# P-values and decisions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PValueSet:
    """P-values of the three tests plus the Fisher combination statistic."""

    p_max: float
    p_quad: float
    p_fisher: float
    f_n: float


def _clamp(p: float) -> float:
    return min(1.0, max(P_FLOOR, p))


def p_values(stats: StatisticSet, p: int) -> PValueSet:
    """P-values for the max-type, quadratic-type and Fisher-adaptive tests.

    The max-type p-value uses the survival form of the Gumbel CDF so a
    large statistic cannot cancel to 0 prematurely; all p-values are
    clamped to [1e-300, 1] before the logs are combined.
    """
    if p < 3:
        raise DomainError(f"need p >= 3 for the Gumbel centering, got p = {p}")
    centered = stats.s_tilde_sq - 2.0 * math.log(p) + math.log(math.log(p))
    p_max = _clamp(gumbel_survival(centered))
    p_quad = _clamp(std_normal_survival(stats.m_n))
    f_n = -2.0 * (math.log(p_quad) + math.log(p_max))
    p_fisher = _clamp(chi4_survival(f_n))
    return PValueSet(p_max=p_max, p_quad=p_quad, p_fisher=p_fisher, f_n=f_n)


@dataclass(frozen=True)
class TestReport:
    """Statistics, p-values and reject decisions for one dataset."""

    statistics: StatisticSet
    pvalues: PValueSet
    reject_max: bool
    reject_quad: bool
    reject_fisher: bool
    alpha: float
    n: int
    p: int
    k: int
    k_estimated: bool
    provenance: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """Flat JSON-ready record with the documented field names."""
        out = {
            "s_tilde_sq": self.statistics.s_tilde_sq,
            "t_n": self.statistics.t_n,
            "trace_hat": self.statistics.trace_hat,
            "sigma_eps_sq": self.statistics.sigma_eps_sq,
            "m_n": self.statistics.m_n,
            "p_max": self.pvalues.p_max,
            "p_quad": self.pvalues.p_quad,
            "p_fisher": self.pvalues.p_fisher,
            "f_n": self.pvalues.f_n,
            "reject_max": self.reject_max,
            "reject_quad": self.reject_quad,
            "reject_fisher": self.reject_fisher,
            "alpha": self.alpha,
            "n": self.n,
            "p": self.p,
            "k": self.k,
            "k_estimated": self.k_estimated,
        }
        if self.provenance:
            out["provenance"] = dict(self.provenance)
        return out


def run_tests(fit: FactorFit, alpha: float = 0.05,
              provenance: dict[str, Any] | None = None) -> TestReport:
    """Compute all statistics, p-values and level-alpha decisions for a fit.

    Decision rules: max-type rejects when s_tilde_sq >= c(alpha); the
    quadratic test when m_n >= z(alpha); the Fisher test when
    f_n >= the upper alpha-quantile of chi-square(4).
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    stats = compute_statistics(fit)
    pvals = p_values(stats, fit.p)
    return TestReport(
        statistics=stats,
        pvalues=pvals,
        reject_max=bool(stats.s_tilde_sq >= critical_value_max(alpha, fit.p)),
        reject_quad=bool(stats.m_n >= std_normal_quantile(alpha)),
        reject_fisher=bool(pvals.f_n >= chi4_quantile(alpha)),
        alpha=alpha,
        n=fit.n,
        p=fit.p,
        k=fit.K,
        k_estimated=fit.k_estimated,
        provenance=dict(provenance or {}),
    )
