"""Monte Carlo harness: synthetic data generation, rejection rates, power
curves, and null-calibration diagnostics.

Every replication draws from its own counter-based RNG stream keyed by
(base_seed, rep_index), so results are bit-identical no matter how the
replications are scheduled across workers.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .adequacy import run_tests
from .errors import ConfigError, DegenerateDataError, DomainError
from .factor_model import DataMatrixPair, fit_factor_model
from .spectra import default_kmax

# Abort a cell when more than this fraction of replications fail:
# silently skipping failed draws would bias the rejection rates.
MAX_FAILURE_FRACTION = 0.01

SIGMA_U_KINDS = ("identity", "ar1")
BETA_PATTERNS = ("fixed_omega", "norm_fixed")
K_MODES = ("known", "estimated")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaPattern:
    """Sparsity pattern of the idiosyncratic coefficient vector.

    fixed_omega: first s entries equal omega. norm_fixed: first s entries
    equal target / sqrt(s), so the vector's l2 norm is target at every s.
    """

    pattern: str = "fixed_omega"
    s: int = 0
    omega: float = 0.0
    target: float = 0.0

    def is_null(self) -> bool:
        if self.s == 0:
            return True
        if self.pattern == "fixed_omega":
            return self.omega == 0.0
        return self.target == 0.0


@dataclass(frozen=True)
class SimCell:
    """One Monte Carlo configuration and everything needed to reproduce it."""

    n: int = 200
    p: int = 100
    k: int = 2
    sigma_u: str = "identity"
    rho: float = 0.3
    beta: BetaPattern = field(default_factory=BetaPattern)
    gamma_star: tuple[float, ...] = (0.5, 0.5)
    eps_sd: float = 0.5
    reps: int = 500
    seed: int = 0
    alpha: float = 0.05
    k_mode: str = "known"
    kmax: int | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.p < 3:
            raise ConfigError(f"p must be >= 3, got {self.p}")
        if not 1 <= self.k < self.n:
            raise ConfigError(f"k must satisfy 1 <= k < n, got {self.k}")
        if self.sigma_u not in SIGMA_U_KINDS:
            raise ConfigError(f"sigma_u must be one of {SIGMA_U_KINDS}, got {self.sigma_u!r}")
        if not abs(self.rho) < 1:
            raise ConfigError(f"|rho| must be < 1, got {self.rho}")
        if self.beta.pattern not in BETA_PATTERNS:
            raise ConfigError(
                f"beta.pattern must be one of {BETA_PATTERNS}, got {self.beta.pattern!r}"
            )
        if not 0 <= self.beta.s <= self.p:
            raise ConfigError(f"beta.s must be in [0, p], got {self.beta.s}")
        if len(self.gamma_star) != self.k:
            raise ConfigError(
                f"gamma_star has length {len(self.gamma_star)} but k = {self.k}"
            )
        if self.eps_sd <= 0:
            raise ConfigError(f"eps_sd must be > 0, got {self.eps_sd}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.k_mode not in K_MODES:
            raise ConfigError(f"k_mode must be one of {K_MODES}, got {self.k_mode!r}")
        if self.kmax is not None and self.kmax < 1:
            raise ConfigError(f"kmax must be >= 1, got {self.kmax}")

    def effective_kmax(self) -> int:
        return self.kmax if self.kmax is not None else default_kmax(self.n, self.p)

    def resolved_omega(self) -> float:
        """The per-coordinate signal size implied by the beta pattern."""
        if self.beta.pattern == "norm_fixed":
            return self.beta.target / math.sqrt(self.beta.s) if self.beta.s else 0.0
        return self.beta.omega if self.beta.s else 0.0


@dataclass(frozen=True)
class CellResult:
    """Rejection-rate summary of one cell."""

    cell: SimCell
    rate_max: float
    rate_quad: float
    rate_fisher: float
    se_max: float
    se_quad: float
    se_fisher: float
    mean_khat: float
    reps_completed: int
    n_failed: int
    wall_time: float


@dataclass(frozen=True)
class NullDiagnostics:
    """Null-calibration diagnostics across replications."""

    ks_quad_normal: float    # KS distance of the studentized quadratic stat vs N(0,1)
    ks_max_gumbel: float     # KS distance of the centered max stat vs its Gumbel law
    correlation: float       # sample correlation between the two statistics
    reps: int


# ---------------------------------------------------------------------------
# Data generation
# ---------------------------------------------------------------------------

def make_beta(p: int, pattern: BetaPattern) -> np.ndarray:
    """Coefficient vector for one cell: first s entries carry the signal."""
    if not 0 <= pattern.s <= p:
        raise DomainError(f"s must be in [0, {p}], got {pattern.s}")
    beta = np.zeros(p)
    if pattern.s == 0:
        if pattern.pattern == "norm_fixed" and pattern.target > 0:
            raise DomainError("norm_fixed with s = 0 cannot reach a positive target norm")
        return beta
    if pattern.pattern == "fixed_omega":
        beta[: pattern.s] = pattern.omega
    elif pattern.pattern == "norm_fixed":
        beta[: pattern.s] = pattern.target / math.sqrt(pattern.s)
    else:
        raise DomainError(f"unknown beta pattern {pattern.pattern!r}")
    return beta


def sample_ar1(p: int, rho: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Stationary AR(1) rows with unit marginal variance and lag-1 correlation rho.

    u_1 = z_1, u_j = rho * u_{j-1} + sqrt(1 - rho^2) * z_j with z iid N(0,1);
    exact target covariance rho^{|j-k|} in law, O(p) per row (no Cholesky).
    """
    if not abs(rho) < 1:
        raise DomainError(f"|rho| must be < 1, got {rho}")
    shape = (p,) if size is None else (size, p)
    z = rng.standard_normal(shape)
    if rho == 0.0:
        return z
    u = np.empty_like(z)
    scale = math.sqrt(1.0 - rho * rho)
    u[..., 0] = z[..., 0]
    for j in range(1, p):
        u[..., j] = rho * u[..., j - 1] + scale * z[..., j]
    return u


def _rep_rng(seed: int, rep_index: int) -> np.random.Generator:
    """Counter-based stream for one replication: Philox keyed by (seed, rep)."""
    key = np.array([seed, rep_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def gen_dataset(cell: SimCell, rep_index: int):
    """One synthetic dataset, a pure function of (cell.seed, rep_index).

    Draw order is fixed (factors, loadings, idiosyncratic, noise) and the
    loadings are redrawn every replication. Returns (pair, truth) where
    truth carries the generating matrices for moment checks.
    """
    rng = _rep_rng(cell.seed, rep_index)
    n, p, k = cell.n, cell.p, cell.k
    F = rng.standard_normal((n, k))
    B = rng.uniform(-1.0, 1.0, size=(p, k))
    if cell.sigma_u == "identity":
        U = rng.standard_normal((n, p))
    else:
        U = sample_ar1(p, cell.rho, rng, size=n)
    eps = cell.eps_sd * rng.standard_normal(n)
    beta = make_beta(p, cell.beta)
    gamma = np.asarray(cell.gamma_star, dtype=np.float64)
    X = F @ B.T + U
    Y = F @ gamma + U @ beta + eps
    truth = {"F": F, "B": B, "U": U, "eps": eps, "beta": beta, "gamma": gamma}
    return DataMatrixPair(X=X, Y=Y), truth


# ---------------------------------------------------------------------------
# Replication engine
# ---------------------------------------------------------------------------

# per-rep record: (ok, reject_max, reject_quad, reject_fisher, s_tilde_sq,
#                  m_n, k_used) -- failures carry the error message instead.

def _replicate_one(cell: SimCell, rep_index: int):
    pair, _ = gen_dataset(cell, rep_index)
    if cell.k_mode == "known":
        fit = fit_factor_model(pair, K=cell.k)
    else:
        fit = fit_factor_model(pair, K=None, kmax=cell.effective_kmax())
    report = run_tests(fit, alpha=cell.alpha)
    return (
        True,
        report.reject_max,
        report.reject_quad,
        report.reject_fisher,
        report.statistics.s_tilde_sq,
        report.statistics.m_n,
        report.k,
    )


def _replicate_range(cell: SimCell, start: int, stop: int) -> list:
    out = []
    for rep in range(start, stop):
        try:
            out.append(_replicate_one(cell, rep))
        except DegenerateDataError as exc:
            out.append((False, rep, str(exc)))
    return out


def _run_replications(cell: SimCell, threads: int = 1) -> list:
    """Per-rep records in replication order, independent of worker count."""
    if threads <= 1 or cell.reps == 1:
        return _replicate_range(cell, 0, cell.reps)
    chunk = max(1, math.ceil(cell.reps / (threads * 4)))
    bounds = [(s, min(s + chunk, cell.reps)) for s in range(0, cell.reps, chunk)]
    results: list = [None] * cell.reps
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_replicate_range, cell, s, t) for s, t in bounds]
        for (s, t), fut in zip(bounds, futures):
            results[s:t] = fut.result()
    return results


def _split_records(cell: SimCell, records: list):
    ok = [r for r in records if r[0]]
    failures = [(r[1], r[2]) for r in records if not r[0]]
    if len(failures) > MAX_FAILURE_FRACTION * cell.reps:
        examples = "; ".join(f"rep {i}: {msg}" for i, msg in failures[:3])
        raise DegenerateDataError(
            f"{len(failures)} of {cell.reps} replications failed "
            f"(> {MAX_FAILURE_FRACTION:.0%} tolerated): {examples}"
        )
    if not ok:
        raise DegenerateDataError("all replications failed")
    return ok, failures


def _rate_and_se(flags: np.ndarray, n: int) -> tuple[float, float]:
    rate = float(np.count_nonzero(flags)) / n
    return rate, math.sqrt(rate * (1.0 - rate) / n)


def run_cell(cell: SimCell, threads: int = 1) -> CellResult:
    """Rejection rates for one cell over cell.reps replications.

    Failed replications (degenerate draws) are counted and reported; more
    than MAX_FAILURE_FRACTION of them aborts the cell.
    """
    t0 = time.perf_counter()
    records = _run_replications(cell, threads)
    ok, failures = _split_records(cell, records)
    n_ok = len(ok)
    rej = np.array([[r[1], r[2], r[3]] for r in ok], dtype=bool)
    khat = np.array([r[6] for r in ok], dtype=float)
    rate_max, se_max = _rate_and_se(rej[:, 0], n_ok)
    rate_quad, se_quad = _rate_and_se(rej[:, 1], n_ok)
    rate_fisher, se_fisher = _rate_and_se(rej[:, 2], n_ok)
    return CellResult(
        cell=cell,
        rate_max=rate_max,
        rate_quad=rate_quad,
        rate_fisher=rate_fisher,
        se_max=se_max,
        se_quad=se_quad,
        se_fisher=se_fisher,
        mean_khat=float(khat.mean()),
        reps_completed=n_ok,
        n_failed=len(failures),
        wall_time=time.perf_counter() - t0,
    )


def power_curve(cell: SimCell, points: list[tuple[int, float]],
                threads: int = 1, progress=None) -> list[CellResult]:
    """One CellResult per (s, omega) grid point, in grid order.

    Each point reuses the template cell with a fixed_omega pattern at
    (s, omega) and the same base seed, so the points share common random
    numbers and the curve is smooth in omega.
    """
    if not points:
        raise ConfigError("grid must contain at least one point")
    results = []
    for s, omega in points:
        point_cell = replace(
            cell, beta=BetaPattern(pattern="fixed_omega", s=int(s), omega=float(omega))
        )
        result = run_cell(point_cell, threads)
        results.append(result)
        if progress is not None:
            progress(result)
    return results


# ---------------------------------------------------------------------------
# Null-calibration diagnostics
# ---------------------------------------------------------------------------

def ks_distance(sample: np.ndarray, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance against a callable CDF."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.shape[0]
    F = np.array([cdf(v) for v in x])
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return float(max(np.max(grid_hi - F), np.max(F - grid_lo)))


def ks_critical_value(alpha: float, n: int) -> float:
    """Asymptotic KS critical value sqrt(-ln(alpha/2) / 2) / sqrt(n)."""
    return math.sqrt(-math.log(alpha / 2.0) / 2.0) / math.sqrt(n)


def null_joint_diagnostics(cell: SimCell, threads: int = 1) -> NullDiagnostics:
    """KS distances and correlation of the two statistics under the null.

    The quadratic statistic is compared with N(0,1); the max statistic is
    centered by 2 log p - log log p and compared with the Gumbel law.
    Raises DomainError when the cell is not a null configuration.
    """
    from .adequacy import gumbel_cdf, std_normal_cdf

    if not cell.beta.is_null():
        raise DomainError("null diagnostics require a beta pattern that is identically zero")
    records = _run_replications(cell, threads)
    ok, _ = _split_records(cell, records)
    s_tilde_sq = np.array([r[4] for r in ok])
    m_n = np.array([r[5] for r in ok])
    centered = s_tilde_sq - 2.0 * math.log(cell.p) + math.log(math.log(cell.p))
    return NullDiagnostics(
        ks_quad_normal=ks_distance(m_n, std_normal_cdf),
        ks_max_gumbel=ks_distance(centered, gumbel_cdf),
        correlation=float(np.corrcoef(m_n, s_tilde_sq)[0, 1]),
        reps=len(ok),
    )


# ---------------------------------------------------------------------------
# Config mapping and CSV emission
# ---------------------------------------------------------------------------

_CELL_KEYS = {
    "n", "p", "k", "k_mode", "kmax", "sigma_u", "rho", "beta",
    "gamma_star", "eps_sd", "reps", "seed", "alpha",
}
_BETA_KEYS = {"pattern", "s", "omega", "target"}
_GRID_KEYS = {"kind", "s", "omega", "points"}


def cell_from_mapping(cfg: dict) -> SimCell:
    """Build a SimCell from a parsed config mapping, rejecting unknown keys."""
    if not isinstance(cfg, dict):
        raise ConfigError("simulation config must be a mapping")
    unknown = set(cfg) - _CELL_KEYS - {"grid"}
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")
    kwargs = {k: v for k, v in cfg.items() if k in _CELL_KEYS and k != "beta"}
    beta_cfg = cfg.get("beta", {})
    if not isinstance(beta_cfg, dict):
        raise ConfigError("beta must be a mapping")
    unknown = set(beta_cfg) - _BETA_KEYS
    if unknown:
        raise ConfigError(f"unknown beta key {sorted(unknown)[0]!r}")
    kwargs["beta"] = BetaPattern(**beta_cfg)
    if "gamma_star" in kwargs:
        kwargs["gamma_star"] = tuple(float(g) for g in kwargs["gamma_star"])
    try:
        return SimCell(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def grid_from_mapping(cfg: dict, cell: SimCell) -> list[tuple[int, float]]:
    """Resolve a grid section into concrete (s, omega) points.

    kind "omega": fixed s, omega list. kind "sparsity": s list with
    omega = beta.target / sqrt(s) (requires a norm_fixed template).
    kind "points": explicit [s, omega] pairs.
    """
    if not isinstance(cfg, dict):
        raise ConfigError("grid must be a mapping")
    unknown = set(cfg) - _GRID_KEYS
    if unknown:
        raise ConfigError(f"unknown grid key {sorted(unknown)[0]!r}")
    kind = cfg.get("kind", "points")
    if kind == "omega":
        s = int(cfg.get("s", 1))
        omegas = cfg.get("omega")
        if not omegas:
            raise ConfigError("grid kind 'omega' requires a non-empty omega list")
        return [(s, float(w)) for w in omegas]
    if kind == "sparsity":
        svals = cfg.get("s")
        if not svals:
            raise ConfigError("grid kind 'sparsity' requires a non-empty s list")
        if cell.beta.pattern != "norm_fixed" or cell.beta.target <= 0:
            raise ConfigError(
                "grid kind 'sparsity' requires a norm_fixed beta pattern with target > 0"
            )
        return [(int(s), cell.beta.target / math.sqrt(int(s))) for s in svals]
    if kind == "points":
        pts = cfg.get("points")
        if not pts:
            raise ConfigError("grid kind 'points' requires a non-empty points list")
        return [(int(s), float(w)) for s, w in pts]
    raise ConfigError(f"unknown grid kind {kind!r}")


RESULT_CSV_HEADER = (
    "s,omega,n,p,sigma_u,rate_max,rate_quad,rate_fisher,"
    "se_max,se_quad,se_fisher,reps,seed"
)


def result_csv_row(result: CellResult) -> str:
    """One CSV row per the documented schema, deterministically formatted."""
    c = result.cell
    return ",".join([
        str(c.beta.s),
        format(c.resolved_omega(), ".10g"),
        str(c.n),
        str(c.p),
        c.sigma_u,
        format(result.rate_max, ".6f"),
        format(result.rate_quad, ".6f"),
        format(result.rate_fisher, ".6f"),
        format(result.se_max, ".6f"),
        format(result.se_quad, ".6f"),
        format(result.se_fisher, ".6f"),
        str(c.reps),
        str(c.seed),
    ])
