import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)


def gaussian_factor_design(rng, n=200, p=100, k=2, beta=None, eps_sd=0.5,
                           gamma=(0.5, 0.5)):
    """One draw from the simulation design: X = F B^T + U, Y = F gamma + U beta + eps."""
    F = rng.standard_normal((n, k))
    B = rng.uniform(-1.0, 1.0, (p, k))
    U = rng.standard_normal((n, p))
    eps = eps_sd * rng.standard_normal(n)
    X = F @ B.T + U
    gamma = np.asarray(gamma, dtype=float)
    Y = F @ gamma + eps
    if beta is not None:
        Y = Y + U @ np.asarray(beta, dtype=float)
    return X, Y


def orthonormal_factor_matrix(rng, n, k):
    """F with exactly n^-1 F^T F = I_k (QR of a Gaussian draw, scaled)."""
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return np.sqrt(n) * q
