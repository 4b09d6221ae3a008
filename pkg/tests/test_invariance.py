"""Invariance properties of the statistics under data transformations."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gaussian_factor_design
from farmtest.adequacy import compute_statistics, p_values, run_tests
from farmtest.factor_model import DataMatrixPair, fit_factor_model


def _pipeline(X, Y, K=2):
    fit = fit_factor_model(DataMatrixPair(X=X, Y=Y), K=K)
    stats = compute_statistics(fit)
    return fit, stats, p_values(stats, fit.p)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_response_scale_invariance(seed):
    rng = np.random.default_rng(seed)
    X, Y = gaussian_factor_design(rng, n=80, p=40)
    c = float(rng.uniform(0.1, 10.0))
    _, base, pv0 = _pipeline(X, Y)
    _, scaled, pv1 = _pipeline(X, c * Y)
    np.testing.assert_allclose(scaled.per_coord, base.per_coord, rtol=1e-10)
    assert scaled.s_tilde_sq == pytest.approx(base.s_tilde_sq, rel=1e-10)
    assert scaled.m_n == pytest.approx(base.m_n, rel=1e-10)
    # T_n and sigma_eps^2 scale by c^2; ratios cancel
    assert scaled.t_n == pytest.approx(c**2 * base.t_n, rel=1e-10)
    assert scaled.sigma_eps_sq == pytest.approx(c**2 * base.sigma_eps_sq, rel=1e-10)
    assert pv1.p_max == pytest.approx(pv0.p_max, rel=1e-9)
    assert pv1.p_quad == pytest.approx(pv0.p_quad, rel=1e-9)
    assert pv1.p_fisher == pytest.approx(pv0.p_fisher, rel=1e-9)


@pytest.mark.parametrize("seed", [4, 5, 6])
def test_joint_row_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    X, Y = gaussian_factor_design(rng, n=60, p=30)
    perm = rng.permutation(60)
    _, base, _ = _pipeline(X, Y)
    _, permuted, _ = _pipeline(X[perm], Y[perm])
    assert permuted.s_tilde_sq == pytest.approx(base.s_tilde_sq, rel=1e-12)
    assert permuted.t_n == pytest.approx(base.t_n, rel=1e-12, abs=1e-15)
    assert permuted.trace_hat == pytest.approx(base.trace_hat, rel=1e-12)
    assert permuted.sigma_eps_sq == pytest.approx(base.sigma_eps_sq, rel=1e-12)
    assert permuted.m_n == pytest.approx(base.m_n, rel=1e-10)
    np.testing.assert_allclose(permuted.per_coord, base.per_coord, rtol=1e-9)


@pytest.mark.parametrize("seed", [7, 8, 9])
def test_covariate_column_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    X, Y = gaussian_factor_design(rng, n=60, p=30)
    perm = rng.permutation(30)
    _, base, _ = _pipeline(X, Y)
    _, permuted, _ = _pipeline(X[:, perm], Y)
    assert permuted.s_tilde_sq == pytest.approx(base.s_tilde_sq, rel=1e-10)
    assert permuted.t_n == pytest.approx(base.t_n, rel=1e-9, abs=1e-14)
    assert permuted.trace_hat == pytest.approx(base.trace_hat, rel=1e-10)
    assert permuted.m_n == pytest.approx(base.m_n, rel=1e-8)
    np.testing.assert_allclose(permuted.per_coord, base.per_coord[perm], rtol=1e-8)


def test_decisions_invariant_under_scaling(rng):
    X, Y = gaussian_factor_design(rng, n=100, p=50, beta=np.r_[0.4, np.zeros(49)])
    fit = fit_factor_model(DataMatrixPair(X=X, Y=Y), K=2)
    base = run_tests(fit)
    scaled = run_tests(fit_factor_model(DataMatrixPair(X=X, Y=100.0 * Y), K=2))
    assert (base.reject_max, base.reject_quad, base.reject_fisher) == (
        scaled.reject_max, scaled.reject_quad, scaled.reject_fisher
    )


@given(
    y=st.floats(min_value=-50.0, max_value=50.0),
    dy=st.floats(min_value=0.0, max_value=50.0),
)
@settings(max_examples=100, deadline=None)
def test_gumbel_cdf_monotone_property(y, dy):
    from farmtest.adequacy import gumbel_cdf

    assert gumbel_cdf(y + dy) >= gumbel_cdf(y)


@given(x=st.floats(min_value=0.0, max_value=200.0), dx=st.floats(min_value=1e-6, max_value=50.0))
@settings(max_examples=100, deadline=None)
def test_chi4_survival_decreasing_property(x, dx):
    from farmtest.adequacy import chi4_survival

    assert chi4_survival(x + dx) <= chi4_survival(x)


@given(x=st.floats(min_value=-8.0, max_value=8.0))
@settings(max_examples=100, deadline=None)
def test_normal_cdf_symmetry_property(x):
    from farmtest.adequacy import std_normal_cdf

    assert std_normal_cdf(x) + std_normal_cdf(-x) == pytest.approx(1.0, abs=1e-14)
