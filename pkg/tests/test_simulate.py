import math

import numpy as np
import pytest
import scipy.stats

from farmtest.errors import ConfigError, DegenerateDataError, DomainError
from farmtest.simulate import (
    BetaPattern,
    SimCell,
    _split_records,
    cell_from_mapping,
    gen_dataset,
    grid_from_mapping,
    ks_critical_value,
    ks_distance,
    make_beta,
    null_joint_diagnostics,
    power_curve,
    result_csv_row,
    run_cell,
    sample_ar1,
)


class TestMakeBeta:
    def test_null_pattern(self):
        assert np.array_equal(make_beta(5, BetaPattern()), np.zeros(5))
        assert np.array_equal(
            make_beta(5, BetaPattern(pattern="fixed_omega", s=0, omega=9.0)), np.zeros(5)
        )

    def test_norm_fixed(self):
        beta = make_beta(10, BetaPattern(pattern="norm_fixed", s=4, target=0.2))
        np.testing.assert_allclose(beta[:4], 0.1)
        assert np.all(beta[4:] == 0.0)
        assert np.linalg.norm(beta) == pytest.approx(0.2, rel=1e-15)

    def test_fixed_omega_l1_norm(self):
        beta = make_beta(100, BetaPattern(pattern="fixed_omega", s=10, omega=0.3))
        assert np.abs(beta).sum() == pytest.approx(3.0, rel=1e-15)

    def test_norm_fixed_s_zero_positive_target(self):
        with pytest.raises(DomainError):
            make_beta(5, BetaPattern(pattern="norm_fixed", s=0, target=0.2))

    def test_s_exceeds_p(self):
        with pytest.raises(DomainError):
            make_beta(3, BetaPattern(pattern="fixed_omega", s=4, omega=0.1))


class TestSampleAr1:
    def test_rho_zero_is_iid(self):
        rng1 = np.random.default_rng(1)
        rng2 = np.random.default_rng(1)
        u = sample_ar1(6, 0.0, rng1, size=4)
        z = rng2.standard_normal((4, 6))
        assert np.array_equal(u, z)

    def test_moments(self):
        rng = np.random.default_rng(2)
        u = sample_ar1(8, 0.3, rng, size=100_000)
        var = u.var(axis=0)
        assert np.all(np.abs(var - 1.0) < 0.01 * 3)
        lag1 = np.mean(u[:, :-1] * u[:, 1:], axis=0)
        assert np.all(np.abs(lag1 - 0.3) < 0.01 * 3)

    def test_lag_two_decay(self):
        rng = np.random.default_rng(3)
        u = sample_ar1(5, 0.3, rng, size=200_000)
        lag2 = np.mean(u[:, 0] * u[:, 2])
        assert lag2 == pytest.approx(0.09, abs=0.01)

    def test_rho_domain(self):
        with pytest.raises(DomainError):
            sample_ar1(5, 1.0, np.random.default_rng(0))


class TestGenDataset:
    def test_bit_identical_repeats(self):
        cell = SimCell(n=30, p=10, k=2, reps=1, seed=99)
        a, _ = gen_dataset(cell, 5)
        b, _ = gen_dataset(cell, 5)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)

    def test_distinct_reps_differ(self):
        cell = SimCell(n=30, p=10, k=2, reps=1, seed=99)
        a, _ = gen_dataset(cell, 0)
        b, _ = gen_dataset(cell, 1)
        assert not np.array_equal(a.X, b.X)

    def test_null_noise_law(self):
        # under the null, Y - F gamma* is the eps draw: N(0, 0.25) entries
        cell = SimCell(n=200, p=5, k=2, reps=1, seed=4)
        resid = []
        for rep in range(300):
            pair, truth = gen_dataset(cell, rep)
            resid.append(pair.Y - truth["F"] @ truth["gamma"])
        resid = np.concatenate(resid)
        n = resid.size
        assert resid.mean() == pytest.approx(0.0, abs=3 * 0.5 / math.sqrt(n))
        assert resid.var() == pytest.approx(0.25, abs=3 * 0.25 * math.sqrt(2.0 / n))

    def test_second_moment_matches_design(self):
        # E[X_ij^2] = E||b_j||^2 + 1 = k/3 + 1 with uniform(-1,1) loadings
        cell = SimCell(n=4, p=10, k=2, reps=1, seed=8)
        sq = []
        for rep in range(10_000):
            pair, _ = gen_dataset(cell, rep)
            sq.append(np.mean(pair.X**2))
        sq = np.array(sq)
        target = 2.0 / 3.0 + 1.0
        se = sq.std() / math.sqrt(sq.size)
        assert sq.mean() == pytest.approx(target, abs=3 * se)

    def test_beta_enters_response(self):
        cell = SimCell(n=50, p=10, k=2, reps=1, seed=5,
                       beta=BetaPattern(pattern="fixed_omega", s=10, omega=0.5))
        pair, truth = gen_dataset(cell, 0)
        expected = truth["F"] @ truth["gamma"] + truth["U"] @ truth["beta"] + truth["eps"]
        np.testing.assert_allclose(pair.Y, expected, rtol=1e-12)


class TestRunCell:
    def test_rates_and_se(self):
        cell = SimCell(n=60, p=20, k=2, reps=50, seed=11)
        res = run_cell(cell)
        for rate, se in ((res.rate_max, res.se_max), (res.rate_quad, res.se_quad),
                         (res.rate_fisher, res.se_fisher)):
            assert 0.0 <= rate <= 1.0
            assert se == pytest.approx(math.sqrt(rate * (1 - rate) / res.reps_completed))
        assert res.reps_completed == 50 and res.n_failed == 0
        assert res.mean_khat == 2.0
        assert res.wall_time > 0

    def test_thread_count_invariance(self):
        cell = SimCell(n=40, p=12, k=2, reps=24, seed=12)
        a = run_cell(cell, threads=1)
        b = run_cell(cell, threads=3)
        assert (a.rate_max, a.rate_quad, a.rate_fisher) == (b.rate_max, b.rate_quad, b.rate_fisher)
        assert a.mean_khat == b.mean_khat

    def test_estimated_k_mode(self):
        cell = SimCell(n=60, p=30, k=2, reps=10, seed=13, k_mode="estimated")
        res = run_cell(cell)
        assert res.mean_khat == 2.0  # strong design: ratio estimator recovers k

    def test_failure_accounting(self):
        cell = SimCell(n=40, p=12, k=2, reps=100, seed=1)
        ok = [(True, True, False, False, 1.0, 0.5, 2)] * 99
        records = ok + [(False, 7, "boom")]
        with pytest.raises(DegenerateDataError, match="boom"):
            _split_records(cell, records + [(False, 8, "boom")] * 2)
        kept, failures = _split_records(cell, records)
        assert len(kept) == 99 and failures == [(7, "boom")]


class TestPowerCurve:
    def test_single_point_matches_run_cell(self):
        cell = SimCell(n=40, p=12, k=2, reps=30, seed=21)
        direct = run_cell(cell)
        viagrid = power_curve(cell, [(0, 0.0)])[0]
        assert viagrid.rate_max == direct.rate_max
        assert viagrid.rate_quad == direct.rate_quad
        assert viagrid.rate_fisher == direct.rate_fisher

    def test_grid_order_and_config_echo(self):
        cell = SimCell(n=40, p=12, k=2, reps=10, seed=22)
        points = [(1, 0.0), (1, 0.5), (2, 0.25)]
        results = power_curve(cell, points)
        assert [(r.cell.beta.s, r.cell.beta.omega) for r in results] == points

    def test_monotone_in_omega_up_to_noise(self):
        cell = SimCell(n=100, p=40, k=2, reps=150, seed=23)
        omegas = [0.0, 0.1, 0.2, 0.3]
        results = power_curve(cell, [(1, w) for w in omegas])
        rates = [r.rate_max for r in results]
        ses = [max(r.se_max, 1e-3) for r in results]
        for i in range(len(rates) - 1):
            assert rates[i + 1] >= rates[i] - 2 * (ses[i] + ses[i + 1])

    def test_empty_grid_rejected(self):
        cell = SimCell(n=40, p=12, k=2, reps=10, seed=24)
        with pytest.raises(ConfigError):
            power_curve(cell, [])


class TestNullHarness:
    def test_null_pvalues_rarely_extreme(self):
        # under the null, p-values below 0.001 must be rare: >= 99% of
        # replications keep all three p-values at or above 0.001
        from farmtest.adequacy import run_tests
        from farmtest.factor_model import fit_factor_model

        cell = SimCell(n=200, p=100, k=2, reps=1000, seed=20250810)
        ok = 0
        for rep in range(cell.reps):
            pair, _ = gen_dataset(cell, rep)
            report = run_tests(fit_factor_model(pair, K=2))
            pv = report.pvalues
            ok += min(pv.p_max, pv.p_quad, pv.p_fisher) >= 0.001
        assert ok / cell.reps >= 0.99

    def test_quad_overtakes_max_on_norm_fixed_grid(self):
        # with ||beta|| fixed, the quadratic test dominates the max test
        # once the signal spreads over s in [5, 11]
        template = SimCell(n=200, p=100, k=2, reps=250, seed=271828)
        points = [(s, 0.2 / math.sqrt(s)) for s in (5, 7, 9, 11)]
        results = power_curve(template, points)
        assert any(r.rate_quad > r.rate_max for r in results)


class TestKsHelpers:
    def test_ks_distance_simple(self):
        assert ks_distance(np.array([0.5]), lambda t: t) == pytest.approx(0.5)

    def test_ks_distance_against_scipy(self):
        rng = np.random.default_rng(31)
        x = rng.standard_normal(500)
        from farmtest.adequacy import std_normal_cdf

        ours = ks_distance(x, std_normal_cdf)
        ref = scipy.stats.kstest(x, "norm").statistic
        assert ours == pytest.approx(ref, abs=1e-12)

    def test_ks_critical_value(self):
        assert ks_critical_value(0.01, 2000) == pytest.approx(0.0364, abs=5e-4)
        assert ks_critical_value(0.05, 100) == pytest.approx(1.3581 / 10.0, abs=1e-3)


class TestNullDiagnostics:
    def test_requires_null_cell(self):
        cell = SimCell(n=40, p=12, k=2, reps=10, seed=41,
                       beta=BetaPattern(pattern="fixed_omega", s=1, omega=0.5))
        with pytest.raises(DomainError):
            null_joint_diagnostics(cell)

    def test_smoke_small(self):
        cell = SimCell(n=60, p=20, k=2, reps=50, seed=42)
        diag = null_joint_diagnostics(cell)
        assert 0.0 <= diag.ks_quad_normal <= 1.0
        assert 0.0 <= diag.ks_max_gumbel <= 1.0
        assert -1.0 <= diag.correlation <= 1.0
        assert diag.reps == 50


class TestConfigMapping:
    def test_roundtrip(self):
        cfg = {
            "n": 80, "p": 30, "k": 2, "sigma_u": "ar1", "rho": 0.3,
            "beta": {"pattern": "norm_fixed", "s": 4, "target": 0.2},
            "gamma_star": [0.5, 0.5], "eps_sd": 0.5, "reps": 100,
            "seed": 7, "alpha": 0.05, "k_mode": "known",
        }
        cell = cell_from_mapping(cfg)
        assert cell.n == 80 and cell.sigma_u == "ar1"
        assert cell.beta.target == 0.2

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="bogus"):
            cell_from_mapping({"n": 50, "p": 10, "bogus": 3})

    def test_unknown_beta_key_named(self):
        with pytest.raises(ConfigError, match="strength"):
            cell_from_mapping({"n": 50, "p": 10, "beta": {"strength": 1}})

    def test_invalid_values(self):
        with pytest.raises(ConfigError):
            cell_from_mapping({"n": 50, "p": 10, "reps": 0})
        with pytest.raises(ConfigError):
            cell_from_mapping({"n": 50, "p": 10, "alpha": 1.5})
        with pytest.raises(ConfigError):
            cell_from_mapping({"n": 50, "p": 10, "sigma_u": "toeplitz"})
        with pytest.raises(ConfigError):
            cell_from_mapping({"n": 50, "p": 2})

    def test_grid_kinds(self):
        cell = cell_from_mapping({"n": 50, "p": 10})
        assert grid_from_mapping({"kind": "omega", "s": 1, "omega": [0.0, 0.1]}, cell) == [
            (1, 0.0), (1, 0.1)
        ]
        pts = grid_from_mapping({"kind": "points", "points": [[2, 0.3]]}, cell)
        assert pts == [(2, 0.3)]
        nf = cell_from_mapping(
            {"n": 50, "p": 10, "beta": {"pattern": "norm_fixed", "s": 1, "target": 0.2}}
        )
        spars = grid_from_mapping({"kind": "sparsity", "s": [1, 4]}, nf)
        assert spars[0] == (1, pytest.approx(0.2))
        assert spars[1] == (4, pytest.approx(0.1))

    def test_grid_errors(self):
        cell = cell_from_mapping({"n": 50, "p": 10})
        with pytest.raises(ConfigError, match="sparsity"):
            grid_from_mapping({"kind": "sparsity", "s": [1, 2]}, cell)
        with pytest.raises(ConfigError, match="shape"):
            grid_from_mapping({"shape": 1}, cell)
        with pytest.raises(ConfigError):
            grid_from_mapping({"kind": "omega", "s": 1, "omega": []}, cell)


def test_result_csv_row_format():
    cell = SimCell(n=40, p=12, k=2, reps=20, seed=5,
                   beta=BetaPattern(pattern="norm_fixed", s=4, target=0.2))
    res = run_cell(cell)
    row = result_csv_row(res)
    fields = row.split(",")
    assert fields[0] == "4"
    assert float(fields[1]) == pytest.approx(0.1)  # resolved omega
    assert fields[2] == "40" and fields[3] == "12" and fields[4] == "identity"
    assert fields[11] == "20" and fields[12] == "5"
    assert len(fields) == 13
