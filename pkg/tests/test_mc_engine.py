from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from src.mc_engine import (
    McConfig,
    build_field_factor,
    fx_call_cashflow,
    libor_cashflow,
    maturity_grid,
    mc_price,
    quanto_caplet_cashflow,
    reconstruct_spot_fx,
    simulate_terminal_measure,
    time_grid,
    validate_against_analytic,
    zero_bond_cashflow,
)
from src.modelspec import (
    CorrelationForm,
    CorrelationSpec,
    Regime,
    correlation_matrix,
)
from src.pricers import CcsSpec, FxOptionSpec, QuantoCapSpec
from src.termstructure import Tenor, flat_market, forward_fx
from src.utils import ModelError


def within(result, target: float, bound: float = 3.0) -> bool:
    return abs(result.value - target) <= bound * result.stderr + 1e-14


def test_mc_config_validation():
    with pytest.raises(ValueError):
        McConfig(paths=1)
    with pytest.raises(ValueError):
        McConfig(paths=101, antithetic=True)
    McConfig(paths=101, antithetic=False)


def test_time_grid():
    grid = time_grid(Tenor((0.5, 1.0, 1.5)), 2)
    np.testing.assert_allclose(grid, [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5])
    np.testing.assert_allclose(time_grid(Tenor((0.0, 1.0)), 4), np.linspace(0, 1, 5))


def test_maturity_grid_integrates_strips():
    times = time_grid(Tenor((0.5, 1.0, 1.5)), 2)
    nodes, weights = maturity_grid(times, 3)
    assert nodes.size == weights.size == 18
    assert weights.sum() == pytest.approx(1.5, rel=1e-14)
    strip = (nodes > 1.0) & (nodes < 1.5)
    assert np.sum(weights[strip] * nodes[strip]) == pytest.approx(
        (1.5**2 - 1.0) / 2, rel=1e-14
    )


def test_build_field_factor_reconstruction():
    grid = np.linspace(0.05, 3.0, 40)
    disc = build_field_factor(CorrelationSpec(decay=0.5), grid)
    assert disc.reconstruction_error <= 1e-10
    np.testing.assert_allclose(
        disc.factor @ disc.factor.T,
        correlation_matrix(CorrelationSpec(decay=0.5), grid),
        atol=1e-10,
    )


def test_build_field_factor_degenerate_kernel():
    disc = build_field_factor(CorrelationSpec(decay=0.0), np.linspace(0.1, 1.0, 6))
    assert disc.clipped == 5
    assert np.linalg.matrix_rank(disc.factor) == 1
    increments = disc.sample_increments(np.random.default_rng(3), 0.25, 10)
    np.testing.assert_allclose(increments, increments[:, :1] * np.ones((1, 6)))
    single = build_field_factor(CorrelationSpec(decay=1.0), np.array([0.7]))
    np.testing.assert_array_equal(single.factor, [[1.0]])


def test_build_field_factor_rejects_bad_grid():
    with pytest.raises(ValueError):
        build_field_factor(CorrelationSpec(decay=1.0), np.array([1.0, 0.5]))


def test_build_field_factor_rejects_invalid_kernel():
    floored = CorrelationSpec(CorrelationForm.EXPONENTIAL_WITH_FLOOR, 1.0, -0.9)
    with pytest.raises(ModelError):
        build_field_factor(floored, np.linspace(0.0, 5.0, 30))


def test_field_increment_covariance():
    grid = np.array([0.5, 1.0, 2.0])
    disc = build_field_factor(CorrelationSpec(decay=0.8), grid)
    samples = disc.sample_increments(np.random.default_rng(11), 1.0, 100000)
    # Chi-square bound on the whitened sample covariance
    whitened = samples @ np.linalg.inv(np.linalg.cholesky(disc.correlation)).T
    statistic = np.sum(np.mean(whitened, axis=0) ** 2) * samples.shape[0]
    assert statistic <= stats.chi2.ppf(0.999, df=3)
    np.testing.assert_allclose(np.cov(samples.T), disc.correlation, atol=0.02)


def test_field_increment_sample_covariance():
    grid = np.array([0.5, 1.0, 2.0])
    disc = build_field_factor(CorrelationSpec(decay=0.8), grid)
    count = 100000
    samples = disc.sample_increments(np.random.default_rng(23), 1.0, count)
    # Likelihood ratio of the zero-mean sample covariance against the kernel
    scatter = samples.T @ samples / count
    ratio = np.linalg.solve(disc.correlation, scatter)
    _, logdet = np.linalg.slogdet(ratio)
    statistic = count * (np.trace(ratio) - logdet - grid.size)
    assert statistic <= stats.chi2.ppf(0.99, df=grid.size * (grid.size + 1) // 2)
    # Per-entry Wishart bound, Bonferroni over the distinct entries
    corr = disc.correlation
    spread = np.sqrt((corr**2 + np.outer(np.diag(corr), np.diag(corr))) / count)
    entries = np.triu_indices(grid.size)
    z = np.abs(scatter - corr)[entries] / spread[entries]
    assert np.all(z <= stats.norm.ppf(1 - 0.01 / (2 * entries[0].size)))


def test_zero_volatility_paths_are_constant(semiannual_market, make_model, small_mc):
    model = make_model(dom=0.0, foreign=0.0, fx=0.0)
    paths = simulate_terminal_measure(semiannual_market, model, small_mc)
    n = semiannual_market.tenor.n
    np.testing.assert_allclose(paths.dom, 0.02, rtol=1e-12)
    np.testing.assert_allclose(paths.foreign, 0.03, rtol=1e-12)
    assert not paths.aborted.any()
    expected_fx = forward_fx(semiannual_market.curves, semiannual_market.tenor, n)
    np.testing.assert_allclose(paths.fx_terminal, expected_fx, rtol=1e-12)


def test_zero_volatility_spot_fx_identical_curves(make_model, small_mc):
    market = flat_market(0.02, 0.02, spot_fx=1.25)
    model = make_model(dom=0.0, foreign=0.0, fx=0.0)
    paths = simulate_terminal_measure(market, model, replace(small_mc, paths=8))
    for i in range(market.tenor.n + 1):
        np.testing.assert_allclose(reconstruct_spot_fx(paths, i), 1.25, rtol=1e-12)
    np.testing.assert_array_equal(
        reconstruct_spot_fx(paths, market.tenor.n), paths.fx_terminal[:, -1]
    )


def test_simulation_is_deterministic(semiannual_market, make_model, small_mc):
    model = make_model(decay=0.5)
    mc = replace(small_mc, paths=2000, block_size=512)
    first = simulate_terminal_measure(semiannual_market, model, mc)
    second = simulate_terminal_measure(semiannual_market, model, mc, workers=3)
    np.testing.assert_array_equal(first.dom, second.dom)
    np.testing.assert_array_equal(first.foreign, second.foreign)
    np.testing.assert_array_equal(first.fx_terminal, second.fx_terminal)


def test_antithetic_pairs(semiannual_market, make_model, small_mc):
    mc = replace(small_mc, paths=16)
    paths = simulate_terminal_measure(semiannual_market, make_model(fx=0.0), mc)
    log_fx = np.log(paths.fx_terminal[:, -1])
    center = np.log(paths.fx_terminal[0, 0])
    # Zero FX volatility: the terminal FX never moves
    np.testing.assert_allclose(log_fx, center, rtol=1e-12)
    dom = np.log(paths.dom[:, -1, -1])
    assert not np.allclose(dom[0::2], dom[1::2])


def test_numeraire_identity(semiannual_market, make_model, small_mc):
    paths = simulate_terminal_measure(
        semiannual_market, make_model(decay=0.5), replace(small_mc, paths=2000)
    )
    n = semiannual_market.tenor.n
    result = mc_price(paths, zero_bond_cashflow(n), semiannual_market)
    assert result.value == semiannual_market.discount_at(n)
    assert result.stderr == 0.0


def test_martingale_suite(semiannual_market, make_model, small_mc):
    model = make_model(decay=0.5)
    paths = simulate_terminal_measure(semiannual_market, model, small_mc)
    tenor = semiannual_market.tenor
    for i in range(tenor.n):
        bond = mc_price(paths, zero_bond_cashflow(i + 1), semiannual_market)
        assert within(bond, semiannual_market.discount_at(i + 1))
        # Deflated LIBOR paid in arrears prices as B(0, T_{i+1}) L(0, T_i)
        libor = mc_price(paths, libor_cashflow(i), semiannual_market)
        rate = semiannual_market.libors()[i]
        assert within(libor, semiannual_market.discount_at(i + 1) * rate)
    fx = paths.fx_terminal[:, -1]
    target = forward_fx(semiannual_market.curves, tenor, tenor.n)
    stderr = fx.std(ddof=1) / np.sqrt(fx.size)
    assert abs(fx.mean() - target) <= 3 * stderr + 1e-14


def test_mc_price_rejects_unsimulated_state(semiannual_market, make_model, small_mc):
    paths = simulate_terminal_measure(
        semiannual_market, make_model(), replace(small_mc, paths=8)
    )
    with pytest.raises(ValueError):
        mc_price(paths, replace(libor_cashflow(2), pay_index=1), semiannual_market)


def test_zero_volatility_caplet_payoff(semiannual_market, make_model, small_mc):
    model = make_model(dom=0.0, foreign=0.0, fx=0.0)
    paths = simulate_terminal_measure(
        semiannual_market, model, replace(small_mc, paths=8)
    )
    result = mc_price(
        paths, quanto_caplet_cashflow(1, 0.025, 2.0), semiannual_market
    )
    expected = 0.5 * 2.0 * 0.005 * semiannual_market.discount_at(2)
    assert result.value == pytest.approx(expected, rel=1e-12)


def test_validate_zero_volatility_cap(semiannual_market, make_model, small_mc, quad):
    model = make_model(dom=0.0, foreign=0.0, fx=0.0)
    reports = validate_against_analytic(
        QuantoCapSpec(0.025, 1.0),
        semiannual_market,
        model,
        replace(small_mc, paths=8),
        quad,
    )
    assert len(reports) == semiannual_market.tenor.n + 1
    assert all(report.z_score == 0.0 for report in reports)
    assert reports[-1].instrument == "quanto-cap"


def test_validate_quanto_cap(semiannual_market, make_model, small_mc, quad):
    model = make_model(decay=0.5)
    reports = validate_against_analytic(
        QuantoCapSpec(0.03, 1.0), semiannual_market, model, small_mc, quad
    )
    for report in reports:
        assert report.passed, str(report)


def test_validate_ccs(semiannual_market, make_model, small_mc, quad):
    reports = validate_against_analytic(
        CcsSpec(), semiannual_market, make_model(decay=0.5), small_mc, quad
    )
    assert reports[-1].instrument == "ccs"
    for report in reports:
        assert report.passed, str(report)


def test_validate_fx_call(semiannual_market, make_model, small_mc, quad):
    reports = validate_against_analytic(
        FxOptionSpec(2.5, 1.0), semiannual_market, make_model(decay=0.5), small_mc, quad
    )
    assert len(reports) == 1
    assert reports[0].passed, str(reports[0])


def test_validate_case_ii(semiannual_market, make_model, small_mc, quad):
    # Low volatility point: sigma_F = 1%, sigma_X = 10%
    model = make_model(Regime.CASE_II, foreign=0.01, fx=0.1, decay=0.5)
    paths = simulate_terminal_measure(semiannual_market, model, small_mc, cfg=quad)
    assert paths.aborted_count == 0
    reports = validate_against_analytic(
        QuantoCapSpec(0.03, 1.0), semiannual_market, model, small_mc, quad, paths
    )
    assert [report.instrument for report in reports] == [
        *(f"quanto-cap-fx.caplet.{i}" for i in range(4)),
        "quanto-cap-fx",
    ]
    for report in reports:
        assert report.aborted == 0
        assert report.passed, str(report)


def test_case_ii_foreign_rates_cross_zero(make_model, small_mc):
    market = flat_market(0.02, 0.002, accrual=0.5, periods=4)
    model = make_model(Regime.CASE_II, foreign=0.01, fx=0.1, decay=0.5)
    paths = simulate_terminal_measure(market, model, replace(small_mc, paths=2000))
    fixings = np.stack([paths.foreign[:, i, i] for i in range(market.tenor.n)], 1)
    assert (fixings < 0).any()
    assert np.all(1.0 + 0.5 * fixings > 0)
    assert paths.aborted_count == 0
    assert np.all(np.isfinite(paths.foreign))


def test_aborted_paths_fail_validation(semiannual_market, make_model, small_mc, quad):
    model = make_model(dom=0.0, foreign=0.0, fx=0.0)
    paths = simulate_terminal_measure(
        semiannual_market, model, replace(small_mc, paths=8)
    )
    aborted = np.zeros(8, dtype=bool)
    aborted[3] = True
    paths = replace(paths, aborted=aborted)
    result = mc_price(paths, zero_bond_cashflow(2), semiannual_market)
    assert result.diagnostics == {"samples": 3, "aborted": 1}
    reports = validate_against_analytic(
        QuantoCapSpec(0.025, 1.0), semiannual_market, model, small_mc, quad, paths
    )
    assert all(report.z_score == 0.0 for report in reports)
    assert not any(report.passed for report in reports)
    assert all(report.aborted == 1 for report in reports)


def test_fx_call_cashflow_put(semiannual_market, make_model, small_mc):
    paths = simulate_terminal_measure(
        semiannual_market, make_model(decay=0.5), small_mc
    )
    n = semiannual_market.tenor.n
    call = mc_price(paths, fx_call_cashflow(n, 1.0), semiannual_market)
    put = mc_price(paths, fx_call_cashflow(n, 1.0, put=True), semiannual_market)
    forward = forward_fx(semiannual_market.curves, semiannual_market.tenor, n)
    parity = semiannual_market.discount_at(n) * (forward - 1.0)
    spread = mc_price(
        paths,
        [fx_call_cashflow(n, 1.0), fx_call_cashflow(n, 1.0, put=True, notional=-1.0)],
        semiannual_market,
    )
    assert call.value - put.value == pytest.approx(spread.value, rel=1e-12)
    assert within(spread, parity)
