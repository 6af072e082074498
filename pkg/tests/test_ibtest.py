import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intensityburst.errors import BoundaryError, ParameterError
from intensityburst.estimate import EXPONENTIAL, INDICATOR, CountSeries, KernelSpec
from intensityburst.ibtest import (
    TestConfig,
    critical_value,
    detect_day,
    ib_statistic,
    local_maxima,
    nabla_lambda,
    observed_avar,
    select_candidates,
    statistic_series,
)
from intensityburst.estimate import bin_counts
from intensityburst.sim import (
    BurstParams,
    JumpScenario,
    Scenario,
    SessionSpec,
    calibrate_burst_sigma,
    simulate_poisson,
    simulate_scenario,
)

DAY = SessionSpec()


def poisson_counts(rate, horizon, seed, n=1):
    return bin_counts(simulate_poisson(rate, SessionSpec(float(horizon), rate_scale=n), seed), 1.0)


def brute_statistic(c, m, ell, K, weights, step=1):
    """Direct evaluation from raw counts: window sums, differences, anchors."""
    L = weights.size

    def S(j):
        return float(np.dot(weights, c[j - L : j][::-1]))

    def D(j):
        return S(j) - S(j - ell)

    anchors = [D(m - step * j) for j in range(K)]
    return D(m) / math.sqrt(np.mean(np.square(anchors)))


# -- configuration -----------------------------------------------------------


def test_config_validation():
    with pytest.raises(ParameterError):
        TestConfig(ell=1)
    with pytest.raises(ParameterError):
        TestConfig(K=1)
    with pytest.raises(ParameterError):
        TestConfig(avar_scheme="blocks")
    with pytest.raises(ParameterError):
        TestConfig(boundary="pad")


def test_config_warns_when_ell_exceeds_half_K():
    with pytest.warns(RuntimeWarning):
        TestConfig(ell=60, K=100)


def test_default_K_is_ten_ell():
    assert TestConfig.from_ell(60).K == 600


# -- statistic -----------------------------------------------------------------


def test_flat_counts_give_flagged_zero():
    res = ib_statistic(CountSeries(1.0, np.full(5000, 3.0)), 4000.0, TestConfig(50, 500))
    assert res.statistic == 0.0 and res.degenerate
    assert res.to_dict(5.0)["flags"] == ["degenerate_variance"]


@pytest.mark.parametrize("step_scheme", ["overlapping", "nonoverlapping"])
def test_indicator_statistic_matches_direct(step_scheme):
    rng = np.random.default_rng(5)
    c = rng.poisson(2.0, 4000).astype(float)
    cfg = TestConfig(20, 60, "indicator", step_scheme)
    step = 1 if step_scheme == "overlapping" else 40
    for m in (3000, 3500, 4000):
        res = ib_statistic(CountSeries(1.0, c), float(m), cfg)
        assert res.statistic == pytest.approx(brute_statistic(c, m, 20, 60, np.ones(20), step), rel=1e-10)


def test_exponential_statistic_matches_direct():
    rng = np.random.default_rng(6)
    c = rng.poisson(2.0, 3000).astype(float)
    kernel = KernelSpec("exponential", 1e-6)
    cfg = TestConfig(15, 200, kernel)
    w = np.exp(-np.arange(kernel.support(15)) / 15)
    for m in (2000, 2999):
        res = ib_statistic(CountSeries(1.0, c), float(m), cfg)
        assert res.statistic == pytest.approx(brute_statistic(c, m, 15, 200, w), rel=1e-9)


@given(st.floats(0.01, 100.0))
@settings(max_examples=30, deadline=None)
def test_statistic_scale_invariance(factor):
    c = poisson_counts(1.0, 4000, 7)
    for kernel in (INDICATOR, EXPONENTIAL):
        cfg = TestConfig(30, 300, kernel)
        a = ib_statistic(c, 3900.0, cfg).statistic
        b = ib_statistic(c.scaled(factor), 3900.0, cfg).statistic
        assert b == pytest.approx(a, rel=1e-12)


def test_statistic_insufficient_history():
    c = poisson_counts(1.0, 3000, 8)
    with pytest.raises(BoundaryError):
        ib_statistic(c, 2000.0, TestConfig.from_ell(300))


def test_truncate_boundary_uses_available_anchors():
    c = poisson_counts(1.0, 3000, 9)
    res = ib_statistic(c, 1000.0, TestConfig(300, 3000, boundary="truncate"))
    assert res.K_used == 1000 - 600 + 1
    assert "truncated_anchors" in res.to_dict()["flags"]


def test_statistic_series_matches_pointwise():
    c = poisson_counts(1.0, 5000, 10)
    for cfg in (TestConfig(50, 500), TestConfig(50, 500, EXPONENTIAL), TestConfig(50, 500, boundary="truncate")):
        t, stat, _, _ = statistic_series(c, cfg)
        for m in (1500, 3000, 5000):
            assert stat[m] == pytest.approx(ib_statistic(c, t[m], cfg).statistic, rel=1e-9)
    t, stat, _, _ = statistic_series(c, TestConfig(50, 500))
    assert np.all(np.isnan(stat[: TestConfig(50, 500).warmup_bins]))


# -- nabla and observed variance --------------------------------------------


def test_nabla_flat_is_zero():
    assert nabla_lambda(CountSeries(1.0, np.full(500, 2.0)), 400.0, 50) == 0.0


def test_nabla_step_up():
    c = np.r_[np.full(300, 1.0), np.full(300, 3.0)]
    assert nabla_lambda(CountSeries(1.0, c), 400.0, 100) == pytest.approx(2.0)
    assert nabla_lambda(CountSeries(1.0, c), 600.0, 100) == 0.0
    assert nabla_lambda(CountSeries(0.5, c), 200.0, 100) == pytest.approx(4.0)


def test_nabla_poisson_variance():
    vals = [nabla_lambda(poisson_counts(2.0, 120, s), 120.0, 60) for s in range(3000)]
    assert np.var(vals) == pytest.approx(2 * 2.0 / 60, rel=0.08)
    assert abs(np.mean(vals)) < 4 * math.sqrt(4.0 / 60 / 3000)


def test_observed_avar_flat_is_zero():
    assert observed_avar(CountSeries(1.0, np.full(2000, 4.0)), 2000.0, TestConfig(20, 400)) == 0.0


def test_observed_avar_unscaled_poisson():
    cfg = TestConfig(20, 400)
    vals = [observed_avar(poisson_counts(2.0, 500, s), 500.0, cfg) for s in range(300)]
    assert np.mean(vals) == pytest.approx(2 * 2.0 * 20, rel=0.05)


def test_observed_avar_short_bandwidth_regime():
    cfg = TestConfig(10, 100)
    vals = [observed_avar(poisson_counts(1.0, 200, s, n=5), 200.0, cfg, rho=10) / 5 for s in range(300)]
    assert np.mean(vals) == pytest.approx(2.0, rel=0.10)


def test_observed_avar_diffusive_regime_cir():
    # (2/3) gamma^2 lambda_bar is the limit of the rescaled estimator as kappa delta -> 0
    n, cfg = 1000, TestConfig(2, 40)
    spec = SessionSpec(150.0, rate_scale=n)
    vals = []
    for s in range(200):
        ev, _ = simulate_scenario(Scenario(base="cir"), spec, s, want_path=False)
        vals.append(observed_avar(bin_counts(ev, 1.0), 150.0, cfg, rho=1 / 2) / n**2)
    assert np.mean(vals) == pytest.approx(2 / 3 * 0.2**2 * 1.0, rel=0.25)


def test_overlapping_and_nonoverlapping_agree():
    ov, no = TestConfig(10, 100), TestConfig(10, 100, avar_scheme="nonoverlapping")
    a, b = [], []
    for s in range(200):
        c = poisson_counts(1.0, no.warmup_bins, s)
        a.append(observed_avar(c, c.horizon, ov))
        b.append(observed_avar(c, c.horizon, no))
    assert abs(np.mean(a) / np.mean(b) - 1) < 0.15


# -- null distribution and power ----------------------------------------------


def test_poisson_null_is_standard_normal():
    cfg = TestConfig.from_ell(300)
    z = np.array([ib_statistic(poisson_counts(1.0, 3600, s), 3600.0, cfg).statistic for s in range(1000)])
    assert 0.03 <= np.mean(z > critical_value("gaussian_quantile", 0.05)) <= 0.07
    assert abs(z.mean()) < 0.1 and z.std() == pytest.approx(1.0, abs=0.08)


def test_burst_is_rejected_at_onset():
    sigma = calibrate_burst_sigma(0.1, 0.5, 300.0, 23400.0)
    sc = Scenario(burst=BurstParams(11700.0, 0.5, sigma))
    cfg, z995 = TestConfig.from_ell(300), critical_value("gaussian_quantile", 0.005)
    z = [ib_statistic(bin_counts(simulate_scenario(sc, DAY, s, want_path=False)[0], 1.0), 11700.0, cfg).statistic
         for s in range(200)]
    assert np.mean(np.array(z) > z995) >= 0.99


def _jump_rates(offset, reps=500):
    sc = Scenario(jump=JumpScenario(8000.0, 1.0, 1.0))
    cfg = TestConfig.from_ell(300)
    z = np.array([ib_statistic(bin_counts(simulate_scenario(sc, DAY, s, want_path=False)[0], 1.0),
                               8000.0 + offset, cfg).statistic for s in range(reps)])
    return z, 3 * math.sqrt(0.05 * 0.95 / reps)


def test_jump_null_after_clean_anchors():
    # every anchor difference lies after the jump
    z, tol = _jump_rates(600 + 3000 + 1)
    assert abs(np.mean(z > critical_value("gaussian_quantile", 0.05)) - 0.05) <= tol


def test_jump_null_conservative_right_after_jump():
    z, tol = _jump_rates(601)
    assert np.mean(z > critical_value("gaussian_quantile", 0.05)) <= 0.05 + tol


# -- candidates --------------------------------------------------------------


def test_local_maxima_definition():
    np.testing.assert_array_equal(local_maxima([1.0, 3.0, 2.0, 2.0, 5.0]), [1, 4])
    np.testing.assert_array_equal(local_maxima([np.nan, 1.0, np.nan]), [1])


def test_monotone_series_single_candidate():
    t = np.arange(100.0)
    cs = select_candidates(t, t.copy(), 20, 10.0)
    assert len(cs) == 1 and cs.times[0] == 99.0


def test_equal_peaks_earlier_survives():
    t = np.arange(1000.0)
    v = np.zeros(1000)
    v[[400, 600]] = 1.0
    cs = select_candidates(t, v, 20, 300.0)
    assert cs.times[0] == 400.0 and 600.0 not in cs.times


def test_top_twenty_of_twenty_five_peaks():
    t = np.arange(25 * 400.0)
    v = np.zeros(t.size)
    heights = np.random.default_rng(11).permutation(np.arange(1, 26))
    v[200 + 400 * np.arange(25)] = heights
    cs = select_candidates(t, v, 20, 300.0)
    assert sorted(cs.values) == list(range(6, 26))


def brute_candidates(times, values, top_n, sep):
    maxima = []
    for i in range(len(values)):
        if not np.isfinite(values[i]):
            continue
        left = values[i - 1] if i > 0 and np.isfinite(values[i - 1]) else -np.inf
        right = values[i + 1] if i + 1 < len(values) and np.isfinite(values[i + 1]) else -np.inf
        if values[i] >= left and values[i] >= right:
            maxima.append(i)
    chosen = []
    while len(chosen) < top_n:
        free = [i for i in maxima if all(abs(times[i] - times[j]) >= sep for j in chosen)]
        if not free:
            break
        best = max(free, key=lambda i: (values[i], -times[i]))
        chosen.append(best)
    return [times[i] for i in chosen]


def test_candidates_match_brute_force():
    rng = np.random.default_rng(12)
    for _ in range(100):
        n = int(rng.integers(5, 400))
        t = np.cumsum(rng.uniform(0.5, 3.0, n))
        v = np.round(rng.normal(size=n), 1)
        v[rng.random(n) < 0.05] = np.nan
        top, sep = int(rng.integers(1, 25)), float(rng.uniform(1, 60))
        assert list(select_candidates(t, v, top, sep).times) == brute_candidates(t, v, top, sep)


# -- critical values ---------------------------------------------------------


def test_bonferroni_value():
    assert critical_value("bonferroni", 0.01, 10380) == pytest.approx(4.7610, abs=5e-4)
    assert critical_value("bonferroni", 0.01, 10380) == pytest.approx(4.760955821318372, abs=1e-9)


def test_gumbel_values():
    assert critical_value("gumbel", 0.01, 23400) == pytest.approx(5.126236059771195, abs=1e-9)
    assert critical_value("gumbel", 0.01, 32400) == pytest.approx(5.184598057228678, abs=1e-9)


def test_average_and_single_test():
    assert critical_value("bonferroni", 0.05, 1) == critical_value("gaussian_quantile", 0.05)
    avg = critical_value("average", 0.01, 1000)
    assert avg == pytest.approx(0.5 * (critical_value("bonferroni", 0.01, 1000) + critical_value("gumbel", 0.01, 1000)))


@given(st.integers(100, 10**6), st.integers(1, 1000))
def test_critical_values_grow_with_m(m, extra):
    for method in ("bonferroni", "gumbel"):
        assert critical_value(method, 0.01, m + extra) > critical_value(method, 0.01, m)


def test_critical_value_validation():
    for bad in [("bonferroni", 0.0, 10), ("bonferroni", 0.01, 0), ("gumbel", 0.01, 1), ("normal", 0.01, 5)]:
        with pytest.raises(ParameterError):
            critical_value(*bad)


# -- daily pipeline ------------------------------------------------------------


def test_detect_day_poisson_false_alarms():
    cfg = TestConfig.from_ell(300)
    alarms = sum(len(detect_day(poisson_counts(1.0, 23400, 10**6 + s), None, cfg)) > 0 for s in range(500))
    assert alarms / 500 < 0.01


def test_detect_day_finds_injected_burst():
    sigma = calibrate_burst_sigma(0.1, 0.75, 300.0, 23400.0)
    sc = Scenario(burst=BurstParams(11700.0, 0.75, sigma))
    cfg = TestConfig.from_ell(300)
    hits = 0
    for s in range(200):
        report = detect_day(bin_counts(simulate_scenario(sc, DAY, s, want_path=False)[0], 1.0), None, cfg)
        hits += len(report) == 1 and abs(report[0].t - 11700.0) <= 300
    assert hits / 200 >= 0.95


def test_detect_day_results_sorted_and_above_threshold():
    sigma = calibrate_burst_sigma(0.1, 0.5, 300.0, 23400.0)
    sc = Scenario(burst=BurstParams(11700.0, 0.5, sigma))
    c = bin_counts(simulate_scenario(sc, DAY, 0, want_path=False)[0], 1.0)
    report = detect_day(c, None, TestConfig.from_ell(300), threshold=2.0)
    s = [r.statistic for r in report]
    assert s == sorted(s, reverse=True) and all(x > 2.0 for x in s)
    assert all(t >= TestConfig.from_ell(300).warmup_bins for t in report.candidates.times)


def test_detect_day_short_session_warns():
    with pytest.warns(RuntimeWarning, match="no testable candidates"):
        report = detect_day(poisson_counts(1.0, 2000, 1), None, TestConfig.from_ell(300))
    assert len(report) == 0


def test_detect_day_seasonal_flat_equals_none():
    from intensityburst.estimate import SeasonalCurve

    c = poisson_counts(1.0, 23400, 3)
    cfg = TestConfig.from_ell(300)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a = detect_day(c, None, cfg, threshold=0.0)
        b = detect_day(c, SeasonalCurve.flat(23400), cfg, threshold=0.0)
    assert [r.statistic for r in a] == [r.statistic for r in b]
