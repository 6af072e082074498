import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from intensityburst.errors import BoundaryError, InputError, ParameterError
from intensityburst.estimate import (
    EXPONENTIAL,
    INDICATOR,
    CountSeries,
    KernelSpec,
    SeasonalCurve,
    backward_sums,
    bin_counts,
    deflate,
    estimate_seasonality,
    forward_sums,
    spot_backward,
    spot_forward,
    spot_series,
    spot_two_sided,
)
from intensityburst.sim import (
    BurstParams,
    DiurnalParams,
    EventStream,
    JumpScenario,
    Scenario,
    SessionSpec,
    calibrate_burst_sigma,
    simulate_poisson,
    simulate_scenario,
)

DAY = SessionSpec()


def flat(c=2.0, n=2000):
    return CountSeries(1.0, np.full(n, c))


# -- binning ---------------------------------------------------------------


def test_bin_counts_example():
    c = bin_counts(EventStream([0.5, 1.5, 1.7], 3.0), 1.0)
    np.testing.assert_array_equal(c.counts, [1, 2, 0])


def test_bin_counts_boundary_convention():
    # half-open (a, b]; an event exactly at 0 goes to the first bin
    c = bin_counts(EventStream([0.0, 1.0, 1.0000001, 3.0], 3.0), 1.0)
    np.testing.assert_array_equal(c.counts, [2, 1, 1])


def test_bin_counts_empty():
    c = bin_counts(EventStream([], 10.0), 2.0)
    np.testing.assert_array_equal(c.counts, np.zeros(5))


def test_bin_counts_outside_horizon():
    with pytest.raises(InputError):
        bin_counts(np.array([0.5, 11.0]), 1.0, 10.0)


@given(st.lists(st.floats(0.0, 100.0), max_size=200), st.sampled_from([0.5, 1.0, 2.0, 5.0]))
@settings(max_examples=100, deadline=None)
def test_bin_counts_conserves_events(times, width):
    ev = EventStream(np.sort(times), 100.0)
    assert bin_counts(ev, width).counts.sum() == len(times)


# -- kernels -------------------------------------------------------------------


@pytest.mark.parametrize("ell", [1, 10, 60, 300])
@pytest.mark.parametrize("tol", [1e-4, 1e-8])
def test_exponential_truncation_deficit(ell, tol):
    k = KernelSpec("exponential", tol)
    w = k.weights(ell)
    L = w.size
    full = 1.0 / (1.0 - math.exp(-1.0 / ell))
    assert w.sum() == pytest.approx((1 - math.exp(-L / ell)) * full, rel=1e-12)
    assert (full - w.sum()) / full < tol
    assert np.all(w >= 0) and w[0] == 1.0


def test_kernel_validation():
    with pytest.raises(ParameterError):
        KernelSpec("gaussian")
    with pytest.raises(ParameterError):
        KernelSpec("exponential", 0.0)


def test_backward_sums_match_direct_dot():
    rng = np.random.default_rng(0)
    c = CountSeries(1.0, rng.poisson(3.0, 3000))
    for kernel in (INDICATOR, KernelSpec("exponential", 1e-6)):
        S = backward_sums(c, 20, kernel)
        w = kernel.weights(20)
        for m in (w.size, w.size + 17, 2999, 3000):
            direct = np.dot(w, c.counts[m - w.size : m][::-1])
            assert S[m] == pytest.approx(direct, rel=1e-9)
        assert np.all(np.isnan(S[: w.size]))


def test_forward_sums_mirror():
    rng = np.random.default_rng(1)
    c = CountSeries(1.0, rng.poisson(2.0, 500))
    F = forward_sums(c, 15)
    for m in (0, 100, 485):
        assert F[m] == c.counts[m : m + 15].sum()
    assert np.isnan(F[486])


def test_truncate_boundary_keeps_flat_series_flat():
    for kernel in (INDICATOR, EXPONENTIAL):
        S = backward_sums(flat(1.5, 5000), 30, kernel, boundary="truncate")
        full = 1.5 * kernel.full_mass(30)
        np.testing.assert_allclose(S[1:], full, rtol=1e-9)


# -- spot estimates --------------------------------------------------------


def test_spot_backward_flat_exact():
    assert spot_backward(flat(2.0), 500.0, 60).value == 2.0


def test_spot_backward_single_event():
    counts = np.zeros(100)
    counts[99] = 1
    assert spot_backward(CountSeries(1.0, counts), 100.0, 60).value == pytest.approx(1 / 60)


def test_spot_units_are_per_second():
    c = CountSeries(0.5, np.full(400, 1.0))
    assert spot_backward(c, 100.0, 20).value == pytest.approx(2.0)


def test_spot_backward_insufficient_history():
    with pytest.raises(BoundaryError):
        spot_backward(flat(), 30.0, 60)
    with pytest.raises(BoundaryError):
        spot_backward(flat(), 1000.0, 60, EXPONENTIAL)


def test_spot_forward_end_of_session():
    with pytest.raises(BoundaryError):
        spot_forward(flat(), 1990.0, 60)


def test_spot_not_on_grid():
    with pytest.raises(InputError):
        spot_backward(flat(), 500.5, 60)


def test_flat_agreement_all_sides():
    c = flat(3.0)
    vals = {spot_backward(c, 1000.0, 50).value, spot_forward(c, 1000.0, 50).value,
            spot_two_sided(c, 1000.0, 50, 2.0).value}
    assert vals == {3.0}


def test_spot_series_matches_pointwise():
    rng = np.random.default_rng(2)
    c = CountSeries(1.0, rng.poisson(1.0, 3000))
    for kernel in (INDICATOR, EXPONENTIAL):
        t, v = spot_series(c, 40, kernel)
        for m in (800, 1500, 3000):
            assert v[m] == pytest.approx(spot_backward(c, t[m], 40, kernel).value, rel=1e-9)


def test_poisson_spot_sampling_std():
    vals = [spot_backward(bin_counts(simulate_poisson(1.0, SessionSpec(600.0), s), 1.0), 600.0, 300).value
            for s in range(2000)]
    assert np.std(vals) == pytest.approx(math.sqrt(1 / 300), rel=0.05)


@given(st.floats(0.01, 100.0))
@settings(max_examples=30, deadline=None)
def test_spot_homogeneity(factor):
    rng = np.random.default_rng(3)
    c = CountSeries(1.0, rng.poisson(1.0, 2000).astype(float))
    for kernel in (INDICATOR, EXPONENTIAL):
        a = spot_backward(c, 1500.0, 50, kernel).value
        b = spot_backward(c.scaled(factor), 1500.0, 50, kernel).value
        assert b == pytest.approx(factor * a, rel=1e-12)


def test_consistency_rate():
    # mean absolute error decays like (n delta)^(-1/2)
    ells = np.array([60, 300, 600])
    mae = []
    for ell in ells:
        errs = [abs(spot_backward(bin_counts(simulate_poisson(1.0, SessionSpec(1200.0), 1000 * ell + s), 1.0),
                                  1200.0, int(ell)).value - 1.0) for s in range(400)]
        mae.append(np.mean(errs))
    slope = np.polyfit(np.log(ells), np.log(mae), 1)[0]
    assert abs(slope + 0.5) < 0.1


def test_jump_forward_minus_backward():
    sc = Scenario(jump=JumpScenario(11700.0, 1.0, 1.0))
    diffs = []
    for s in range(100):
        ev, _ = simulate_scenario(sc, DAY, s, want_path=False)
        c = bin_counts(ev, 1.0)
        diffs.append(spot_forward(c, 11700.0, 300).value - spot_backward(c, 11700.0, 300).value)
    assert np.mean(diffs) == pytest.approx(1.0, abs=3 * math.sqrt(3 / 300 / 100))


def test_jump_two_sided_limit():
    sc = Scenario(jump=JumpScenario(11700.0, 1.0, 1.0))
    vals = [spot_two_sided(bin_counts(simulate_scenario(sc, DAY, s, want_path=False)[0], 1.0), 11700.0, 300).value
            for s in range(100)]
    assert np.mean(vals) == pytest.approx(1.5, abs=0.02)


def _burst_day(alpha, seed, c=0.1):
    sigma = calibrate_burst_sigma(c, alpha, 300.0, 23400.0)
    sc = Scenario(burst=BurstParams(11700.0, alpha, sigma))
    return bin_counts(simulate_scenario(sc, DAY, seed, want_path=False)[0], 1.0)


def test_burst_two_sided_ratio():
    days = [_burst_day(0.5, s) for s in range(100)]
    r = [spot_two_sided(d, 11700.0, 5, 2).value / spot_two_sided(d, 11700.0, 5, 1).value for d in days]
    assert np.mean(r) == pytest.approx(2**-0.5, abs=0.03)


def test_burst_backward_divergence():
    deltas = np.array([60, 120, 300, 600])
    days = [_burst_day(0.5, s) for s in range(50)]
    est = [np.mean([spot_backward(d, 11700.0, int(dl)).value for d in days]) for dl in deltas]
    slope = np.polyfit(np.log(deltas), np.log(est), 1)[0]
    assert abs(slope + 0.5) < 0.15


# -- seasonality -------------------------------------------------------------


def test_seasonality_flat_days():
    curve = estimate_seasonality([flat(2.0, 100), flat(2.0, 100)])
    np.testing.assert_allclose(curve.factors, 1.0)


def test_seasonality_floor():
    a = np.ones(100)
    a[7] = 0
    curve = estimate_seasonality([CountSeries(1.0, a), CountSeries(1.0, a)])
    assert curve.factors[7] > 0
    # floor is epsilon times the grand mean (0.99 here)
    assert curve.factors[7] / curve.factors[0] == pytest.approx(1e-4 * 0.99, rel=1e-9)
    assert curve.factors.mean() == pytest.approx(1.0, abs=1e-12)


def test_seasonality_validation():
    with pytest.raises(InputError):
        estimate_seasonality([flat(1.0, 100)])
    with pytest.raises(InputError):
        estimate_seasonality([flat(1.0, 100), flat(1.0, 101)])


def test_seasonality_recovers_diurnal_curve():
    d = DiurnalParams()
    sc = Scenario(diurnal=d)
    days = [bin_counts(simulate_scenario(sc, DAY, s, want_path=False)[0], 1.0) for s in range(518)]
    curve = estimate_seasonality(days)
    edges = np.arange(23401) / 23400
    truth = np.diff(d.cumulative(edges)) * 23400
    assert np.corrcoef(curve.factors, truth)[0, 1] > 0.95
    assert curve.factors.mean() == pytest.approx(1.0, abs=1e-9)


def test_deflate_identity_and_zero():
    c = CountSeries(1.0, np.arange(10.0))
    assert deflate(c, SeasonalCurve.flat(10)) == c
    z = CountSeries(1.0, np.zeros(10))
    assert deflate(z, SeasonalCurve(np.linspace(0.5, 1.5, 10))).counts.sum() == 0


def test_deflate_grid_mismatch():
    with pytest.raises(InputError):
        deflate(flat(1.0, 10), SeasonalCurve.flat(11))


def test_exact_deflation_flattens_mean():
    d = DiurnalParams()
    sc = Scenario(diurnal=d)
    edges = np.arange(23401) / 23400
    curve = SeasonalCurve(np.diff(d.cumulative(edges)) * 23400)
    total = np.zeros(23400)
    for s in range(50):
        total += deflate(bin_counts(simulate_scenario(sc, DAY, s, want_path=False)[0], 1.0), curve).counts
    res = stats.linregress(np.arange(23400), total / 50)
    assert res.pvalue > 0.01
