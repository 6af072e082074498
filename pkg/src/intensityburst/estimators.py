"""Estimator-style wrappers around the functional API.

Inputs are :class:`~intensityburst.estimate.CountSeries` objects (one per
session) or, for multi-day fits, sequences of them.  Hyperparameters live in
``__init__`` and fitted state in trailing-underscore attributes, so
``get_params``/``set_params``/``clone`` work as usual.
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .classify import DEFAULT_K_GRID, ClassifyConfig, classify_event
from .errors import InputError, ParameterError
from .estimate import (
    CountSeries,
    as_kernel,
    deflate,
    estimate_seasonality,
    spot_series,
)
from .ibtest import DetectionReport, TestConfig, TestResult, detect_day, ib_statistic


def _as_series(x) -> CountSeries:
    if isinstance(x, CountSeries):
        return x
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InputError("expected a CountSeries or a 1-D array of bin counts")
    return CountSeries(1.0, arr)


def _as_days(X) -> list:
    if isinstance(X, CountSeries):
        raise InputError("expected a sequence of sessions, got a single CountSeries")
    if isinstance(X, np.ndarray) and X.ndim == 2:
        return [CountSeries(1.0, row) for row in X]
    return [_as_series(x) for x in X]


class SeasonalDeflator(TransformerMixin, BaseEstimator):
    """Cross-day intraday activity curve; ``transform`` divides it out.

    Parameters
    ----------
    epsilon : float
        Floor for dead bins, relative to the grand mean.
    """

    def __init__(self, epsilon: float = 1e-4):
        self.epsilon = epsilon

    def fit(self, X, y=None):
        days = _as_days(X)
        self.curve_ = estimate_seasonality(days, epsilon=self.epsilon)
        self.n_bins_ = self.curve_.factors.size
        return self

    def transform(self, X):
        check_is_fitted(self, "curve_")
        if isinstance(X, CountSeries) or (np.ndim(X) == 1 and not isinstance(X, (list, tuple))):
            return deflate(_as_series(X), self.curve_)
        return [deflate(d, self.curve_) for d in _as_days(X)]


class SpotIntensityEstimator(BaseEstimator):
    """Kernel spot intensity (events per second) at every grid point of a session."""

    def __init__(self, ell: int = 300, kernel: str = "exponential", side: str = "backward",
                 boundary: str = "strict"):
        self.ell = ell
        self.kernel = kernel
        self.side = side
        self.boundary = boundary

    def fit(self, X=None, y=None):
        self.kernel_ = as_kernel(self.kernel)
        if self.side not in ("backward", "forward"):
            raise ParameterError("side must be 'backward' or 'forward'")
        return self

    def transform(self, X) -> Tuple[np.ndarray, np.ndarray]:
        """Return ``(times, estimates)``; unavailable points are NaN."""
        check_is_fitted(self, "kernel_")
        return spot_series(_as_series(X), self.ell, self.kernel_, self.side, self.boundary)


class IntensityBurstDetector(BaseEstimator):
    """Daily burst detection: deflate, pick spot-intensity maxima, test each.

    ``fit`` learns the seasonal curve from a pool of sessions; calling
    ``fit(None)`` skips deflation.
    """

    def __init__(self, ell: int = 300, K: int = 3000, kernel: str = "indicator",
                 avar_scheme: str = "overlapping", threshold: float = 5.0, top_n: int = 20,
                 min_separation: float = 300.0, candidate_ell: int = 300,
                 candidate_kernel: str = "exponential", epsilon: float = 1e-4):
        self.ell = ell
        self.K = K
        self.kernel = kernel
        self.avar_scheme = avar_scheme
        self.threshold = threshold
        self.top_n = top_n
        self.min_separation = min_separation
        self.candidate_ell = candidate_ell
        self.candidate_kernel = candidate_kernel
        self.epsilon = epsilon

    def fit(self, X=None, y=None):
        self.config_ = TestConfig(self.ell, self.K, as_kernel(self.kernel), self.avar_scheme)
        self.seasonal_ = None if X is None else estimate_seasonality(_as_days(X), self.epsilon)
        return self

    def _deflated(self, X) -> CountSeries:
        c = _as_series(X)
        return c if self.seasonal_ is None else deflate(c, self.seasonal_)

    def predict(self, X) -> DetectionReport:
        check_is_fitted(self, "config_")
        return detect_day(
            _as_series(X), self.seasonal_, self.config_, self.threshold, self.top_n,
            self.min_separation, self.candidate_ell, as_kernel(self.candidate_kernel),
        )

    def decision_function(self, X, times: Sequence[float]) -> np.ndarray:
        """Test statistic at each of ``times`` on the deflated session."""
        check_is_fitted(self, "config_")
        c = self._deflated(X)
        return np.array([ib_statistic(c, t, self.config_).statistic for t in times])

    def test_at(self, X, t: float) -> TestResult:
        check_is_fitted(self, "config_")
        return ib_statistic(self._deflated(X), t, self.config_)


class BurstJumpClassifier(BaseEstimator):
    """Label change points as ``burst_like``, ``jump_like`` or ``inconclusive``."""

    def __init__(self, ell: int = 10, k: float = 2.0, k_grid=DEFAULT_K_GRID, level: float = 0.01,
                 intercept_mode: str = "free", offset: float = 0.0, standardization: str = "bins",
                 refine_window: float = 0.0):
        self.ell = ell
        self.k = k
        self.k_grid = k_grid
        self.level = level
        self.intercept_mode = intercept_mode
        self.offset = offset
        self.standardization = standardization
        self.refine_window = refine_window

    def fit(self, X=None, y=None):
        self.config_ = ClassifyConfig(
            self.ell, self.k, tuple(self.k_grid), self.level, self.intercept_mode, self.offset,
            self.standardization, self.refine_window,
        )
        return self

    def classify(self, X, thetas: Sequence[float]) -> list:
        check_is_fitted(self, "config_")
        c = _as_series(X)
        return [classify_event(c, th, self.config_) for th in thetas]

    def predict(self, X, thetas: Sequence[float]) -> np.ndarray:
        return np.array([r.verdict for r in self.classify(X, thetas)])

    def explosion_rates(self, X, thetas: Sequence[float]) -> np.ndarray:
        out = self.classify(X, thetas)
        return np.array([np.nan if r.alpha is None else r.alpha.alpha_hat for r in out])
