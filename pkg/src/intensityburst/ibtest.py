"""Intensity-burst test statistic, observed local variance and critical values.

With window sums ``S[m]`` (raw counts for the indicator kernel, weighted
counts for the exponential kernel) and ``D[m] = S[m] - S[m - ell]``, the
statistic at grid point ``m`` is

    phi = D[m] / sqrt(mean_j D[a_j]**2)

where the anchors are ``a_j = m - j`` (overlapping blocks) or
``a_j = m - 2 j ell`` (non-overlapping blocks), ``j = 0..K-1``.  The unknown
rate scale cancels, so the statistic is invariant to rescaling all counts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from .errors import BoundaryError, ParameterError
from .estimate import (
    EXPONENTIAL,
    CountSeries,
    KernelSpec,
    SeasonalCurve,
    as_kernel,
    backward_sums,
    deflate,
    spot_series,
)

AVAR_SCHEMES = ("overlapping", "nonoverlapping")
CRITICAL_METHODS = ("gaussian_quantile", "bonferroni", "gumbel", "average")


@dataclass(frozen=True)
class TestConfig:
    """Bandwidth ``ell`` (bins), variance sample size ``K``, kernel and anchor scheme.

    ``boundary='truncate'`` lets points near the session open use the
    anchors that are available (at least one, each with ``ell`` bins of
    history) instead of raising :class:`BoundaryError`.
    """

    __test__ = False

    ell: int = 300
    K: int = 3000
    kernel: KernelSpec = field(default_factory=KernelSpec)
    avar_scheme: str = "overlapping"
    boundary: str = "strict"

    def __post_init__(self):
        object.__setattr__(self, "kernel", as_kernel(self.kernel))
        if int(self.ell) != self.ell or self.ell < 2:
            raise ParameterError("ell must be an integer >= 2")
        if int(self.K) != self.K or self.K < 2:
            raise ParameterError("K must be an integer >= 2")
        if self.avar_scheme not in AVAR_SCHEMES:
            raise ParameterError(f"avar_scheme must be one of {AVAR_SCHEMES}")
        if self.boundary not in ("strict", "truncate"):
            raise ParameterError("boundary must be 'strict' or 'truncate'")
        if self.avar_scheme == "overlapping" and self.ell > self.K / 2:
            warnings.warn("ell > K/2: overlapping variance estimate is unreliable", RuntimeWarning, stacklevel=3)

    @classmethod
    def from_ell(cls, ell: int = 300, kernel="indicator", **kw) -> "TestConfig":
        """Configuration with ``K = 10 * ell``."""
        return cls(ell=ell, K=10 * ell, kernel=as_kernel(kernel), **kw)

    @property
    def warmup_bins(self) -> int:
        """Bins of history required at a point in strict mode."""
        L = self.kernel.support(self.ell)
        if self.avar_scheme == "overlapping":
            return L + self.ell + self.K - 1
        return L + self.ell + 2 * self.ell * (self.K - 1)


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    t: float
    statistic: float
    numerator: float
    avar_hat: float
    denominator_sq: float
    K_used: int
    degenerate: bool
    config: TestConfig

    def to_dict(self, threshold: Optional[float] = None) -> dict:
        flags = ["degenerate_variance"] if self.degenerate else []
        if self.K_used < self.config.K:
            flags.append("truncated_anchors")
        return {
            "t": self.t,
            "statistic": self.statistic,
            "numerator": self.numerator,
            "avar": self.avar_hat,
            "threshold": threshold,
            "flags": flags,
        }


def _differences(counts: CountSeries, config: TestConfig) -> np.ndarray:
    """``D[m] = S[m] - S[m - ell]`` for ``m = 0..N`` (NaN where unavailable)."""
    ell = int(config.ell)
    S = backward_sums(counts, ell, config.kernel, config.boundary)
    if config.boundary == "truncate":
        S[:ell] = np.nan
    D = np.full(S.size, np.nan)
    D[ell:] = S[ell:] - S[:-ell]
    return D


def _anchors(m: int, config: TestConfig, D: np.ndarray) -> np.ndarray:
    step = 1 if config.avar_scheme == "overlapping" else 2 * int(config.ell)
    idx = m - step * np.arange(config.K)
    idx = idx[idx >= 0]
    vals = D[idx]
    ok = np.isfinite(vals)
    if config.boundary == "strict":
        if idx.size < config.K or not ok.all():
            raise BoundaryError(
                f"statistic at grid point {m} needs {config.warmup_bins} bins of history"
            )
        return vals
    # truncate: anchors are contiguous from j = 0, stop at the first gap
    if not ok[0]:
        raise BoundaryError(f"no usable anchors at grid point {m}")
    stop = np.argmin(ok) if not ok.all() else ok.size
    return vals[:stop]


def _result(t, D_m, vals, config) -> TestResult:
    den = float(np.mean(vals**2))
    degenerate = den == 0.0
    stat = 0.0 if degenerate else float(D_m / math.sqrt(den))
    return TestResult(
        t=float(t),
        statistic=stat,
        numerator=float(D_m),
        avar_hat=den / config.ell,
        denominator_sq=den,
        K_used=int(vals.size),
        degenerate=degenerate,
        config=config,
    )


def ib_statistic(counts: CountSeries, t: float, config: TestConfig) -> TestResult:
    """Burst statistic at grid time ``t``; a zero denominator gives a flagged zero."""
    m = counts.index_of(t)
    D = _differences(counts, config)
    if not np.isfinite(D[m]):
        raise BoundaryError(f"statistic at t={t} needs {config.warmup_bins} bins of history")
    vals = _anchors(m, config, D)
    return _result(t, D[m], vals, config)


def nabla_lambda(counts: CountSeries, t: float, ell: int, kernel=None) -> float:
    """``lambda_hat(t) - lambda_hat(t - delta)`` in events per second."""
    cfg = TestConfig(ell=ell, K=max(2, 2 * int(ell)), kernel=as_kernel(kernel))
    m = counts.index_of(t)
    D = _differences(counts, cfg)
    if not np.isfinite(D[m]):
        raise BoundaryError(f"need two windows of history before t={t}")
    return float(D[m]) / (ell * counts.bin_width)


def observed_avar(counts: CountSeries, t: float, config: TestConfig, rho: Optional[float] = None) -> float:
    """Observed local variance of the spot-intensity difference.

    With ``rho=None`` this is the unscaled mean squared count difference
    ``(1/K) sum_j D[a_j]**2`` that enters the statistic.  Otherwise it is
    ``(rho/K) sum_j (D[a_j]/ell)**2``, i.e. the scaled estimator with the
    spot estimate in counts per bin (``rho = ell`` in the short-bandwidth
    regime, where the limit is ``2 mu``).
    """
    m = counts.index_of(t)
    vals = _anchors(m, config, _differences(counts, config))
    den = float(np.mean(vals**2))
    if rho is None:
        return den
    return rho * den / config.ell**2


def statistic_series(counts: CountSeries, config: TestConfig):
    """Statistic at every grid point (overlapping scheme, vectorized).

    Returns ``(times, statistic, numerator, denominator_sq)``; NaN where the
    statistic is unavailable.
    """
    if config.avar_scheme != "overlapping":
        raise ParameterError("statistic_series supports the overlapping scheme only")
    D = _differences(counts, config)
    ok = np.isfinite(D)
    sq = np.where(ok, D**2, 0.0)
    csum = np.concatenate([[0.0], np.cumsum(sq)])
    cnt = np.concatenate([[0], np.cumsum(ok)])
    m = np.arange(D.size)
    lo = np.maximum(m - config.K + 1, 0)
    n_used = cnt[m + 1] - cnt[lo]
    den = np.full(D.size, np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_sq = (csum[m + 1] - csum[lo]) / n_used
    # strict: all K anchors available; truncate: the available contiguous ones
    valid = ok & (n_used > 0) if config.boundary == "truncate" else ok & (n_used == config.K)
    den[valid] = mean_sq[valid]
    with np.errstate(invalid="ignore", divide="ignore"):
        stat = np.where(den > 0, D / np.sqrt(den), np.where(den == 0, 0.0, np.nan))
    return counts.time_of(m), stat, D, den


# ---------------------------------------------------------------------------
# Candidate selection and critical values
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CandidateSet:
    times: np.ndarray
    values: np.ndarray
    min_separation: float

    def __len__(self) -> int:
        return self.times.size


def local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices ``i`` with ``v[i] >= v[i-1]`` and ``v[i] >= v[i+1]`` (missing neighbours ignored)."""
    v = np.asarray(values, dtype=float)
    fin = np.isfinite(v)
    prev = np.concatenate([[-np.inf], np.where(fin[:-1], v[:-1], -np.inf)])
    nxt = np.concatenate([np.where(fin[1:], v[1:], -np.inf), [-np.inf]])
    return np.flatnonzero(fin & (v >= prev) & (v >= nxt))


def select_candidates(times, values, top_n: int = 20, min_separation: float = 300.0) -> CandidateSet:
    """Greedy selection of the largest local maxima at least ``min_separation`` apart.

    Ties are broken by the earliest time.  May return fewer than ``top_n``.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape:
        raise ParameterError("times and values must have equal length")
    if times.size > 1 and np.any(np.diff(times) < 0):
        raise ParameterError("spot series must be sorted by time")
    peaks = local_maxima(values)
    order = peaks[np.lexsort((times[peaks], -values[peaks]))]
    chosen: List[int] = []
    for i in order:
        if len(chosen) >= top_n:
            break
        if all(abs(times[i] - times[j]) >= min_separation for j in chosen):
            chosen.append(int(i))
    idx = np.array(chosen, dtype=np.int64)
    return CandidateSet(times[idx], values[idx], float(min_separation))


def gumbel_location_scale(m: int) -> Tuple[float, float]:
    L = math.log(m)
    root = math.sqrt(2 * L)
    a = root - (math.log(math.pi) + math.log(L)) / (2 * root)
    return a, 1.0 / root


def critical_value(method: str, level: float, m: int = 1) -> float:
    """Right-tail critical value for ``m`` simultaneous standard-normal statistics."""
    if not 0 < level < 1:
        raise ParameterError("level must lie in (0, 1)")
    if int(m) != m or m < 1:
        raise ParameterError("m must be an integer >= 1")
    if method == "gaussian_quantile":
        return float(norm.isf(level))
    if method == "bonferroni":
        return float(norm.isf(level / m))
    if method == "gumbel":
        if m < 2:
            raise ParameterError("the Gumbel approximation needs m >= 2")
        a, b = gumbel_location_scale(m)
        return a + b * -math.log(-math.log1p(-level))
    if method == "average":
        return 0.5 * (critical_value("bonferroni", level, m) + critical_value("gumbel", level, m))
    raise ParameterError(f"method must be one of {CRITICAL_METHODS}")


# ---------------------------------------------------------------------------
# Daily detection pipeline
# ---------------------------------------------------------------------------


@dataclass
class DetectionReport:
    """Detections of one session, sorted by statistic (descending)."""

    detections: List[TestResult]
    candidates: CandidateSet
    skipped: List[Tuple[float, str]]
    threshold: float

    def __iter__(self):
        return iter(self.detections)

    def __len__(self) -> int:
        return len(self.detections)

    def __getitem__(self, i):
        return self.detections[i]


def detect_day(
    counts: CountSeries,
    seasonal: Optional[SeasonalCurve],
    config: TestConfig,
    threshold: float = 5.0,
    top_n: int = 20,
    min_separation: float = 300.0,
    candidate_ell: int = 300,
    candidate_kernel=EXPONENTIAL,
) -> DetectionReport:
    """Deflate, pick candidate maxima of the spot series, test each, keep those above ``threshold``.

    Candidate maxima are sought only where the statistic is available (after
    the warm-up period).  Candidates whose evaluation still fails are recorded
    in ``report.skipped``; a warning is issued when nothing was testable.
    """
    deflated = deflate(counts, seasonal) if seasonal is not None else counts
    D = _differences(deflated, config)
    times, spot = spot_series(deflated, candidate_ell, candidate_kernel, boundary="truncate")
    # maxima are only sought where the statistic can be evaluated
    testable = np.isfinite(D)
    if config.boundary == "strict":
        testable &= np.arange(D.size) >= config.warmup_bins
    spot = np.where(testable, spot, np.nan)
    cands = select_candidates(times, spot, top_n=top_n, min_separation=min_separation)
    results, skipped = [], []
    for t in cands.times:
        m = deflated.index_of(t)
        try:
            if not np.isfinite(D[m]):
                raise BoundaryError("inside warm-up period")
            res = _result(t, D[m], _anchors(m, config, D), config)
        except BoundaryError as exc:
            skipped.append((float(t), str(exc)))
            continue
        results.append(res)
    if len(cands) == 0 or len(skipped) == len(cands):
        warnings.warn("no testable candidates in this session", RuntimeWarning, stacklevel=2)
    hits = sorted((r for r in results if r.statistic > threshold), key=lambda r: -r.statistic)
    return DetectionReport(hits, cands, skipped, float(threshold))
