"""Binning and kernel spot-intensity estimation on a count grid.

A :class:`CountSeries` holds per-bin counts on a grid of width ``bin_width``;
bin ``i`` covers the half-open interval ``(origin + i*w, origin + (i+1)*w]``
and an event exactly at the origin is assigned to bin 0.  Spot estimates are
reported in events per second regardless of the bin width.  The heavy-traffic
scale ``n`` never enters: all estimates refer to the observed stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import BoundaryError, InputError, ParameterError
from .sim import EventStream

KERNELS = ("indicator", "exponential")
SIDES = ("backward", "forward", "two_sided")


@dataclass(frozen=True, eq=False)
class CountSeries:
    bin_width: float
    counts: np.ndarray
    origin: float = 0.0

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ParameterError("bin_width must be positive")
        counts = np.array(self.counts, dtype=float).ravel()
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise InputError("counts must be finite and nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def __len__(self) -> int:
        return self.counts.size

    def __eq__(self, other):
        if not isinstance(other, CountSeries):
            return NotImplemented
        return (
            self.bin_width == other.bin_width
            and self.origin == other.origin
            and np.array_equal(self.counts, other.counts)
        )

    @property
    def horizon(self) -> float:
        return self.counts.size * self.bin_width

    @property
    def bin_starts(self) -> np.ndarray:
        return self.origin + np.arange(self.counts.size) * self.bin_width

    def index_of(self, t: float) -> int:
        """Grid index ``m`` with ``t = origin + m * bin_width``; ``t`` must be aligned."""
        x = (t - self.origin) / self.bin_width
        m = int(round(x))
        if abs(x - m) > 1e-6 or m < 0 or m > self.counts.size:
            raise InputError(f"time {t} is not on the bin grid of this series")
        return m

    def time_of(self, m) -> np.ndarray:
        return self.origin + np.asarray(m) * self.bin_width

    def scaled(self, factor: float) -> "CountSeries":
        return CountSeries(self.bin_width, self.counts * factor, self.origin)

    def same_grid(self, other: "CountSeries") -> bool:
        return (
            self.bin_width == other.bin_width
            and self.origin == other.origin
            and self.counts.size == other.counts.size
        )


@dataclass(frozen=True)
class KernelSpec:
    """One-sided kernel: ``indicator`` on ``[-1, 0]`` or ``exponential`` ``exp(x)``, ``x <= 0``.

    The exponential kernel is truncated at the first lag whose weight falls
    below ``truncation_tolerance``; the dropped tail mass relative to the full
    mass is then below the tolerance as well.
    """

    kind: str = "indicator"
    truncation_tolerance: float = 1e-8

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ParameterError(f"kernel kind must be one of {KERNELS}")
        if not 0 < self.truncation_tolerance < 1:
            raise ParameterError("truncation_tolerance must lie in (0, 1)")

    def support(self, ell: int) -> int:
        """Number of bins carrying weight."""
        if self.kind == "indicator":
            return ell
        return int(math.floor(ell * math.log(1.0 / self.truncation_tolerance))) + 1

    def weights(self, ell: int) -> np.ndarray:
        """Weights by lag, most recent bin first."""
        if self.kind == "indicator":
            return np.ones(ell)
        return np.exp(-np.arange(self.support(ell)) / ell)

    def full_mass(self, ell: int) -> float:
        return float(self.weights(ell).sum())


INDICATOR = KernelSpec("indicator")
EXPONENTIAL = KernelSpec("exponential")


def as_kernel(kernel) -> KernelSpec:
    if isinstance(kernel, KernelSpec):
        return kernel
    if kernel is None:
        return INDICATOR
    return KernelSpec(str(kernel))


@dataclass(frozen=True)
class SpotEstimate:
    t: float
    value: float
    bandwidth_bins: int
    side: str
    k_multiplier: float = 1.0


@dataclass(frozen=True, eq=False)
class SeasonalCurve:
    """Per-bin intraday factors with mean one."""

    factors: np.ndarray
    bin_width: float = 1.0

    def __post_init__(self):
        f = np.array(self.factors, dtype=float).ravel()
        if f.size == 0 or np.any(f <= 0) or not np.all(np.isfinite(f)):
            raise InputError("seasonal factors must be finite and strictly positive")
        f.setflags(write=False)
        object.__setattr__(self, "factors", f)

    def __len__(self) -> int:
        return self.factors.size

    @classmethod
    def flat(cls, n_bins: int, bin_width: float = 1.0) -> "SeasonalCurve":
        return cls(np.ones(n_bins), bin_width)


def _check_ell(ell) -> int:
    if int(ell) != ell or ell < 1:
        raise ParameterError("bandwidth ell must be an integer >= 1")
    return int(ell)


# ---------------------------------------------------------------------------
# Binning
# ---------------------------------------------------------------------------


def bin_counts(events, bin_width: float = 1.0, horizon: Optional[float] = None) -> CountSeries:
    """Count events on ``(i*w, (i+1)*w]`` bins covering ``[0, horizon]``."""
    if isinstance(events, EventStream):
        times = events.times
        horizon = events.horizon if horizon is None else horizon
    else:
        times = np.asarray(events, dtype=float)
    if horizon is None:
        raise InputError("horizon is required for raw timestamp arrays")
    if not bin_width > 0:
        raise ParameterError("bin_width must be positive")
    ratio = horizon / bin_width
    n_bins = int(round(ratio))
    if n_bins < 1 or abs(ratio - n_bins) > 1e-6 * max(1.0, ratio):
        raise ParameterError("horizon must be a positive multiple of bin_width")
    if times.size and (times.min() < 0 or times.max() > horizon):
        raise InputError("events fall outside [0, horizon]")
    idx = np.ceil(times / bin_width).astype(np.int64) - 1
    np.clip(idx, 0, n_bins - 1, out=idx)
    return CountSeries(bin_width, np.bincount(idx, minlength=n_bins).astype(float))


# ---------------------------------------------------------------------------
# Window sums
# ---------------------------------------------------------------------------


def backward_sums(counts: CountSeries, ell: int, kernel=None, boundary: str = "strict") -> np.ndarray:
    """Kernel-weighted window sums ``S[m]`` ending at grid point ``m = 0..N``.

    ``S[m] = sum_j w_j * c[m-1-j]``.  With ``boundary='strict'`` entries whose
    window reaches before the first bin are NaN.  With ``'truncate'`` they are
    computed from the available bins and rescaled by full over available
    kernel mass (so a flat series stays flat).
    """
    ell = _check_ell(ell)
    kernel = as_kernel(kernel)
    c = counts.counts
    N = c.size
    L = kernel.support(ell)
    out = np.empty(N + 1)
    out[0] = 0.0
    if kernel.kind == "indicator":
        cum = np.concatenate([[0.0], np.cumsum(c)])
        m = np.arange(N + 1)
        out = cum - cum[np.maximum(m - ell, 0)]
    else:
        r = math.exp(-1.0 / ell)
        out[1:] = lfilter([1.0], [1.0, -r], c)
        tail = np.zeros(N + 1)
        if N + 1 > L:
            tail[L:] = r**L * out[: N + 1 - L]
        out = out - tail
    m = np.arange(N + 1)
    short = m < L
    if boundary == "strict":
        out[short] = np.nan
    elif boundary == "truncate":
        w = kernel.weights(ell)
        avail = np.concatenate([[0.0], np.cumsum(w)])[np.minimum(m, L)]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(short, out * w.sum() / avail, out)
        out[0] = np.nan
    else:
        raise ParameterError("boundary must be 'strict' or 'truncate'")
    return out


def forward_sums(counts: CountSeries, ell: int, kernel=None, boundary: str = "strict") -> np.ndarray:
    """Mirror image of :func:`backward_sums`: ``F[m] = sum_j w_j * c[m+j]``."""
    rev = CountSeries(counts.bin_width, counts.counts[::-1])
    return backward_sums(rev, ell, kernel, boundary)[::-1]


def _per_second(total: float, ell: int, bin_width: float) -> float:
    return total / (ell * bin_width)


def spot_backward(counts: CountSeries, t: float, ell: int, kernel=None) -> SpotEstimate:
    """Backward-looking spot intensity at grid time ``t`` (events per second)."""
    ell = _check_ell(ell)
    kernel = as_kernel(kernel)
    m = counts.index_of(t)
    w = kernel.weights(ell)
    if m < w.size:
        raise BoundaryError(f"need {w.size} bins of history before t={t}, have {m}")
    window = counts.counts[m - w.size : m][::-1]
    return SpotEstimate(t, _per_second(float(np.dot(w, window)), ell, counts.bin_width), ell, "backward")


def spot_forward(counts: CountSeries, t: float, ell: int, kernel=None) -> SpotEstimate:
    """Forward-looking spot intensity using the bins after ``t``."""
    ell = _check_ell(ell)
    kernel = as_kernel(kernel)
    m = counts.index_of(t)
    w = kernel.weights(ell)
    if m + w.size > counts.counts.size:
        raise BoundaryError(f"need {w.size} bins after t={t}, have {counts.counts.size - m}")
    window = counts.counts[m : m + w.size]
    return SpotEstimate(t, _per_second(float(np.dot(w, window)), ell, counts.bin_width), ell, "forward")


def two_sided_sum(counts: CountSeries, theta: float, ell: int, k: float = 1.0):
    """Raw count on ``(theta - L w, theta + L w]`` with ``L = floor(k * ell)``; returns ``(sum, L)``."""
    ell = _check_ell(ell)
    if not k >= 1:
        raise ParameterError("k must be >= 1")
    m = counts.index_of(theta)
    L = int(math.floor(k * ell + 1e-9))
    if m - L < 0 or m + L > counts.counts.size:
        raise BoundaryError(f"two-sided window of {L} bins does not fit around theta={theta}")
    return float(counts.counts[m - L : m + L].sum()), L


def spot_two_sided(counts: CountSeries, theta: float, ell: int, k: float = 1.0) -> SpotEstimate:
    """Symmetric (indicator) estimate on ``[theta - k delta, theta + k delta]``."""
    total, L = two_sided_sum(counts, theta, ell, k)
    return SpotEstimate(theta, total / (2 * L * counts.bin_width), int(ell), "two_sided", float(k))


def spot_series(
    counts: CountSeries, ell: int, kernel=None, side: str = "backward", boundary: str = "strict"
):
    """Spot estimates at every grid point ``m = 0..N``; returns ``(times, values)``.

    Unavailable points (window outside the session) are NaN.
    """
    ell = _check_ell(ell)
    if side == "backward":
        sums = backward_sums(counts, ell, kernel, boundary)
    elif side == "forward":
        sums = forward_sums(counts, ell, kernel, boundary)
    else:
        raise ParameterError("spot_series supports side='backward' or 'forward'")
    times = counts.time_of(np.arange(counts.counts.size + 1))
    return times, sums / (ell * counts.bin_width)


# ---------------------------------------------------------------------------
# Seasonality
# ---------------------------------------------------------------------------


def estimate_seasonality(days: Sequence[CountSeries], epsilon: float = 1e-4) -> SeasonalCurve:
    """Cross-day mean per intraday bin, floored at ``epsilon`` x grand mean, normalized to mean 1."""
    days = list(days)
    if len(days) < 2:
        raise InputError("seasonality needs at least two days")
    first = days[0]
    for d in days[1:]:
        if not d.same_grid(first):
            raise InputError("all days must share the same bin grid")
    mean = np.mean(np.stack([d.counts for d in days]), axis=0)
    return curve_from_means(mean, first.bin_width, epsilon)


def curve_from_means(mean: np.ndarray, bin_width: float, epsilon: float = 1e-4) -> SeasonalCurve:
    grand = float(np.mean(mean))
    if not grand > 0:
        raise InputError("cannot estimate seasonality from days without events")
    floored = np.maximum(mean, epsilon * grand)
    return SeasonalCurve(floored / floored.mean(), bin_width)


def deflate(counts: CountSeries, curve: SeasonalCurve) -> CountSeries:
    """Divide each bin by its seasonal factor."""
    if curve.factors.size != counts.counts.size or curve.bin_width != counts.bin_width:
        raise InputError("seasonal curve and counts are on different grids")
    return CountSeries(counts.bin_width, counts.counts / curve.factors, counts.origin)
