"""Burst-versus-jump discrimination at a known change point ``theta``.

Two-sided estimates ``lt(k) = N(theta - k delta, theta + k delta] / (2 k delta)``
behave differently across bandwidth multipliers: under a burst with explosion
rate ``alpha`` the ratio ``lt(k) / lt(1)`` tends to ``k**-alpha``, under a
jump in the base intensity it tends to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from .errors import EstimationError, ParameterError
from .estimate import CountSeries, two_sided_sum

VERDICTS = ("burst_like", "jump_like", "inconclusive")
DEFAULT_K_GRID = (1.0, 2.0, 3.0, 5.0, 10.0)


@dataclass(frozen=True)
class RatioResult:
    theta: float
    k: float
    ratio: float
    jump_z: float
    verdict: str
    avar_k: float = float("nan")


@dataclass(frozen=True)
class AlphaEstimate:
    alpha_hat: float
    k_grid: Tuple[float, ...]
    fit: str = "regression"
    intercept_mode: str = "free"
    log_estimates: Tuple[float, ...] = ()


def ratio_statistic(counts: CountSeries, theta: float, ell: int, k: float = 2.0) -> float:
    """``lt(k) / lt(1)``; NaN when the inner window holds no events."""
    if not k > 1:
        raise ParameterError("k must exceed 1")
    inner, L1 = two_sided_sum(counts, theta, ell, 1.0)
    outer, Lk = two_sided_sum(counts, theta, ell, k)
    if inner == 0:
        return float("nan")
    return (outer / Lk) / (inner / L1)


def avar_k(mbar: float, k: float) -> float:
    """Limiting variance of the ratio under a jump, ``mbar = mu_- + jump/2`` in counts per bin."""
    return (0.5 + 0.5 / k - 1.0 / (k * mbar)) / mbar


def jump_test(
    counts: CountSeries,
    theta: float,
    ell: int,
    k: float = 2.0,
    level: float = 0.01,
    standardization: str = "bins",
) -> RatioResult:
    """One-sided test of the jump null against a burst (ratio below one).

    ``mbar`` is estimated by the inner two-sided window in counts per bin.
    With ``standardization='bins'`` the rate factor ``sqrt(n delta)`` is
    ``sqrt(ell)``, which is exact when the bin width is ``1/n`` on the unit
    session.  ``'count'`` uses the square root of the inner-window count.

    The verdict is ``inconclusive`` when the ratio is undefined, the plug-in
    variance is not positive, or the outer window carries no variation
    (every bin equal), in which case no sampling noise is identifiable.
    """
    if not 0 < level < 1:
        raise ParameterError("level must lie in (0, 1)")
    if standardization not in ("bins", "count"):
        raise ParameterError("standardization must be 'bins' or 'count'")
    ratio = ratio_statistic(counts, theta, ell, k)
    inner, L1 = two_sided_sum(counts, theta, ell, 1.0)
    mbar = inner / (2 * L1)
    m = counts.index_of(theta)
    Lk = int(math.floor(k * ell + 1e-9))
    window = counts.counts[m - Lk : m + Lk]
    if not np.isfinite(ratio) or mbar <= 0 or np.ptp(window) == 0:
        return RatioResult(float(theta), float(k), ratio, float("nan"), "inconclusive")
    v = avar_k(mbar, k)
    if not v > 0:
        return RatioResult(float(theta), float(k), ratio, float("nan"), "inconclusive", v)
    scale = math.sqrt(ell) if standardization == "bins" else math.sqrt(inner)
    z = scale * (ratio - 1.0) / math.sqrt(v)
    verdict = "burst_like" if z <= -norm.isf(level) else "jump_like"
    return RatioResult(float(theta), float(k), ratio, z, verdict, v)


def estimate_alpha(
    counts: CountSeries,
    theta: float,
    ell: int,
    k_grid: Sequence[float] = DEFAULT_K_GRID,
    fit: str = "regression",
    intercept_mode: str = "free",
) -> AlphaEstimate:
    """Explosion-rate estimate from the decay of ``log lt(k)`` in ``log k``.

    ``fit='two_point'`` uses ``k_grid = (1, k)`` (or a single ``k``).  For the
    regression, ``intercept_mode='free'`` fits ``log lt(k) = a - alpha log k``;
    ``'through_origin'`` fits ``log lt(k) - log lt(1) = -alpha log k``.
    Multipliers whose window holds no events are skipped.
    """
    if fit not in ("two_point", "regression"):
        raise ParameterError("fit must be 'two_point' or 'regression'")
    if intercept_mode not in ("free", "through_origin"):
        raise ParameterError("intercept_mode must be 'free' or 'through_origin'")
    grid = tuple(float(k) for k in k_grid)
    if fit == "two_point":
        grid = grid if grid[0] == 1.0 else (1.0,) + grid
        if len(grid) != 2:
            raise ParameterError("two-point fit needs exactly one multiplier k > 1")
    if any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
        raise ParameterError("k_grid must be strictly increasing and >= 1")
    if intercept_mode == "through_origin" and grid[0] != 1.0:
        raise ParameterError("through-origin fit needs k = 1 in the grid")

    ks, logs = [], []
    for k in grid:
        total, L = two_sided_sum(counts, theta, ell, k)
        if total > 0:
            ks.append(k)
            logs.append(math.log(total / (2 * L * counts.bin_width)))
    if len(ks) < 2:
        raise EstimationError("fewer than two positive two-sided estimates")
    x = np.log(ks)
    y = np.asarray(logs)
    if fit == "two_point":
        if ks[0] != 1.0:
            raise EstimationError("baseline window holds no events")
        alpha = -(y[1] - y[0]) / x[1]
    elif intercept_mode == "free":
        xc = x - x.mean()
        alpha = -float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    else:
        if ks[0] != 1.0:
            raise EstimationError("baseline window holds no events")
        alpha = -float(np.dot(x, y - y[0]) / np.dot(x, x))
    return AlphaEstimate(float(alpha), tuple(ks), fit, intercept_mode, tuple(float(v) for v in logs))


@dataclass(frozen=True)
class ClassifyConfig:
    ell: int = 10
    k: float = 2.0
    k_grid: Tuple[float, ...] = DEFAULT_K_GRID
    level: float = 0.01
    intercept_mode: str = "free"
    offset: float = 0.0
    standardization: str = "bins"
    refine_window: float = 0.0


@dataclass(frozen=True)
class Classification:
    ratio: RatioResult
    alpha: Optional[AlphaEstimate]

    @property
    def verdict(self) -> str:
        return self.ratio.verdict

    def to_dict(self) -> dict:
        return {
            "theta": self.ratio.theta,
            "k": self.ratio.k,
            "ratio": _json_float(self.ratio.ratio),
            "jump_z": _json_float(self.ratio.jump_z),
            "verdict": self.ratio.verdict,
            "alpha_hat": None if self.alpha is None else self.alpha.alpha_hat,
            "k_grid": None if self.alpha is None else list(self.alpha.k_grid),
        }


def _json_float(x):
    return float(x) if np.isfinite(x) else None


def localize(counts: CountSeries, theta: float, ell: int, window: float) -> float:
    """Grid time within ``window`` seconds of ``theta`` with the largest inner two-sided count.

    Ties go to the earliest time.  Points whose window leaves the session are ignored.
    """
    m0 = counts.index_of(theta)
    w = int(math.floor(window / counts.bin_width + 1e-9))
    ell = int(ell)
    lo, hi = max(m0 - w, ell), min(m0 + w, counts.counts.size - ell)
    if lo > hi:
        return float(theta)
    cs = np.concatenate([[0.0], np.cumsum(counts.counts)])
    m = np.arange(lo, hi + 1)
    return float(counts.time_of(m[np.argmax(cs[m + ell] - cs[m - ell])]))


def classify_event(counts: CountSeries, theta: float, config: ClassifyConfig = ClassifyConfig()) -> Classification:
    """Ratio screen, jump test and explosion-rate estimate at ``theta + offset``.

    With ``refine_window > 0`` the evaluation point is moved to :func:`localize`
    of ``theta + offset``, which centres the windows on a burst peak when the
    candidate time lags it.
    """
    at = theta + config.offset
    if config.refine_window > 0:
        at = localize(counts, at, config.ell, config.refine_window)
    ratio = jump_test(counts, at, config.ell, config.k, config.level, config.standardization)
    try:
        alpha = estimate_alpha(counts, at, config.ell, config.k_grid, "regression", config.intercept_mode)
    except EstimationError:
        alpha = None
    return Classification(ratio, alpha)
