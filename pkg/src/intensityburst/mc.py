"""Monte Carlo rejection-rate experiments for the burst statistic.

Each replication draws one normal session of the chosen DGP (diurnal
intensity included), a burst time ``tau`` on the one-second grid, and for
every burst fraction ``c`` and explosion rate ``alpha`` superposes an
independent burst centred at ``tau``.  The counts are deflated by a seasonal
curve estimated from a separate pool of null sessions, and the statistic is
evaluated at ``tau`` for every bandwidth and kernel.

Seeds are derived from ``root_seed`` by spawn keys
``(dgp, stream, index[, component])`` where ``stream`` is 0 for replications
and 1 for the seasonal pool.  The normal session and burst uniforms of
replication ``r`` are shared across all ``(c, alpha)`` cells, so cells are
compared on common random numbers.
"""

from __future__ import annotations

import csv
import io as _io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.stats import norm

from .errors import BoundaryError, ConfigurationError
from .estimate import CountSeries, SeasonalCurve, as_kernel, bin_counts, curve_from_means, deflate
from .ibtest import TestConfig, _anchors, _differences, _result
from .sim import (
    BASES,
    COMPONENT_BURST,
    BurstParams,
    DiurnalParams,
    Scenario,
    SessionSpec,
    calibrate_burst_sigma,
    make_rng,
    make_seed_sequence,
    simulate_burst_events,
    simulate_scenario,
)

STREAM_REPLICATION = 0
STREAM_SEASONAL = 1
COMPONENT_TAU = 4

CellKey = Tuple[str, float, Optional[float], int, str, float]


@dataclass(frozen=True)
class ExperimentPlan:
    """Monte Carlo design for one DGP.

    ``K`` overrides ``K_multiplier * ell`` when set.  With ``diurnal=False``
    the sessions are stationary and no deflation is applied.  ``boundary``
    is passed to :class:`~intensityburst.ibtest.TestConfig`; the default
    ``'truncate'`` uses the anchors available after the session open, since
    ``tau`` may fall before ``2 ell + K`` seconds.
    """

    dgp: str = "poisson"
    burst_fractions: Tuple[float, ...] = (0.0,)
    alphas: Tuple[float, ...] = (0.25, 0.5, 0.75)
    bandwidths: Tuple[int, ...] = (60, 300, 600)
    kernels: Tuple[str, ...] = ("indicator", "exponential")
    quantiles: Tuple[float, ...] = (0.95, 0.99, 0.995)
    replications: int = 1000
    seasonal_estimation_days: int = 518
    root_seed: int = 0
    K_multiplier: int = 10
    K: Optional[int] = None
    diurnal: bool = True
    half_width: float = 300.0
    tau_range: Tuple[float, float] = (0.05, 0.95)
    horizon_seconds: float = 23400.0
    rate_scale: int = 1
    boundary: str = "truncate"
    workers: int = 1

    def __post_init__(self):
        for name in ("burst_fractions", "alphas", "bandwidths", "kernels", "quantiles", "tau_range"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.dgp not in BASES:
            raise ConfigurationError(f"dgp must be one of {BASES}")
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if not self.quantiles or not all(0 < q < 1 for q in self.quantiles):
            raise ConfigurationError("quantiles must be a nonempty set in (0, 1)")
        if not self.bandwidths or not self.kernels or not self.burst_fractions:
            raise ConfigurationError("bandwidths, kernels and burst_fractions must be nonempty")
        if any(c < 0 for c in self.burst_fractions):
            raise ConfigurationError("burst fractions must be nonnegative")
        if any(c > 0 for c in self.burst_fractions) and not self.alphas:
            raise ConfigurationError("power cells need at least one alpha")
        if not all(0 < a < 1 for a in self.alphas):
            raise ConfigurationError("alphas must lie in (0, 1)")
        for k in self.kernels:
            as_kernel(k)
        if self.diurnal and self.seasonal_estimation_days < 2:
            raise ConfigurationError("seasonal estimation needs at least two days")
        lo, hi = self.tau_range
        if not 0 <= lo < hi <= 1:
            raise ConfigurationError("tau_range must satisfy 0 <= lo < hi <= 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    @property
    def spec(self) -> SessionSpec:
        return SessionSpec(self.horizon_seconds, 0.01, self.rate_scale)

    @property
    def dgp_id(self) -> int:
        return BASES.index(self.dgp)

    def config(self, ell: int, kernel: str) -> TestConfig:
        K = self.K if self.K is not None else self.K_multiplier * ell
        return TestConfig(ell, K, as_kernel(kernel), "overlapping", self.boundary)

    def scenario(self) -> Scenario:
        return Scenario(base=self.dgp, diurnal=DiurnalParams() if self.diurnal else None)

    def tau_bounds(self) -> Tuple[int, int]:
        """Integer-second range for ``tau``: the requested fraction, at least ``3 max(ell)`` in,
        with the burst support inside the session."""
        T = self.horizon_seconds
        lo = max(math.ceil(self.tau_range[0] * T), 3 * max(self.bandwidths), math.ceil(self.half_width))
        hi = min(math.floor(self.tau_range[1] * T), math.floor(T - self.half_width))
        if lo > hi:
            raise ConfigurationError("session too short for the requested bandwidths")
        return int(lo), int(hi)

    def power_cells(self):
        return [(c, a) for c in sorted(set(self.burst_fractions)) if c > 0 for a in self.alphas]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentPlan":
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigurationError(f"bad plan field: {exc}") from exc


@dataclass(frozen=True)
class Cell:
    rate: float
    se: float
    replications: int


@dataclass
class RejectionTable:
    """Rejection rates keyed by ``(dgp, c, alpha, ell, kernel, quantile)``.

    ``alpha`` is ``None`` for null cells.  ``statistics`` keeps the raw
    statistic per ``(dgp, c, alpha, ell, kernel)`` in replication order.
    """

    cells: Dict[CellKey, Cell] = field(default_factory=dict)
    statistics: Dict[tuple, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cells)

    def rate(self, dgp, c, alpha, ell, kernel, quantile) -> float:
        return self.cells[(dgp, float(c), None if alpha is None else float(alpha), int(ell), kernel, float(quantile))].rate

    def add(self, key: tuple, stats: np.ndarray, quantiles) -> None:
        self.statistics[key] = stats
        R = stats.size
        for q in quantiles:
            p = float(np.mean(stats > norm.ppf(q)))
            self.cells[key + (float(q),)] = Cell(p, math.sqrt(p * (1 - p) / R), R)

    def __eq__(self, other):
        if not isinstance(other, RejectionTable):
            return NotImplemented
        return self.cells == other.cells and self.statistics.keys() == other.statistics.keys() and all(
            np.array_equal(v, other.statistics[k], equal_nan=True) for k, v in self.statistics.items()
        )


# ---------------------------------------------------------------------------
# Simulation workers
# ---------------------------------------------------------------------------


def _session_counts(plan: ExperimentPlan, seed) -> np.ndarray:
    events, _ = simulate_scenario(plan.scenario(), plan.spec, seed, want_path=False)
    return bin_counts(events, 1.0, plan.horizon_seconds).counts


@lru_cache(maxsize=8)
def _seasonal_means(plan: ExperimentPlan) -> np.ndarray:
    """Cross-day mean counts of the seasonal pool (depends only on the null DGP)."""
    total = np.zeros(int(round(plan.horizon_seconds)))
    for d in range(plan.seasonal_estimation_days):
        total += _session_counts(plan, make_seed_sequence(plan.root_seed, plan.dgp_id, STREAM_SEASONAL, d))
    return total / plan.seasonal_estimation_days


def _pool_key(plan: ExperimentPlan) -> ExperimentPlan:
    # fields that do not affect the null pool are normalized so the cache is shared
    return ExperimentPlan(
        dgp=plan.dgp, replications=1, seasonal_estimation_days=plan.seasonal_estimation_days,
        root_seed=plan.root_seed, diurnal=plan.diurnal, horizon_seconds=plan.horizon_seconds,
        rate_scale=plan.rate_scale,
    )


def seasonal_curve(plan: ExperimentPlan):
    """Seasonal curve from the plan's pool of null sessions, or ``None`` without diurnal effects."""
    if not plan.diurnal:
        return None
    return curve_from_means(_seasonal_means(_pool_key(plan)), 1.0)


def _evaluate(counts: np.ndarray, curve, m: int, plan: ExperimentPlan) -> np.ndarray:
    series = CountSeries(1.0, counts)
    if curve is not None:
        series = deflate(series, curve)
    out = []
    for ell in plan.bandwidths:
        for kernel in plan.kernels:
            cfg = plan.config(ell, kernel)
            D = _differences(series, cfg)
            try:
                if not np.isfinite(D[m]):
                    raise BoundaryError("insufficient history")
                out.append(_result(m, D[m], _anchors(m, cfg, D), cfg).statistic)
            except BoundaryError:
                out.append(np.nan)
    return np.array(out)


def replicate(plan: ExperimentPlan, r: int, curve=None) -> Tuple[int, np.ndarray]:
    """One replication: ``(tau, stats)`` with ``stats[cell, ell, kernel]``; cell 0 is the null."""
    seed = make_seed_sequence(plan.root_seed, plan.dgp_id, STREAM_REPLICATION, r)
    lo, hi = plan.tau_bounds()
    tau = int(make_rng(seed, COMPONENT_TAU).integers(lo, hi + 1))
    base = _session_counts(plan, seed)
    spec = plan.spec
    base_integral = plan.scenario().base_mean_rate * plan.horizon_seconds
    shape = (len(plan.bandwidths), len(plan.kernels))
    rows = [_evaluate(base, curve, tau, plan).reshape(shape)]
    for c, alpha in plan.power_cells():
        sigma = calibrate_burst_sigma(c, alpha, plan.half_width, base_integral)
        b = BurstParams(float(tau), alpha, sigma, plan.half_width)
        burst = simulate_burst_events(b, spec, make_seed_sequence(seed, COMPONENT_BURST))
        counts = base + bin_counts(burst, 1.0, plan.horizon_seconds).counts
        rows.append(_evaluate(counts, curve, tau, plan).reshape(shape))
    return tau, np.stack(rows)


def _replicate_chunk(args):
    plan, rs, curve_factors = args
    curve = None if curve_factors is None else SeasonalCurve(curve_factors, 1.0)
    return [replicate(plan, r, curve) for r in rs]


def run_experiment(plan: ExperimentPlan) -> RejectionTable:
    """Run all replications of ``plan`` and aggregate rejection rates."""
    curve = seasonal_curve(plan)
    R = plan.replications
    if plan.workers == 1:
        results = [replicate(plan, r, curve) for r in range(R)]
    else:
        chunks = np.array_split(np.arange(R), plan.workers * 4)
        factors = None if curve is None else np.asarray(curve.factors)
        with ProcessPoolExecutor(plan.workers) as ex:
            parts = ex.map(_replicate_chunk, [(plan, [int(r) for r in ch], factors) for ch in chunks if ch.size])
            results = [x for part in parts for x in part]
    stats = np.stack([s for _, s in results])  # (R, cells, ell, kernel)
    table = RejectionTable()
    cells = [(0.0, None)] + plan.power_cells()
    for ci, (c, alpha) in enumerate(cells):
        for li, ell in enumerate(plan.bandwidths):
            for ki, kernel in enumerate(plan.kernels):
                key = (plan.dgp, float(c), None if alpha is None else float(alpha), int(ell), kernel)
                table.add(key, stats[:, ci, li, ki], plan.quantiles)
    return table


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------


def _panel_label(c: float) -> str:
    return "size" if c == 0 else "power"


def format_table(table: RejectionTable, layout: str = "panels") -> str:
    """Panels of rejection rates (percent, one decimal) or one CSV row per cell."""
    if not table.cells:
        raise ConfigurationError("empty table")
    keys = sorted(table.cells, key=lambda k: (k[0], k[1], -1 if k[2] is None else k[2], k[4], k[3], k[5]))
    if layout == "long_csv":
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dgp", "c", "alpha", "ell", "kernel", "quantile", "rate", "se", "replications"])
        for k in keys:
            cell = table.cells[k]
            w.writerow([k[0], k[1], "" if k[2] is None else k[2], k[3], k[4], k[5],
                        f"{cell.rate:.6f}", f"{cell.se:.6f}", cell.replications])
        return buf.getvalue()
    if layout != "panels":
        raise ConfigurationError("layout must be 'panels' or 'long_csv'")

    lines = []
    for dgp in sorted({k[0] for k in keys}):
        sub = [k for k in keys if k[0] == dgp]
        kernels = sorted({k[4] for k in sub}, key=lambda s: (s != "indicator", s))
        ells = sorted({k[3] for k in sub})
        qs = sorted({k[5] for k in sub})
        cols = [(kern, ell, q) for kern in kernels for ell in ells for q in qs]
        lines.append(f"DGP: {dgp}")
        lines.append(" " * 14 + " ".join(f"{kern[:3]}/{ell}".rjust(7 * len(qs) - 1) for kern in kernels for ell in ells))
        lines.append(" " * 14 + " ".join(f"z{q:.3f}".rjust(6) for _ in kernels for _ in ells for q in qs))
        for c in sorted({k[1] for k in sub}):
            lines.append(f"{_panel_label(c)} (c = {c:.3f})")
            alphas = sorted({k[2] for k in sub if k[1] == c}, key=lambda a: -1 if a is None else a)
            for a in alphas:
                label = "" if a is None else f"alpha = {a:.2f}"
                vals = []
                for kern, ell, q in cols:
                    cell = table.cells.get((dgp, c, a, ell, kern, q))
                    vals.append("".rjust(6) if cell is None else f"{100 * cell.rate:.1f}".rjust(6))
                lines.append(label.ljust(14) + " ".join(vals))
        lines.append("")
    return "\n".join(lines)


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1))
