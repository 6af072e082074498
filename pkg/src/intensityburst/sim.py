"""Simulation of the event-stream data-generating processes.

Time is measured in seconds on a session ``[0, horizon]`` (default a 6.5 hour
trading day of 23,400 s).  Rates are events per second.  The CIR and Hawkes
mean-reversion speeds ``kappa`` are per second as well, while the diurnal
curve is defined on normalized time ``s = t / horizon``.

Every generator is a pure function of its configuration and ``seed``.  A seed
is either an integer or a :class:`numpy.random.SeedSequence`; sub-streams are
derived with :func:`make_rng` by appending integer keys (scenario id,
replication index, component id) to the seed's spawn key.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from numba import njit
from scipy import integrate

from .errors import CapacityError, ConfigurationError, ParameterError

SeedLike = Union[int, np.random.SeedSequence]

# component ids used when deriving sub-streams
COMPONENT_BURST = 1
COMPONENT_INITIAL = 2
COMPONENT_PATH = 3

MAX_EXPECTED_EVENTS = 2**31


def make_seed_sequence(seed: SeedLike, *keys: int) -> np.random.SeedSequence:
    """Derive a child seed sequence by appending ``keys`` to the spawn key."""
    keys = tuple(int(k) for k in keys)
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + keys)
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be an integer or SeedSequence, got {seed!r}")
    if seed < 0 or seed >= 2**64:
        raise ParameterError("seed must be a 64-bit unsigned integer")
    return np.random.SeedSequence(int(seed), spawn_key=keys)


def make_rng(seed: SeedLike, *keys: int) -> np.random.Generator:
    return np.random.default_rng(make_seed_sequence(seed, *keys))


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SessionSpec:
    """Session length, simulation grid and heavy-traffic multiplier ``n``."""

    horizon_seconds: float = 23400.0
    grid_step: float = 0.01
    rate_scale: int = 1

    def __post_init__(self):
        if not self.horizon_seconds > 0:
            raise ParameterError("horizon_seconds must be positive")
        if not self.grid_step > 0:
            raise ParameterError("grid_step must be positive")
        ratio = self.horizon_seconds / self.grid_step
        if abs(ratio - round(ratio)) > 1e-6 * max(1.0, ratio) or round(ratio) < 1:
            raise ParameterError("horizon_seconds / grid_step must be a positive integer")
        if int(self.rate_scale) != self.rate_scale or self.rate_scale < 1:
            raise ParameterError("rate_scale must be an integer >= 1")

    @property
    def n_grid(self) -> int:
        return int(round(self.horizon_seconds / self.grid_step))


@dataclass(frozen=True)
class CirParams:
    """Square-root diffusion ``d mu = kappa (lambda_bar - mu) dt + gamma sqrt(mu) dW``.

    ``kappa`` is per second and ``gamma`` per square-root second.
    """

    lambda_bar: float = 1.0
    kappa: float = 0.03
    gamma: float = 0.20

    def __post_init__(self):
        if not self.lambda_bar > 0 or not self.kappa > 0:
            raise ParameterError("lambda_bar and kappa must be positive")
        if not self.gamma >= 0:
            raise ParameterError("gamma must be nonnegative")
        if 2 * self.lambda_bar * self.kappa < self.gamma**2:
            warnings.warn("CIR parameters violate the Feller condition", RuntimeWarning, stacklevel=3)

    @property
    def stationary_variance(self) -> float:
        return self.lambda_bar * self.gamma**2 / (2 * self.kappa)


@dataclass(frozen=True)
class HawkesParams:
    """Exponential Hawkes intensity ``lambda0 + sum theta exp(-kappa (t - t_i))``."""

    lambda0: float = 0.5
    theta: float = 0.015
    kappa: float = 0.03

    def __post_init__(self):
        if not self.lambda0 > 0 or not self.kappa > 0 or not self.theta >= 0:
            raise ParameterError("need lambda0 > 0, theta >= 0, kappa > 0")
        if self.theta / self.kappa >= 1:
            raise ParameterError("Hawkes process is nonstationary: theta / kappa must be < 1")

    @property
    def stationary_mean(self) -> float:
        return self.lambda0 / (1.0 - self.theta / self.kappa)


@dataclass(frozen=True)
class BurstParams:
    """Singular burst intensity ``sigma / |tau_ib - t|**alpha`` on ``[tau - h, tau + h]``.

    The support defaults to a 10-minute window (``half_width`` of 300 s).
    """

    tau_ib: float
    alpha: float
    sigma: float
    half_width: float = 300.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        if not self.sigma >= 0:
            raise ParameterError("sigma must be nonnegative")
        if not self.half_width > 0:
            raise ParameterError("half_width must be positive")
        if not self.tau_ib > 0:
            raise ParameterError("tau_ib must be positive")

    @property
    def total_mass(self) -> float:
        """Integral of the burst intensity over its support."""
        return 2 * self.sigma * self.half_width ** (1 - self.alpha) / (1 - self.alpha)

    def check_within(self, horizon: float) -> None:
        if self.tau_ib - self.half_width < 0 or self.tau_ib + self.half_width > horizon:
            raise ParameterError("burst support must lie within the session")

    def intensity(self, t):
        """Pointwise intensity; infinite at ``t == tau_ib``."""
        t = np.asarray(t, dtype=float)
        dist = np.abs(self.tau_ib - t)
        with np.errstate(divide="ignore"):
            out = np.where(dist <= self.half_width, self.sigma / dist**self.alpha, 0.0)
        return out


@dataclass(frozen=True)
class DiurnalParams:
    """Intraday curve ``C + A exp(-a1 s) + B exp(-a2 (1 - s))`` on ``s in [0, 1]``.

    With ``C=None`` the constant is solved so the curve integrates to one.
    The literal published constant 0.89998744 integrates to 0.999983, which
    is accepted with a warning.
    """

    A: float = 0.75
    B: float = 0.25
    a1: float = 10.0
    a2: float = 10.0
    C: Optional[float] = None

    def __post_init__(self):
        if not self.a1 > 0 or not self.a2 > 0:
            raise ParameterError("a1 and a2 must be positive")
        if self.C is None:
            object.__setattr__(self, "C", 1.0 - self._exp_mass())
        total, _ = integrate.quad(self.factor, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
        if abs(total - 1.0) > 1e-6:
            warnings.warn(
                f"diurnal curve integrates to {total:.9f}, not 1", RuntimeWarning, stacklevel=3
            )
        lo = min(self.factor(0.0), self.factor(1.0), self.factor(self._argmin()))
        if not lo > 0:
            raise ParameterError("diurnal curve must be strictly positive on [0, 1]")

    def _exp_mass(self) -> float:
        return (self.A * -math.expm1(-self.a1) / self.a1) + (self.B * -math.expm1(-self.a2) / self.a2)

    def _argmin(self) -> float:
        grid = np.linspace(0.0, 1.0, 2001)
        return float(grid[np.argmin(self.factor(grid))])

    @property
    def integral(self) -> float:
        return float(self.C + self._exp_mass())

    def factor(self, s):
        s = np.asarray(s, dtype=float)
        return self.C + self.A * np.exp(-self.a1 * s) + self.B * np.exp(-self.a2 * (1.0 - s))

    def cumulative(self, s):
        """``int_0^s factor(u) du`` in normalized time."""
        s = np.asarray(s, dtype=float)
        return (
            self.C * s
            + self.A * -np.expm1(-self.a1 * s) / self.a1
            + self.B * (np.exp(-self.a2 * (1.0 - s)) - math.exp(-self.a2)) / self.a2
        )

    def inverse_cumulative(self, v):
        """Solve ``cumulative(s) = v`` for ``s`` (vectorized Newton on a monotone map)."""
        v = np.asarray(v, dtype=float)
        grid = np.linspace(0.0, 1.0, 4097)
        s = np.interp(v, self.cumulative(grid), grid)
        for _ in range(6):
            s = s - (self.cumulative(s) - v) / self.factor(s)
            np.clip(s, 0.0, 1.0, out=s)
        return s


@dataclass(frozen=True)
class JumpScenario:
    """Piecewise-constant base intensity with one discontinuity at ``theta_jump``."""

    theta_jump: float
    mu_before: float = 1.0
    delta_mu: float = 1.0

    def __post_init__(self):
        if not self.mu_before > 0:
            raise ParameterError("mu_before must be positive")
        if not self.mu_before + self.delta_mu > 0:
            raise ParameterError("intensity after the jump must be positive")

    @property
    def mu_after(self) -> float:
        return self.mu_before + self.delta_mu


@dataclass(frozen=True, eq=False)
class EventStream:
    """Sorted event timestamps (seconds) of one session."""

    times: np.ndarray
    horizon: float

    def __post_init__(self):
        times = np.array(self.times, dtype=float).ravel()
        if times.size:
            if np.any(np.diff(times) < 0):
                raise ParameterError("event times must be nondecreasing")
            if times[0] < 0 or times[-1] > self.horizon:
                raise ParameterError("event times must lie within [0, horizon]")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return self.horizon == other.horizon and np.array_equal(self.times, other.times)

    def merge(self, other: "EventStream") -> "EventStream":
        if other.horizon != self.horizon:
            raise ConfigurationError("cannot merge streams with different horizons")
        return EventStream(np.sort(np.concatenate([self.times, other.times]), kind="mergesort"), self.horizon)


@dataclass(frozen=True, eq=False)
class IntensityPath:
    """Latent intensity sampled on a uniform grid, left-constant on each cell."""

    grid_step: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ParameterError("intensity path must be finite and nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.values.size) * self.grid_step

    @property
    def horizon(self) -> float:
        return self.values.size * self.grid_step

    def compensator(self, t):
        """Exact integral of the piecewise-constant path from 0 to ``t``."""
        t = np.asarray(t, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.values) * self.grid_step])
        cell = np.clip(np.floor(t / self.grid_step).astype(np.int64), 0, self.values.size - 1)
        return cum[cell] + self.values[cell] * (t - cell * self.grid_step)

    def bin_average(self, bin_width: float) -> np.ndarray:
        """Average intensity on coarser bins (``bin_width`` a multiple of the grid step)."""
        per = int(round(bin_width / self.grid_step))
        m = self.values.size // per
        return self.values[: m * per].reshape(m, per).mean(axis=1)


# ---------------------------------------------------------------------------
# Homogeneous Poisson
# ---------------------------------------------------------------------------


def _check_capacity(expected: float) -> None:
    if not expected < MAX_EXPECTED_EVENTS:
        raise CapacityError(f"expected event count {expected:.3g} exceeds 2**31")


def simulate_poisson(rate: float, spec: SessionSpec, seed: SeedLike) -> EventStream:
    """Homogeneous Poisson stream with intensity ``rate * rate_scale``."""
    if not rate >= 0:
        raise ParameterError("rate must be nonnegative")
    expected = rate * spec.rate_scale * spec.horizon_seconds
    _check_capacity(expected)
    rng = make_rng(seed)
    count = rng.poisson(expected)
    times = np.sort(rng.uniform(0.0, spec.horizon_seconds, size=count))
    return EventStream(times, spec.horizon_seconds)


def _time_changed_poisson(rng, total_mass, inverse, horizon):
    count = rng.poisson(total_mass)
    marks = np.sort(rng.uniform(0.0, total_mass, size=count))
    times = np.clip(inverse(marks), 0.0, horizon)
    return EventStream(np.maximum.accumulate(times) if times.size else times, horizon)


# ---------------------------------------------------------------------------
# CIR intensity
# ---------------------------------------------------------------------------


@njit(cache=True)
def _cir_full_truncation(x0, lambda_bar, kappa, gamma, dt, shocks):
    out = np.empty(shocks.size + 1)
    out[0] = x0
    sq = math.sqrt(dt)
    x = x0
    for k in range(shocks.size):
        xp = x if x > 0.0 else 0.0
        x = x + kappa * (lambda_bar - xp) * dt + gamma * math.sqrt(xp) * sq * shocks[k]
        if x < 0.0:
            x = 0.0
        out[k + 1] = x
    return out


def simulate_cir_path(
    p: CirParams, spec: SessionSpec, seed: SeedLike, mu0: Optional[float] = None
) -> IntensityPath:
    """Euler scheme with full truncation on the session grid.

    The initial value is drawn from the stationary Gamma law with shape
    ``2 lambda kappa / gamma**2`` and rate ``2 kappa / gamma**2`` unless
    ``mu0`` is given (or ``gamma == 0``, where it defaults to ``lambda_bar``).
    """
    rng = make_rng(seed)
    if mu0 is None:
        if p.gamma == 0:
            mu0 = p.lambda_bar
        else:
            shape = 2 * p.lambda_bar * p.kappa / p.gamma**2
            rate = 2 * p.kappa / p.gamma**2
            mu0 = rng.gamma(shape, 1.0 / rate)
    shocks = rng.standard_normal(spec.n_grid - 1)
    values = _cir_full_truncation(float(mu0), p.lambda_bar, p.kappa, p.gamma, spec.grid_step, shocks)
    return IntensityPath(spec.grid_step, values)


def sample_from_intensity_path(
    path: IntensityPath, spec: SessionSpec, seed: SeedLike, block_cells: int = 1000
) -> EventStream:
    """Cox sampling by thinning against block-wise constant majorants.

    The path is treated as left-constant on each grid cell and multiplied by
    ``rate_scale``.
    """
    values = path.values
    dt = path.grid_step
    horizon = values.size * dt
    n = spec.rate_scale
    _check_capacity(n * float(values.sum()) * dt)
    rng = make_rng(seed)
    n_blocks = -(-values.size // block_cells)
    padded = np.zeros(n_blocks * block_cells)
    padded[: values.size] = values
    majorant = padded.reshape(n_blocks, block_cells).max(axis=1)
    block_len = np.full(n_blocks, block_cells * dt)
    block_len[-1] = (values.size - (n_blocks - 1) * block_cells) * dt
    proposals = rng.poisson(n * majorant * block_len)
    block_of = np.repeat(np.arange(n_blocks), proposals)
    t = block_of * (block_cells * dt) + rng.uniform(size=block_of.size) * block_len[block_of]
    cell = np.minimum((t / dt).astype(np.int64), values.size - 1)
    u = rng.uniform(size=t.size)
    keep = u * majorant[block_of] < values[cell]
    times = np.sort(np.minimum(t[keep], horizon))
    return EventStream(times, spec.horizon_seconds)


# ---------------------------------------------------------------------------
# Hawkes
# ---------------------------------------------------------------------------


@njit(cache=True)
def _ogata_exponential(rng, lambda0, theta, kappa, horizon, record):
    cap = 1024
    events = np.empty(cap)
    n_events = 0
    tcap = 1024 if record else 1
    trace = np.empty((tcap, 4))  # proposal time, majorant, uniform, accepted
    n_trace = 0
    t = 0.0
    excite = 0.0
    while True:
        bound = lambda0 + excite
        w = rng.exponential(1.0 / bound)
        t += w
        if t > horizon:
            break
        excite *= math.exp(-kappa * w)
        u = rng.random()
        accepted = u * bound <= lambda0 + excite
        if record:
            if n_trace == tcap:
                tcap *= 2
                grown = np.empty((tcap, 4))
                grown[:n_trace] = trace[:n_trace]
                trace = grown
            trace[n_trace, 0] = t
            trace[n_trace, 1] = bound
            trace[n_trace, 2] = u
            trace[n_trace, 3] = 1.0 if accepted else 0.0
            n_trace += 1
        if accepted:
            if n_events == cap:
                cap *= 2
                grown_e = np.empty(cap)
                grown_e[:n_events] = events[:n_events]
                events = grown_e
            events[n_events] = t
            n_events += 1
            excite += theta
    return events[:n_events], trace[:n_trace]


@njit(cache=True)
def _hawkes_intensity_on_grid(events, lambda0, theta, kappa, grid):
    """Left-limit intensity at each (nondecreasing) grid time."""
    out = np.empty(grid.size)
    excite = 0.0
    last = 0.0
    j = 0
    for k in range(grid.size):
        g = grid[k]
        while j < events.size and events[j] < g:
            excite = excite * math.exp(-kappa * (events[j] - last)) + theta
            last = events[j]
            j += 1
        out[k] = lambda0 + excite * math.exp(-kappa * (g - last))
    return out


def hawkes_intensity(events, p: HawkesParams, times) -> np.ndarray:
    """Hawkes intensity ``lambda(t-)`` at ``times`` given one copy's event history."""
    events = np.asarray(events, dtype=float)
    times = np.asarray(times, dtype=float)
    order = np.argsort(times, kind="stable")
    out = np.empty(times.size)
    out[order] = _hawkes_intensity_on_grid(events, p.lambda0, p.theta, p.kappa, times[order])
    return out


def hawkes_compensator(events, p: HawkesParams, times) -> np.ndarray:
    """``int_0^t`` of the Hawkes intensity for one copy."""
    events = np.asarray(events, dtype=float)
    times = np.asarray(times, dtype=float)
    out = p.lambda0 * times
    for i, t in enumerate(times):
        past = events[events < t]
        out[i] += (p.theta / p.kappa) * np.sum(-np.expm1(-p.kappa * (t - past)))
    return out


def _hawkes_copies(p: HawkesParams, horizon: float, rng, copies: int):
    return [_ogata_exponential(rng, p.lambda0, p.theta, p.kappa, horizon, False)[0] for _ in range(copies)]


def simulate_hawkes(p: HawkesParams, spec: SessionSpec, seed: SeedLike) -> EventStream:
    """Exact Ogata thinning of ``rate_scale`` independent stacked copies."""
    _check_capacity(p.stationary_mean * spec.rate_scale * spec.horizon_seconds)
    rng = make_rng(seed)
    copies = _hawkes_copies(p, spec.horizon_seconds, rng, spec.rate_scale)
    times = np.sort(np.concatenate(copies), kind="mergesort")
    return EventStream(times, spec.horizon_seconds)


def hawkes_thinning_trace(p: HawkesParams, spec: SessionSpec, seed: SeedLike):
    """Replay the first copy of :func:`simulate_hawkes` recording every proposal.

    Returns ``(events, trace)`` where the trace columns are proposal time,
    majorant, uniform draw and an accepted flag.
    """
    rng = make_rng(seed)
    return _ogata_exponential(rng, p.lambda0, p.theta, p.kappa, spec.horizon_seconds, True)


# ---------------------------------------------------------------------------
# Bursts
# ---------------------------------------------------------------------------


def burst_compensator(b: BurstParams, t):
    """Closed-form ``int_0^t beta_s ds`` (continuous across the singularity)."""
    t = np.asarray(t, dtype=float)
    e = 1.0 - b.alpha
    scale = b.sigma / e
    head = b.half_width**e
    left = np.clip(b.tau_ib - t, 0.0, b.half_width)
    right = np.clip(t - b.tau_ib, 0.0, b.half_width)
    val = np.where(t <= b.tau_ib, scale * (head - left**e), scale * (head + right**e))
    val = np.where(t <= b.tau_ib - b.half_width, 0.0, val)
    return val if val.ndim else float(val)


def inverse_burst_compensator(b: BurstParams, v):
    """Invert :func:`burst_compensator` branch-wise for ``v`` in ``(0, total_mass)``."""
    v = np.asarray(v, dtype=float)
    e = 1.0 - b.alpha
    head = b.half_width**e
    s = v * e / b.sigma
    left = b.tau_ib - np.clip(head - s, 0.0, None) ** (1.0 / e)
    right = b.tau_ib + np.clip(s - head, 0.0, None) ** (1.0 / e)
    return np.where(s < head, left, right)


def calibrate_burst_sigma(c: float, alpha: float, half_width: float, base_integral: float) -> float:
    """Scale ``sigma`` so the burst adds ``c * base_integral`` expected events."""
    if not c >= 0 or not 0 < alpha < 1 or not half_width > 0 or not base_integral > 0:
        raise ParameterError("need c >= 0, alpha in (0,1), half_width > 0, base_integral > 0")
    return c * (1.0 - alpha) / (2.0 * half_width ** (1.0 - alpha)) * base_integral


def simulate_burst_events(b: BurstParams, spec: SessionSpec, seed: SeedLike) -> EventStream:
    """Exact inhomogeneous Poisson draw by inverting the burst compensator."""
    b.check_within(spec.horizon_seconds)
    total = spec.rate_scale * b.total_mass
    _check_capacity(total)
    rng = make_rng(seed)
    count = rng.poisson(total)
    if count == 0:
        return EventStream(np.empty(0), spec.horizon_seconds)
    # open interval (0, 1): 1 - random() lies in (0, 1]; reject the endpoint
    u = 1.0 - rng.random(count)
    u = np.where(u >= 1.0, np.nextafter(1.0, 0.0), u)
    marks = np.sort(u) * b.total_mass
    times = inverse_burst_compensator(b, marks)
    times = np.where(times == b.tau_ib, np.nextafter(b.tau_ib, np.inf), times)
    return EventStream(np.sort(times), spec.horizon_seconds)


# ---------------------------------------------------------------------------
# Diurnal curve and scenario composition
# ---------------------------------------------------------------------------


def diurnal_factor(d: DiurnalParams, t_normalized):
    t = np.asarray(t_normalized, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ParameterError("normalized time must lie in [0, 1]")
    out = d.factor(t)
    return out if out.ndim else float(out)


BASES = ("poisson", "cir", "hawkes")


@dataclass(frozen=True)
class Scenario:
    """Full configuration of one simulated session."""

    base: str = "poisson"
    rate: float = 1.0
    cir: CirParams = field(default_factory=CirParams)
    hawkes: HawkesParams = field(default_factory=HawkesParams)
    diurnal: Optional[DiurnalParams] = None
    burst: Optional[BurstParams] = None
    jump: Optional[JumpScenario] = None

    def __post_init__(self):
        if self.base not in BASES:
            raise ConfigurationError(f"base must be one of {BASES}, got {self.base!r}")
        if self.burst is not None and self.jump is not None:
            raise ConfigurationError("a scenario may contain a burst or a jump, not both")

    @property
    def base_mean_rate(self) -> float:
        """Unconditional mean of the stationary (pre-diurnal) intensity."""
        if self.jump is not None:
            return self.jump.mu_before
        if self.base == "cir":
            return self.cir.lambda_bar
        if self.base == "hawkes":
            return self.hawkes.stationary_mean
        return self.rate


class _Clock:
    """Diurnal business clock ``D(t) = horizon * cumulative(t / horizon)``."""

    def __init__(self, diurnal: Optional[DiurnalParams], horizon: float):
        self.d = diurnal
        self.T = horizon

    @property
    def total(self) -> float:
        return self.T if self.d is None else self.T * self.d.integral

    def forward(self, t):
        t = np.asarray(t, dtype=float)
        return t if self.d is None else self.T * self.d.cumulative(t / self.T)

    def inverse(self, u):
        u = np.asarray(u, dtype=float)
        return u if self.d is None else self.T * self.d.inverse_cumulative(u / self.T)

    def factor(self, t):
        t = np.asarray(t, dtype=float)
        return np.ones_like(t) if self.d is None else self.d.factor(t / self.T)


def _normal_component(sc: Scenario, spec: SessionSpec, seed: SeedLike, want_path: bool):
    T = spec.horizon_seconds
    n = spec.rate_scale
    clock = _Clock(sc.diurnal, T)
    grid = np.arange(spec.n_grid) * spec.grid_step if want_path else None

    if sc.jump is not None:
        j = sc.jump
        if not 0 < j.theta_jump < T:
            raise ParameterError("jump location must lie inside the session")
        u_theta = float(clock.forward(j.theta_jump))
        total = n * (j.mu_before * u_theta + j.mu_after * (clock.total - u_theta))
        _check_capacity(total)

        def inverse(v):
            v = v / n
            pre = j.mu_before * u_theta
            u = np.where(v < pre, v / j.mu_before, u_theta + (v - pre) / j.mu_after)
            return clock.inverse(u)

        events = _time_changed_poisson(make_rng(seed), total, inverse, T)
        values = None
        if want_path:
            values = np.where(grid < j.theta_jump, j.mu_before, j.mu_after) * clock.factor(grid)
        return events, values

    if sc.base == "poisson":
        if sc.diurnal is None:
            events = simulate_poisson(sc.rate, spec, seed)
        else:
            total = n * sc.rate * clock.total
            _check_capacity(total)
            events = _time_changed_poisson(
                make_rng(seed), total, lambda v: clock.inverse(v / (n * sc.rate)) if sc.rate > 0 else v, T
            )
        values = sc.rate * clock.factor(grid) if want_path else None
        return events, values

    if sc.base == "cir":
        path = simulate_cir_path(sc.cir, spec, make_seed_sequence(seed, COMPONENT_PATH))
        values = path.values * clock.factor(path.grid) if sc.diurnal is not None else path.values
        events = sample_from_intensity_path(IntensityPath(spec.grid_step, values), spec, seed)
        return events, (values if want_path else None)

    # Hawkes copies run on the business clock and are mapped back to calendar time
    p = sc.hawkes
    _check_capacity(p.stationary_mean * n * T)
    rng = make_rng(seed)
    copies = _hawkes_copies(p, clock.total, rng, n)
    times = np.sort(np.concatenate(copies), kind="mergesort")
    times = np.clip(clock.inverse(times), 0.0, T)
    events = EventStream(np.maximum.accumulate(times) if times.size else times, T)
    values = None
    if want_path:
        ugrid = clock.forward(grid)
        h = np.zeros(grid.size)
        for c in copies:
            h += _hawkes_intensity_on_grid(c, p.lambda0, p.theta, p.kappa, ugrid)
        values = h / n * clock.factor(grid)
    return events, values


def simulate_scenario(sc: Scenario, spec: SessionSpec, seed: SeedLike, want_path: bool = True):
    """Simulate a scenario, returning ``(EventStream, IntensityPath or None)``.

    The normal component consumes ``seed`` directly; the burst stream uses the
    derived sub-stream ``(seed, COMPONENT_BURST)``.
    """
    events, values = _normal_component(sc, spec, seed, want_path)
    if sc.burst is not None:
        burst = simulate_burst_events(sc.burst, spec, make_seed_sequence(seed, COMPONENT_BURST))
        events = events.merge(burst)
        if want_path:
            edges = np.arange(spec.n_grid + 1) * spec.grid_step
            values = values + np.diff(burst_compensator(sc.burst, edges)) / spec.grid_step
    path = IntensityPath(spec.grid_step, values) if want_path else None
    return events, path


def compose_scenario(
    base: str,
    spec: SessionSpec,
    seed: SeedLike,
    *,
    diurnal: Optional[DiurnalParams] = None,
    burst: Optional[BurstParams] = None,
    jump: Optional[JumpScenario] = None,
    rate: float = 1.0,
    cir: Optional[CirParams] = None,
    hawkes: Optional[HawkesParams] = None,
):
    """Multiply the stationary intensity by the diurnal curve and superpose a burst.

    Returns the event stream and the ground-truth intensity path (the burst
    enters the path as its cell-averaged intensity, which is finite).
    """
    sc = Scenario(
        base=base,
        rate=rate,
        cir=cir or CirParams(),
        hawkes=hawkes or HawkesParams(),
        diurnal=diurnal,
        burst=burst,
        jump=jump,
    )
    return simulate_scenario(sc, spec, seed)
