"""File formats: event CSV, count CSV, seasonal-curve CSV and JSON documents.

All writers are atomic (temporary file in the target directory, then rename).
Timestamps are seconds from session open.

Scenario JSON schema (every key optional except ``base``)::

    {
      "base": "poisson" | "cir" | "hawkes",
      "rate": 1.0,
      "session": {"horizon_seconds": 23400, "grid_step": 0.01, "rate_scale": 1},
      "cir": {"lambda_bar": 1.0, "kappa": 0.03, "gamma": 0.2},
      "hawkes": {"lambda0": 0.5, "theta": 0.015, "kappa": 0.03},
      "diurnal": null | {"A": 0.75, "B": 0.25, "a1": 10, "a2": 10, "C": null},
      "burst": null | {"tau_ib": 11700, "alpha": 0.5, "sigma": 33.8, "half_width": 300}
                    | {"tau_ib": 11700, "alpha": 0.5, "c": 0.1, "half_width": 300},
      "jump": null | {"theta_jump": 11700, "mu_before": 1.0, "delta_mu": 1.0}
    }

A burst given by ``c`` is calibrated so that its expected event count is
``c`` times the expected count of the normal component.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
import warnings
from dataclasses import asdict
from pathlib import Path
from typing import Union

import numpy as np

from .errors import FormatError
from .estimate import CountSeries, SeasonalCurve
from .sim import (
    BurstParams,
    CirParams,
    DiurnalParams,
    EventStream,
    HawkesParams,
    JumpScenario,
    Scenario,
    SessionSpec,
    calibrate_burst_sigma,
)

PathLike = Union[str, os.PathLike]


def atomic_write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: PathLike, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, allow_nan=False) + "\n")


def read_json(path: PathLike):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON in {path}: {exc.msg}", line=exc.lineno) from exc


def _csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_rows(path: PathLike, header: tuple):
    """Yield ``(line_number, fields)`` after checking the header row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(f.strip() for f in first) != header:
            raise FormatError(f"expected header {','.join(header)}", line=1)
        for row in reader:
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(header):
                raise FormatError(f"expected {len(header)} fields, got {len(row)}", line=reader.line_num)
            yield reader.line_num, row


def _parse_float(text: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise FormatError(f"not a number: {text!r}", line=line) from None
    if not math.isfinite(v):
        raise FormatError(f"non-finite value: {text!r}", line=line)
    return v


# Events -------------------------------------------------------------------


def save_events(path: PathLike, events: EventStream) -> None:
    atomic_write_text(path, "time_s\n" + "".join(f"{t:.9f}\n" for t in events.times))


def load_events(path: PathLike, horizon: float = None) -> EventStream:
    """Read an event CSV.  ``horizon`` defaults to the last timestamp rounded up to a second."""
    times = []
    prev = -math.inf
    for line, (field,) in _read_rows(path, ("time_s",)):
        t = _parse_float(field, line)
        if t < 0:
            raise FormatError("negative timestamp", line=line)
        if t < prev:
            raise FormatError(f"timestamps must be ascending ({t} after {prev})", line=line)
        times.append(t)
        prev = t
    if not times:
        warnings.warn(f"{path}: no events", RuntimeWarning, stacklevel=2)
    if horizon is None:
        horizon = float(math.ceil(times[-1])) if times and times[-1] > 0 else 1.0
    if times and times[-1] > horizon:
        raise FormatError(f"timestamp {times[-1]} beyond horizon {horizon}")
    return EventStream(np.array(times, dtype=float), float(horizon))


# Counts -------------------------------------------------------------------


def save_counts(path: PathLike, counts: CountSeries) -> None:
    rows = ((f"{s:.9f}", repr(float(c))) for s, c in zip(counts.bin_starts, counts.counts))
    atomic_write_text(path, _csv_text(("bin_start_s", "count"), rows))


def load_counts(path: PathLike) -> CountSeries:
    starts, values = [], []
    for line, (s, c) in _read_rows(path, ("bin_start_s", "count")):
        starts.append(_parse_float(s, line))
        v = _parse_float(c, line)
        if v < 0:
            raise FormatError("negative count", line=line)
        values.append(v)
    if not starts:
        raise FormatError("count file has no rows")
    starts = np.array(starts)
    width = float(starts[1] - starts[0]) if starts.size > 1 else 1.0
    if width <= 0 or not np.allclose(np.diff(starts), width, rtol=0, atol=1e-6):
        raise FormatError("bin starts must form a uniform ascending grid")
    return CountSeries(round(width, 9), np.array(values), float(starts[0]))


# Seasonal curve -----------------------------------------------------------


def save_curve(path: PathLike, curve: SeasonalCurve) -> None:
    rows = ((i, repr(float(f))) for i, f in enumerate(curve.factors))
    atomic_write_text(path, _csv_text(("bin_index", "factor"), rows))


def load_curve(path: PathLike, bin_width: float = 1.0) -> SeasonalCurve:
    factors = []
    for line, (i, f) in _read_rows(path, ("bin_index", "factor")):
        if int(i) != len(factors):
            raise FormatError(f"bin_index {i} out of sequence", line=line)
        factors.append(_parse_float(f, line))
    if not factors:
        raise FormatError("seasonal curve file has no rows")
    return SeasonalCurve(np.array(factors), bin_width)


# Scenario -----------------------------------------------------------------


def scenario_to_dict(sc: Scenario, spec: SessionSpec) -> dict:
    return {
        "base": sc.base,
        "rate": sc.rate,
        "session": asdict(spec),
        "cir": asdict(sc.cir),
        "hawkes": asdict(sc.hawkes),
        "diurnal": None if sc.diurnal is None else asdict(sc.diurnal),
        "burst": None if sc.burst is None else asdict(sc.burst),
        "jump": None if sc.jump is None else asdict(sc.jump),
    }


def scenario_from_dict(doc: dict):
    """Return ``(Scenario, SessionSpec)`` from a parsed scenario document."""
    if not isinstance(doc, dict) or "base" not in doc:
        raise FormatError("scenario document must be an object with a 'base' key")
    try:
        spec = SessionSpec(**doc.get("session", {}))
        diurnal = None if doc.get("diurnal") is None else DiurnalParams(**doc["diurnal"])
        jump = None if doc.get("jump") is None else JumpScenario(**doc["jump"])
        sc = Scenario(
            base=doc["base"],
            rate=float(doc.get("rate", 1.0)),
            cir=CirParams(**doc.get("cir", {})),
            hawkes=HawkesParams(**doc.get("hawkes", {})),
            diurnal=diurnal,
            jump=jump,
        )
        b = doc.get("burst")
        if b is not None:
            b = dict(b)
            if "c" in b:
                if "sigma" in b:
                    raise FormatError("burst takes either 'c' or 'sigma', not both")
                hw = float(b.get("half_width", 300.0))
                base_integral = sc.base_mean_rate * spec.horizon_seconds
                b["sigma"] = calibrate_burst_sigma(float(b.pop("c")), float(b["alpha"]), hw, base_integral)
            sc = Scenario(sc.base, sc.rate, sc.cir, sc.hawkes, sc.diurnal, BurstParams(**b), sc.jump)
    except TypeError as exc:
        raise FormatError(f"bad scenario field: {exc}") from exc
    return sc, spec
