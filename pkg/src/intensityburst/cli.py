"""Command-line entry point: ``intensityburst <subcommand> ...``.

Output directories default to ``$INTENSITYBURST_OUTPUT_DIR`` (else ``.``).
Failures print ``{"error": {"code": ..., "message": ...}}`` to stderr and
exit with status 1; usage errors exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import io
from .classify import DEFAULT_K_GRID, ClassifyConfig, classify_event
from .errors import InputError, IntensityBurstError
from .estimate import CountSeries, bin_counts, deflate, estimate_seasonality, spot_series
from .ibtest import TestConfig, detect_day, statistic_series
from .mc import ExperimentPlan, format_table, run_experiment
from .sim import make_seed_sequence, simulate_scenario

OUTPUT_ENV = "INTENSITYBURST_OUTPUT_DIR"


def _out_dir(args) -> Path:
    return Path(args.out if args.out is not None else os.environ.get(OUTPUT_ENV, "."))


def _load_session(args) -> CountSeries:
    if (args.events is None) == (args.counts is None):
        raise InputError("give exactly one of --events or --counts")
    if args.events is not None:
        ev = io.load_events(args.events, args.horizon)
        return bin_counts(ev, args.bin_width, ev.horizon)
    return io.load_counts(args.counts)


def _add_session_args(p):
    p.add_argument("--events", help="event CSV (header time_s)")
    p.add_argument("--counts", help="count CSV (header bin_start_s,count)")
    p.add_argument("--horizon", type=float, default=None,
                   help="session length in seconds for --events (default: last event, rounded up)")
    p.add_argument("--bin-width", type=float, default=1.0, help="bin width in seconds for --events")


def _add_out(p):
    p.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or .)")


# ---------------------------------------------------------------------------


def cmd_simulate(args) -> None:
    sc, spec = io.scenario_from_dict(io.read_json(args.scenario))
    events, path = simulate_scenario(sc, spec, args.seed, want_path=not args.no_path)
    out = _out_dir(args)
    io.save_events(out / "events.csv", events)
    io.save_counts(out / "counts.csv", bin_counts(events, args.bin_width, spec.horizon_seconds))
    if path is not None:
        lam = path.bin_average(args.bin_width)
        rows = "".join(f"{i * args.bin_width:.9f},{v!r}\n" for i, v in enumerate(lam))
        io.atomic_write_text(out / "intensity.csv", "bin_start_s,intensity\n" + rows)
    doc = io.scenario_to_dict(sc, spec)
    doc["seed"] = args.seed
    io.write_json(out / "scenario.json", doc)
    print(json.dumps({"events": len(events), "out": str(out)}))


def _test_config(args) -> TestConfig:
    return TestConfig(args.ell, args.K, args.kernel, args.avar, args.boundary)


def cmd_detect(args) -> None:
    counts = _load_session(args)
    seasonal = io.load_curve(args.seasonal, counts.bin_width) if args.seasonal else None
    cfg = _test_config(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = detect_day(
            counts, seasonal, cfg, args.threshold, args.top_candidates, args.min_separation,
            args.candidate_ell, args.candidate_kernel,
        )
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = _out_dir(args)
    io.write_json(out / "detections.json", [r.to_dict(args.threshold) for r in report.detections])

    # plot data: spot estimate and statistic on the (deflated) grid
    series = deflate(counts, seasonal) if seasonal is not None else counts
    t, spot = spot_series(series, args.candidate_ell, args.candidate_kernel)
    if cfg.avar_scheme == "overlapping":
        _, stat, _, _ = statistic_series(series, cfg)
    else:
        stat = np.full(t.size, np.nan)
    rows = "".join(
        f"{ti:.9f},{'' if not np.isfinite(s) else repr(float(s))},{'' if not np.isfinite(z) else repr(float(z))}\n"
        for ti, s, z in zip(t, spot, stat)
    )
    io.atomic_write_text(out / "plot_data.csv", "t,spot,statistic\n" + rows)
    print(json.dumps({"detections": len(report.detections), "candidates": len(report.candidates),
                      "skipped": len(report.skipped), "out": str(out)}))


def cmd_classify(args) -> None:
    counts = _load_session(args)
    thetas: List[float] = list(args.theta or [])
    if args.detections:
        thetas += [float(d["t"]) for d in io.read_json(args.detections)]
    if not thetas:
        raise InputError("give --theta or --detections")
    cfg = ClassifyConfig(args.ell, args.k, tuple(args.k_grid), args.level, args.intercept_mode,
                         args.offset, args.standardization, args.refine_window)
    results = [classify_event(counts, th, cfg).to_dict() for th in thetas]
    out = _out_dir(args)
    io.write_json(out / "classification.json", results)
    print(json.dumps({"classified": len(results), "out": str(out)}))


def cmd_mc_table(args) -> None:
    doc = io.read_json(args.plan)
    doc["root_seed"] = args.seed
    if args.workers is not None:
        doc["workers"] = args.workers
    plan = ExperimentPlan.from_dict(doc)
    table = run_experiment(plan)
    out = _out_dir(args)
    io.write_json(out / "plan.json", plan.to_dict())
    io.atomic_write_text(out / "rejection_rates.csv", format_table(table, "long_csv"))
    io.atomic_write_text(out / "rejection_rates.txt", format_table(table, "panels"))
    print(json.dumps({"cells": len(table), "out": str(out)}))


def cmd_seasonality(args) -> None:
    days = []
    for p in args.events or []:
        ev = io.load_events(p, args.horizon)
        days.append(bin_counts(ev, args.bin_width, ev.horizon))
    for p in args.counts or []:
        days.append(io.load_counts(p))
    if args.simulate:
        if args.seed is None or args.scenario is None:
            raise InputError("--simulate needs --scenario and --seed")
        sc, spec = io.scenario_from_dict(io.read_json(args.scenario))
        for d in range(args.simulate):
            ev, _ = simulate_scenario(sc, spec, make_seed_sequence(args.seed, d), want_path=False)
            days.append(bin_counts(ev, args.bin_width, spec.horizon_seconds))
    curve = estimate_seasonality(days, args.epsilon)
    out = _out_dir(args)
    io.save_curve(out / "seasonal.csv", curve)
    print(json.dumps({"days": len(days), "bins": len(curve), "out": str(out)}))


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="intensityburst", description="Simulate, detect and classify intensity bursts in event data.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("simulate", help="simulate one session from a scenario JSON")
    p.add_argument("--scenario", required=True, help="scenario JSON")
    p.add_argument("--seed", type=int, required=True, help="root seed (64-bit unsigned)")
    p.add_argument("--bin-width", type=float, default=1.0, help="bin width of counts.csv and intensity.csv")
    p.add_argument("--no-path", action="store_true", help="skip the ground-truth intensity output")
    _add_out(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="detect intensity bursts in one session")
    _add_session_args(p)
    p.add_argument("--seasonal", help="seasonal curve CSV (header bin_index,factor)")
    p.add_argument("--ell", type=int, default=300, help="estimation window in bins")
    p.add_argument("--K", type=int, default=3000, help="variance sample size in bins")
    p.add_argument("--kernel", choices=("indicator", "exponential"), default="indicator")
    p.add_argument("--avar", choices=("overlapping", "nonoverlapping"), default="overlapping",
                   help="anchor scheme of the observed variance")
    p.add_argument("--boundary", choices=("strict", "truncate"), default="strict",
                   help="strict skips points inside the warm-up period")
    p.add_argument("--threshold", type=float, default=5.0, help="critical value for a detection")
    p.add_argument("--top-candidates", type=int, default=20, help="number of local maxima to test")
    p.add_argument("--min-separation", type=float, default=300.0, help="seconds between candidates")
    p.add_argument("--candidate-ell", type=int, default=300, help="window of the candidate spot series")
    p.add_argument("--candidate-kernel", choices=("indicator", "exponential"), default="exponential")
    _add_out(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("classify", help="classify change points as burst or jump")
    _add_session_args(p)
    p.add_argument("--theta", type=float, action="append", help="change point in seconds (repeatable)")
    p.add_argument("--detections", help="detections.json whose times are classified")
    p.add_argument("--ell", type=int, default=10, help="inner half-window in bins")
    p.add_argument("--k", type=float, default=2.0, help="bandwidth multiplier of the ratio")
    p.add_argument("--k-grid", type=float, nargs="+", default=list(DEFAULT_K_GRID))
    p.add_argument("--level", type=float, default=0.01, help="level of the one-sided jump test")
    p.add_argument("--intercept-mode", choices=("free", "through_origin"), default="free")
    p.add_argument("--standardization", choices=("bins", "count"), default="bins")
    p.add_argument("--offset", type=float, default=0.0, help="shift added to each theta")
    p.add_argument("--refine-window", type=float, default=0.0,
                   help="move theta to the largest inner two-sided count within this many seconds")
    _add_out(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("mc-table", help="Monte Carlo rejection-rate table from a plan JSON")
    p.add_argument("--plan", required=True, help="plan JSON (fields of ExperimentPlan)")
    p.add_argument("--seed", type=int, required=True, help="root seed; replaces the plan's root_seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    _add_out(p)
    p.set_defaults(func=cmd_mc_table)

    p = sub.add_parser("seasonality", help="estimate the intraday curve from several sessions")
    p.add_argument("--events", nargs="*", help="event CSVs, one per day")
    p.add_argument("--counts", nargs="*", help="count CSVs, one per day")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--bin-width", type=float, default=1.0)
    p.add_argument("--simulate", type=int, default=0, help="add this many simulated days")
    p.add_argument("--scenario", help="scenario JSON for --simulate")
    p.add_argument("--seed", type=int, default=None, help="root seed for --simulate")
    p.add_argument("--epsilon", type=float, default=1e-4, help="floor relative to the grand mean")
    _add_out(p)
    p.set_defaults(func=cmd_seasonality)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except IntensityBurstError as exc:
        print(json.dumps({"error": {"code": exc.code, "message": str(exc)}}), file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(json.dumps({"error": {"code": "file_not_found", "message": str(exc)}}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
