"""Detection of intensity bursts in high-frequency event data.

Modules
-------
sim
    Cox, Hawkes and burst simulators on a trading session.
estimate
    Binning, kernel spot intensities and intraday seasonality.
ibtest
    Burst test statistic, candidate selection and critical values.
classify
    Burst-versus-jump discrimination and explosion-rate estimation.
mc
    Monte Carlo rejection-rate experiments.
estimators
    Estimator-style wrappers (``fit``/``transform``/``predict``).
"""

from .classify import ClassifyConfig, classify_event, estimate_alpha, jump_test, ratio_statistic
from .errors import IntensityBurstError
from .estimate import CountSeries, KernelSpec, SeasonalCurve, bin_counts, deflate, estimate_seasonality
from .estimators import BurstJumpClassifier, IntensityBurstDetector, SeasonalDeflator, SpotIntensityEstimator
from .ibtest import TestConfig, critical_value, detect_day, ib_statistic
from .mc import ExperimentPlan, run_experiment
from .sim import BurstParams, EventStream, Scenario, SessionSpec, simulate_scenario

__version__ = "0.1.0"

__all__ = [
    "BurstJumpClassifier",
    "BurstParams",
    "ClassifyConfig",
    "CountSeries",
    "EventStream",
    "ExperimentPlan",
    "IntensityBurstDetector",
    "IntensityBurstError",
    "KernelSpec",
    "Scenario",
    "SeasonalCurve",
    "SeasonalDeflator",
    "SessionSpec",
    "SpotIntensityEstimator",
    "TestConfig",
    "bin_counts",
    "classify_event",
    "critical_value",
    "deflate",
    "detect_day",
    "estimate_alpha",
    "estimate_seasonality",
    "ib_statistic",
    "jump_test",
    "ratio_statistic",
    "run_experiment",
    "simulate_scenario",
]
