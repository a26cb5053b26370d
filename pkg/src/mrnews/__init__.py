"""Early-warning signals for banking-system crises from multiplex recurrence networks."""

from mrnews.errors import ComputeError, ConfigInvalid, DataError, MrnError
from mrnews.indicators import IndicatorConfig, IndicatorSeries, detect_peaks, indicator_series, risk_intervals
from mrnews.jumptest import bns_test, daily_jump_tests
from mrnews.market_data import (
    PricePanel,
    WeightVector,
    build_portfolio_series,
    load_price_panel,
    load_weights,
    log_returns,
)
from mrnews.mrn import (
    average_edge_overlap,
    average_mutual_information,
    build_mrn,
    maximum_spanning_tree,
    projection_network,
)
from mrnews.pipeline import PipelineConfig, ReportBundle, run_pipeline
from mrnews.recurrence import EmbeddingConfig, ThresholdPolicy, embed, recurrence_matrix, select_epsilon
from mrnews.simulation import CalibrationConfig, SimConfig, calibrate_risk_level, evaluate_warning, simulate_paths

__version__ = "0.1.0"

__all__ = [
    "CalibrationConfig",
    "ComputeError",
    "ConfigInvalid",
    "DataError",
    "EmbeddingConfig",
    "IndicatorConfig",
    "IndicatorSeries",
    "MrnError",
    "PipelineConfig",
    "PricePanel",
    "ReportBundle",
    "SimConfig",
    "ThresholdPolicy",
    "WeightVector",
    "average_edge_overlap",
    "average_mutual_information",
    "bns_test",
    "build_mrn",
    "build_portfolio_series",
    "calibrate_risk_level",
    "daily_jump_tests",
    "detect_peaks",
    "embed",
    "evaluate_warning",
    "indicator_series",
    "load_price_panel",
    "load_weights",
    "log_returns",
    "maximum_spanning_tree",
    "projection_network",
    "recurrence_matrix",
    "risk_intervals",
    "run_pipeline",
    "select_epsilon",
    "simulate_paths",
]
