"""Robust residual CUSUM tests for dispersion changes in discretely observed diffusions."""

from .changepoint import (
    BinarySegmentation,
    RobustCusumTest,
    SegmentationResult,
    TestOutcome,
    Trim,
    TrimSpec,
    binary_segmentation,
    bb_sup_tail,
    critical_value,
    cusum_statistic,
    residuals,
    run_test,
    trim_value,
)
from .estimate import MDPDEstimator, MdpdeConfig, ParamEstimate, fit, mdpde_objective
from .exceptions import (
    DataError,
    DegenerateScaleError,
    DomainError,
    DriftwatchError,
    EstimationError,
    ParameterShapeError,
)
from .forecast import ForecastRecord, ForecastScore, OneStepForecaster, one_step_forecast, rolling_evaluate
from .model import DriftModel, OuCentered, OuMeanReverting, evaluate_drift, get_model
from .simulate import (
    ContaminationSpec,
    SamplePath,
    SimConfig,
    contaminate,
    simulate_path,
    simulate_path_with_change,
    simulate_path_with_changes,
)

__version__ = "0.1.0"

__all__ = [
    "bb_sup_tail",
    "binary_segmentation",
    "BinarySegmentation",
    "contaminate",
    "ContaminationSpec",
    "critical_value",
    "cusum_statistic",
    "DataError",
    "DegenerateScaleError",
    "DomainError",
    "DriftModel",
    "DriftwatchError",
    "EstimationError",
    "evaluate_drift",
    "fit",
    "ForecastRecord",
    "ForecastScore",
    "get_model",
    "mdpde_objective",
    "MdpdeConfig",
    "MDPDEstimator",
    "one_step_forecast",
    "OneStepForecaster",
    "OuCentered",
    "OuMeanReverting",
    "ParamEstimate",
    "ParameterShapeError",
    "residuals",
    "RobustCusumTest",
    "rolling_evaluate",
    "run_test",
    "SamplePath",
    "SegmentationResult",
    "SimConfig",
    "simulate_path",
    "simulate_path_with_change",
    "simulate_path_with_changes",
    "TestOutcome",
    "Trim",
    "trim_value",
    "TrimSpec",
]
