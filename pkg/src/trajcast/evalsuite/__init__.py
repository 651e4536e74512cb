"""Metrics, calibration diagnostics, and model analysis tools."""

from .metrics import (
    MetricsRow,
    aggregate,
    along_cross_decompose,
    displacement_error,
    trajectory_tangents,
)
from .calibration import ReliabilityCurve, half_normal_quantile, reliability_curve
from .analysis import (
    SensitivityMap,
    dropout_epistemic,
    error_heatmap,
    error_vs_horizon,
    occlusion_sensitivity,
)

__all__ = [
    "MetricsRow",
    "ReliabilityCurve",
    "SensitivityMap",
    "aggregate",
    "along_cross_decompose",
    "displacement_error",
    "dropout_epistemic",
    "error_heatmap",
    "error_vs_horizon",
    "half_normal_quantile",
    "occlusion_sensitivity",
    "reliability_curve",
    "trajectory_tangents",
]
