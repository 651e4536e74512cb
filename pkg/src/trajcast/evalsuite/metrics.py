"""Displacement, along-track, and cross-track error metrics.

The along/cross decomposition projects the error vector onto the local
ground-truth motion direction (tangent) and its normal. Tangents come
from central differences of the ground-truth trajectory, one-sided at the
endpoints, falling back to the actor's forward axis when consecutive
points coincide (a stopped actor has no motion direction of its own).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import MissingPredictionsError


def displacement_error(pred_point, gt_point) -> float:
    dx = pred_point[0] - gt_point[0]
    dy = pred_point[1] - gt_point[1]
    return math.hypot(dx, dy)


def trajectory_tangents(gt: np.ndarray, fallback=(1.0, 0.0)) -> np.ndarray:
    """Unit tangents along an (H, 2) ground-truth trajectory."""
    gt = np.asarray(gt, dtype=float)
    h = len(gt)
    diffs = np.empty_like(gt)
    if h == 1:
        diffs[0] = fallback
    else:
        diffs[0] = gt[1] - gt[0]
        diffs[-1] = gt[-1] - gt[-2]
        if h > 2:
            diffs[1:-1] = gt[2:] - gt[:-2]
    tangents = np.empty_like(diffs)
    for i, d in enumerate(diffs):
        norm = math.hypot(d[0], d[1])
        tangents[i] = (d / norm) if norm > 1e-12 else fallback
    return tangents


def along_cross_decompose(pred_point, gt_point, tangent) -> tuple[float, float]:
    """|error . tangent|, |error . normal| for a unit tangent."""
    ex = pred_point[0] - gt_point[0]
    ey = pred_point[1] - gt_point[1]
    along = abs(ex * tangent[0] + ey * tangent[1])
    cross = abs(-ex * tangent[1] + ey * tangent[0])
    return along, cross


@dataclass
class MetricsRow:
    """One Table-style row: per-method averages plus per-horizon breakdowns."""

    method: str
    displacement: float
    along_track: float
    cross_track: float
    per_horizon: np.ndarray  # (H, 3): displacement, along, cross means

    def __post_init__(self) -> None:
        assert self.displacement >= 0 and self.along_track >= 0 and self.cross_track >= 0


def _per_example_errors(pred: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """(N, H, 3) displacement/along/cross errors."""
    n, h, _ = targets.shape
    out = np.empty((n, h, 3))
    for i in range(n):
        tangents = trajectory_tangents(targets[i])
        err = pred[i] - targets[i]
        along = np.abs(np.sum(err * tangents, axis=1))
        cross = np.abs(err[:, 0] * -tangents[:, 1] + err[:, 1] * tangents[:, 0])
        out[i, :, 0] = np.hypot(err[:, 0], err[:, 1])
        out[i, :, 1] = along
        out[i, :, 2] = cross
    return out


def aggregate(predictions: dict[str, np.ndarray], targets: np.ndarray) -> list[MetricsRow]:
    """Average errors per method over horizons then examples."""
    targets = np.asarray(targets, dtype=float)
    rows = []
    for method in sorted(predictions):
        pred = np.asarray(predictions[method], dtype=float)
        if pred.shape != targets.shape:
            raise MissingPredictionsError(
                f"method {method!r} predicted {pred.shape}, expected {targets.shape}"
            )
        errors = _per_example_errors(pred, targets)
        per_horizon = errors.mean(axis=0)
        means = per_horizon.mean(axis=0)
        rows.append(
            MetricsRow(
                method=method,
                displacement=float(means[0]),
                along_track=float(means[1]),
                cross_track=float(means[2]),
                per_horizon=per_horizon,
            )
        )
    return rows


def write_metrics_csv(rows: list[MetricsRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "displacement", "along_track", "cross_track"])
        for row in rows:
            writer.writerow(
                [row.method, f"{row.displacement:.6f}", f"{row.along_track:.6f}",
                 f"{row.cross_track:.6f}"]
            )


def write_per_horizon_csv(rows: list[MetricsRow], dt: float, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "horizon_s", "displacement", "along_track", "cross_track"])
        for row in rows:
            for h, (d, a, c) in enumerate(row.per_horizon, start=1):
                writer.writerow(
                    [row.method, f"{h * dt:.1f}", f"{d:.6f}", f"{a:.6f}", f"{c:.6f}"]
                )
