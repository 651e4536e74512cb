"""Method registry driving every predictor over a dataset's test split.

Method names: "ukf", "linear", "lane_assoc", or "model:<weights path>".
The linear baseline is fit on the train split at evaluation time (it is
cheap and deterministic); lane association uses ground truth to pick among
candidate rollouts, making it an evaluation-only upper bound, and is
flagged as such in reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .estimators import (
    CnnTrajectoryRegressor,
    LaneAssociationPredictor,
    LinearTrajectoryRegressor,
    UkfTrajectoryPredictor,
)
from .geometry import TICK_DT
from .nnet.train import predict_batched
from .synthgen.dataset import TrajectoryDataset


@dataclass
class MethodResult:
    name: str
    predictions: np.ndarray  # (N, H, 2)
    sigmas: np.ndarray | None = None  # (N, H) for uncertain models
    oracle_selection: bool = False  # lane_assoc picks by ground-truth error
    raster_variant: str = "-"
    uses_state: str = "yes"
    loss_kind: str = "-"


def _model_result(name: str, path: str, dataset: TrajectoryDataset, split: str) -> MethodResult:
    est = CnnTrajectoryRegressor.from_weights(path)
    cfg = est.config_
    if cfg.raster_n != dataset.raster_config.n:
        raise ValueError(
            f"weights expect {cfg.raster_n} px rasters, dataset has {dataset.raster_config.n}"
        )
    rasters, states, _ = dataset.arrays(split)
    if rasters is None:
        raise ValueError("dataset was loaded without rasters")
    out = predict_batched(est.params_, cfg, rasters, states[:, : cfg.state_dim])
    variant = "fading" if dataset.raster_config.history_k > 1 else "no_fading"
    return MethodResult(
        name=name, predictions=out.positions, sigmas=out.sigmas,
        raster_variant=variant, uses_state="yes" if cfg.state_dim else "no",
        loss_kind="nll" if cfg.output_mode == "uncertain" else "mse",
    )


def evaluate_method(
    method: str,
    dataset: TrajectoryDataset,
    split: str = "test",
    ridge: float = 1e-6,
) -> MethodResult:
    _, states, targets = dataset.arrays(split)
    examples = dataset.split_examples(split)
    horizon = dataset.horizon
    if method == "ukf":
        pred = UkfTrajectoryPredictor(horizon=horizon, dt=TICK_DT).predict(states)
        return MethodResult(name=method, predictions=pred)
    if method == "linear":
        _, train_states, train_targets = dataset.arrays("train")
        est = LinearTrajectoryRegressor(horizon=horizon, ridge=ridge)
        est.fit(train_states, train_targets)
        return MethodResult(name=method, predictions=est.predict(states), loss_kind="mse")
    if method == "lane_assoc":
        est = LaneAssociationPredictor(horizon=horizon, dt=TICK_DT)
        X = [
            (dataset.scenario_maps[ex.scenario_id], ex.frame, ex.state) for ex in examples
        ]
        pred = est.predict(X, ground_truth=targets)
        return MethodResult(name=method, predictions=pred, oracle_selection=True)
    if method.startswith("model:"):
        path = method.split(":", 1)[1]
        if not Path(path).exists():
            raise FileNotFoundError(f"weights file not found: {path}")
        return _model_result(method, path, dataset, split)
    raise ValueError(f"unknown method {method!r}")


def evaluate_methods(
    methods: list[str], dataset: TrajectoryDataset, split: str = "test", ridge: float = 1e-6
) -> list[MethodResult]:
    return [evaluate_method(m, dataset, split, ridge) for m in methods]
