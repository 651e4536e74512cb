"""Scikit-learn style estimators wrapping the predictors and the rasterizer.

Every predictor shares the same surface: ``fit(X, y)``, ``predict(X)``,
and ``get_params``/``set_params`` from BaseEstimator, so models compose
with the usual ecosystem tooling (cloning, grid search over e.g. the
ridge strength or network width). The evaluation harness drives all
methods through this interface.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .baselines import LinearModel, fit_linear, lane_assoc_predict
from .geometry import TICK_DT, ActorState, Pose2, WorldMap
from .nnet.model import ModelConfig
from .nnet.train import TrainOptions, predict_batched, train_model
from .nnet.weights_io import load_weights, save_weights
from .raster import RasterConfig, rasterize_scene
from .ukf import predict_from_state_vector
from .validation import check_raster_state_pair, check_states, check_targets


class SceneRasterizer(TransformerMixin, BaseEstimator):
    """Stateless transformer: scene tuples -> uint8 context images.

    Each element of X is (world_map, tracks, actor_id, tick).
    """

    def __init__(self, n=300, resolution=0.1, anchor_w=150, anchor_h=50,
                 history_k=5, fade_delta=0.1):
        self.n = n
        self.resolution = resolution
        self.anchor_w = anchor_w
        self.anchor_h = anchor_h
        self.history_k = history_k
        self.fade_delta = fade_delta

    def _config(self) -> RasterConfig:
        return RasterConfig(n=self.n, resolution=self.resolution, anchor_w=self.anchor_w,
                            anchor_h=self.anchor_h, history_k=self.history_k,
                            fade_delta=self.fade_delta)

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        cfg = self._config()
        images = [rasterize_scene(wm, tracks, actor_id, tick, cfg)
                  for wm, tracks, actor_id, tick in X]
        return np.stack(images) if images else np.zeros((0, cfg.n, cfg.n, 3), dtype=np.uint8)


class LinearTrajectoryRegressor(RegressorMixin, BaseEstimator):
    """Affine map from the state 3-vector to future positions (ridge fit)."""

    def __init__(self, horizon=30, ridge=1e-6):
        self.horizon = horizon
        self.ridge = ridge

    def fit(self, X, y):
        X = check_states(X)
        y = check_targets(y, self.horizon)
        self.model_: LinearModel = fit_linear(X, y, self.ridge)
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise NotFittedError("fit the regressor first")
        return self.model_.predict(check_states(X))


class UkfTrajectoryPredictor(BaseEstimator):
    """Open-loop constant-turn-rate rollout of the tracked state; no fitting."""

    def __init__(self, horizon=30, dt=TICK_DT):
        self.horizon = horizon
        self.dt = dt

    def fit(self, X=None, y=None):
        return self

    def predict(self, X) -> np.ndarray:
        X = check_states(X)
        return np.stack([predict_from_state_vector(row, self.horizon, self.dt) for row in X])


class LaneAssociationPredictor(BaseEstimator):
    """Lane association plus pure pursuit.

    X is a list of (world_map, pose, state) tuples. When ground truth is
    passed to predict(), the lowest-error rollout per example is reported
    (the evaluation-only oracle selection), so treat those numbers as an
    upper bound rather than a deployable method.
    """

    def __init__(self, horizon=30, dt=TICK_DT, radius=5.0):
        self.horizon = horizon
        self.dt = dt
        self.radius = radius

    def fit(self, X=None, y=None):
        return self

    def predict(self, X, ground_truth: np.ndarray | None = None) -> np.ndarray:
        out = []
        for i, (world_map, pose, state) in enumerate(X):
            actor = ActorState(
                actor_id="query", t=0, bbox_length=4.5, bbox_width=2.0,
                pose=pose if isinstance(pose, Pose2) else Pose2(*pose),
                velocity=float(state[0]), acceleration=float(state[1]),
                heading_change_rate=float(state[2]),
            )
            gt = ground_truth[i] if ground_truth is not None else None
            out.append(
                lane_assoc_predict(world_map, actor, self.horizon, self.dt,
                                   ground_truth=gt, radius=self.radius)
            )
        return np.stack(out)


class CnnTrajectoryRegressor(RegressorMixin, BaseEstimator):
    """The raster-plus-state convolutional predictor behind a fit/predict API.

    X is a (rasters, states) pair: uint8 images (N, n, n, 3) and state
    vectors (N, 3). In "uncertain" mode predict_with_uncertainty() also
    returns the per-point half-normal sigma.
    """

    def __init__(self, conv_blocks=((16, 3, 2), (32, 3, 2), (64, 3, 2), (64, 3, 2)),
                 fc_size=256, decoder="feedforward", recurrent_size=64,
                 output_mode="point", horizon=30, dropout_rate=0.0, raster_n=64,
                 lr0=1e-3, decay_every=2000, epochs=10, batch_size=32, seed=0,
                 init_from=None):
        self.conv_blocks = conv_blocks
        self.fc_size = fc_size
        self.decoder = decoder
        self.recurrent_size = recurrent_size
        self.output_mode = output_mode
        self.horizon = horizon
        self.dropout_rate = dropout_rate
        self.raster_n = raster_n
        self.lr0 = lr0
        self.decay_every = decay_every
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.init_from = init_from  # optional dict of initial tensors

    def _config(self) -> ModelConfig:
        return ModelConfig(
            conv_blocks=tuple(tuple(b) for b in self.conv_blocks), fc_size=self.fc_size,
            decoder=self.decoder, recurrent_size=self.recurrent_size,
            output_mode=self.output_mode, horizon=self.horizon,
            dropout_rate=self.dropout_rate, raster_n=self.raster_n,
        )

    def fit(self, X, y, val=None):
        rasters, states = check_raster_state_pair(X, self.raster_n)
        y = check_targets(y, self.horizon)
        opts = TrainOptions(batch_size=self.batch_size, epochs=self.epochs, seed=self.seed,
                            lr0=self.lr0, decay_every=self.decay_every)
        self.config_ = self._config()
        self.params_, self.history_ = train_model(
            self.config_, rasters, states, y, opts, val_data=val,
            initial_params=self.init_from,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("fit the regressor or load weights first")

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        rasters, states = check_raster_state_pair(X, self.raster_n)
        return predict_batched(self.params_, self.config_, rasters, states).positions

    def predict_with_uncertainty(self, X) -> tuple[np.ndarray, np.ndarray]:
        self._check_fitted()
        if self.config_.output_mode != "uncertain":
            raise ValueError("model has no uncertainty head")
        rasters, states = check_raster_state_pair(X, self.raster_n)
        out = predict_batched(self.params_, self.config_, rasters, states)
        return out.positions, out.sigmas

    def save(self, path) -> None:
        self._check_fitted()
        save_weights(path, self.config_, self.params_)

    @classmethod
    def from_weights(cls, path) -> "CnnTrajectoryRegressor":
        cfg, params = load_weights(path)
        est = cls(conv_blocks=cfg.conv_blocks, fc_size=cfg.fc_size, decoder=cfg.decoder,
                  recurrent_size=cfg.recurrent_size, output_mode=cfg.output_mode,
                  horizon=cfg.horizon, dropout_rate=cfg.dropout_rate, raster_n=cfg.raster_n)
        est.config_ = cfg
        est.params_ = params
        est.history_ = []
        return est
