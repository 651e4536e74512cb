"""Mini-batch training loop for the trajectory predictor.

Training is deterministic for a given seed: batch shuffling, dropout, and
weight init all draw from named substreams of the root seed, and execution
is single-threaded numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatchError
from ..rng import substream
from .losses import loss_nll_grad, loss_point_grad
from .model import ModelConfig, ModelOutput, backward, forward, init_params, normalize_rasters
from .optim import AdamConfig, AdamState, adam_step


@dataclass(frozen=True)
class TrainOptions:
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    lr0: float = 1e-3
    decay_every: int = 2000
    decay_factor: float = 0.9
    dtype: str = "float32"
    keep_best_val: bool = False  # return the epoch with the lowest val loss
    sigma_head_only: bool = False  # freeze everything but the sigma output channels


def _np_dtype(name: str):
    return {"float32": np.float32, "float64": np.float64}[name]


def predict_batched(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    rasters: np.ndarray,
    states: np.ndarray,
    batch_size: int = 64,
    dtype=np.float32,
) -> ModelOutput:
    """Deterministic (dropout-off) forward over a dataset of uint8 rasters."""
    positions = []
    sigmas = []
    states = np.asarray(states, dtype=dtype)
    for start in range(0, len(states), batch_size):
        sl = slice(start, start + batch_size)
        batch = normalize_rasters(rasters[sl], dtype)
        out, _ = forward(params, cfg, batch, states[sl])
        positions.append(out.positions)
        if out.sigmas is not None:
            sigmas.append(out.sigmas)
    return ModelOutput(
        positions=np.concatenate(positions),
        sigmas=np.concatenate(sigmas) if sigmas else None,
    )


def mean_displacement(positions: np.ndarray, targets: np.ndarray) -> float:
    """Displacement averaged over the horizon, then over examples."""
    d = np.linalg.norm(np.asarray(positions, dtype=float) - targets, axis=2)
    return float(d.mean())


def init_from_point_weights(
    cfg: ModelConfig,
    point_cfg: ModelConfig,
    point_params: dict[str, np.ndarray],
    rng: np.random.Generator,
    dtype=np.float32,
) -> dict[str, np.ndarray]:
    """Seed an uncertain-mode model from a trained point model.

    All layers are copied; the output layer's position channels are copied
    and the sigma channels are freshly initialized.
    """
    if cfg.output_mode != "uncertain" or point_cfg.output_mode != "point":
        raise ValueError("expected a point source and an uncertain target")
    if point_cfg.conv_blocks != cfg.conv_blocks or point_cfg.fc_size != cfg.fc_size \
            or point_cfg.horizon != cfg.horizon or point_cfg.decoder != cfg.decoder \
            or point_cfg.raster_n != cfg.raster_n:
        raise ShapeMismatchError("source and target configs differ beyond the output layer")
    params = init_params(cfg, rng, dtype)
    head = ("out.w", "out.b", "step.w", "step.b")
    for name, value in point_params.items():
        if name not in head:
            params[name] = value.astype(dtype).copy()
    if cfg.decoder == "feedforward":
        w = rng.normal(0.0, 0.01, (cfg.fc_size, cfg.output_width)).astype(dtype)
        b = np.zeros(cfg.output_width, dtype=dtype)
        src_w = point_params["out.w"]
        src_b = point_params["out.b"]
        for h in range(cfg.horizon):
            w[:, 3 * h : 3 * h + 2] = src_w[:, 2 * h : 2 * h + 2]
            b[3 * h : 3 * h + 2] = src_b[2 * h : 2 * h + 2]
        params["out.w"], params["out.b"] = w, b
    else:
        w = rng.normal(0.0, 0.01, (cfg.recurrent_size, 3)).astype(dtype)
        b = np.zeros(3, dtype=dtype)
        w[:, :2] = point_params["step.w"]
        b[:2] = point_params["step.b"]
        params["step.w"], params["step.b"] = w, b
    return params


def _restrict_to_sigma_head(grads: dict[str, np.ndarray], cfg: ModelConfig) -> dict[str, np.ndarray]:
    """Keep only the sigma output channels' gradients (positions and trunk frozen).

    Used to calibrate the uncertainty head on top of an already-trained
    network without perturbing its point predictions.
    """
    if cfg.output_mode != "uncertain":
        raise ValueError("sigma-head training requires uncertain output mode")
    out: dict[str, np.ndarray] = {}
    if cfg.decoder == "feedforward":
        w = np.zeros_like(grads["out.w"])
        b = np.zeros_like(grads["out.b"])
        sigma_cols = [3 * h + 2 for h in range(cfg.horizon)]
        w[:, sigma_cols] = grads["out.w"][:, sigma_cols]
        b[sigma_cols] = grads["out.b"][sigma_cols]
        out["out.w"], out["out.b"] = w, b
    else:
        w = np.zeros_like(grads["step.w"])
        b = np.zeros_like(grads["step.b"])
        w[:, 2] = grads["step.w"][:, 2]
        b[2] = grads["step.b"][2]
        out["step.w"], out["step.b"] = w, b
    return out


def train_model(
    cfg: ModelConfig,
    rasters: np.ndarray,
    states: np.ndarray,
    targets: np.ndarray,
    opts: TrainOptions = TrainOptions(),
    val_data: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    initial_params: dict[str, np.ndarray] | None = None,
) -> tuple[dict[str, np.ndarray], list[dict]]:
    """Train on (uint8 rasters, states, (N, H, 2) targets); returns params
    and one loss-curve row per epoch."""
    if len(rasters) == 0:
        raise ValueError("training dataset is empty")
    dtype = _np_dtype(opts.dtype)
    targets = np.asarray(targets, dtype=dtype)
    states = np.asarray(states, dtype=dtype)
    if targets.shape[1] != cfg.horizon:
        raise ShapeMismatchError(f"targets horizon {targets.shape[1]} != config {cfg.horizon}")

    if initial_params is None:
        params = init_params(cfg, substream(opts.seed, "init"), dtype)
    else:
        params = {k: v.astype(dtype).copy() for k, v in initial_params.items()}
        expected = init_params(cfg, substream(opts.seed, "init"), dtype)
        for name, ref in expected.items():
            if name not in params or params[name].shape != ref.shape:
                raise ShapeMismatchError(f"initial params incompatible at {name!r}")

    shuffle_rng = substream(opts.seed, "shuffle")
    dropout_rng = substream(opts.seed, "dropout") if cfg.dropout_rate > 0 else None
    adam_cfg = AdamConfig(lr0=opts.lr0, decay_factor=opts.decay_factor, decay_every=opts.decay_every)
    state = AdamState(params)
    history: list[dict] = []
    n = len(rasters)
    best_val = float("inf")
    best_params = None

    for epoch in range(opts.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, opts.batch_size):
            idx = order[start : start + opts.batch_size]
            batch_rasters = normalize_rasters(rasters[idx], dtype)
            out, cache = forward(params, cfg, batch_rasters, states[idx], dropout_rng)
            if cfg.output_mode == "point":
                value, d_pos = loss_point_grad(out.positions, targets[idx])
                grads = backward(cache, d_pos)
            else:
                value, d_pos, d_sig = loss_nll_grad(out.positions, out.sigmas, targets[idx])
                grads = backward(cache, d_pos, d_sig)
            if opts.sigma_head_only:
                grads = _restrict_to_sigma_head(grads, cfg)
            adam_step(params, grads, state, adam_cfg)
            epoch_loss += value
            n_batches += 1
        row = {
            "epoch": epoch,
            "lr": staircase(adam_cfg, state.step),
            "train_loss": epoch_loss / max(1, n_batches),
            "val_loss": float("nan"),
            "val_displacement": float("nan"),
        }
        if val_data is not None:
            val_rasters, val_states, val_targets = val_data
            out = predict_batched(params, cfg, val_rasters, val_states, dtype=dtype)
            if cfg.output_mode == "point":
                from .losses import loss_point

                row["val_loss"] = loss_point(out.positions, val_targets)
            else:
                from .losses import loss_nll

                row["val_loss"] = loss_nll(out.positions, out.sigmas, val_targets)
            row["val_displacement"] = mean_displacement(out.positions, np.asarray(val_targets, dtype=float))
            if opts.keep_best_val and row["val_loss"] < best_val:
                best_val = row["val_loss"]
                best_params = {k: v.copy() for k, v in params.items()}
        history.append(row)
    if opts.keep_best_val and best_params is not None:
        params = best_params
    return params, history


def staircase(cfg: AdamConfig, step: int) -> float:
    from .optim import staircase_lr

    return staircase_lr(cfg, step)
