"""The trajectory predictor: conv blocks over the raster, state-vector
concatenation, an FC trunk, and either a flat output layer or a recurrent
decoder emitting one step at a time.

Outputs are interleaved per step: (x, y) in point mode, (x, y, raw_sigma)
in uncertain mode. Sigma is exp(raw) with raw clamped to [-10, 10]; the
clamp's gradient is zero outside that interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteActivationError, ShapeMismatchError
from .layers import (
    conv2d_backward,
    conv2d_forward,
    conv_output_size,
    dense_backward,
    dense_forward,
    dropout_mask,
    lstm_cell_backward,
    lstm_cell_forward,
    relu_backward,
    relu_forward,
)

SIGMA_CLAMP = 10.0


def _default_conv_blocks() -> tuple[tuple[int, int, int], ...]:
    return ((16, 3, 2), (32, 3, 2), (64, 3, 2), (64, 3, 2))


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description; every learnable shape derives from this."""

    conv_blocks: tuple[tuple[int, int, int], ...] = field(default_factory=_default_conv_blocks)
    fc_size: int = 256
    decoder: str = "feedforward"  # or "recurrent"
    recurrent_size: int = 64
    recurrent_input: str = "prev_hidden"  # or "constant"
    output_mode: str = "point"  # or "uncertain"
    horizon: int = 30
    dropout_rate: float = 0.0
    raster_n: int = 64
    state_dim: int = 3

    def __post_init__(self) -> None:
        object.__setattr__(self, "conv_blocks", tuple(tuple(b) for b in self.conv_blocks))
        if self.decoder not in ("feedforward", "recurrent"):
            raise ValueError("decoder must be 'feedforward' or 'recurrent'")
        if self.output_mode not in ("point", "uncertain"):
            raise ValueError("output_mode must be 'point' or 'uncertain'")
        if self.recurrent_input not in ("prev_hidden", "constant"):
            raise ValueError("recurrent_input must be 'prev_hidden' or 'constant'")
        if self.horizon < 1 or self.fc_size < 1 or self.recurrent_size < 1:
            raise ValueError("sizes must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def step_width(self) -> int:
        return 2 if self.output_mode == "point" else 3

    @property
    def output_width(self) -> int:
        return self.step_width * self.horizon

    def conv_output_shape(self) -> tuple[int, int]:
        """(channels, spatial side) after the conv stack."""
        side = self.raster_n
        channels = 3
        for out_ch, kernel, stride in self.conv_blocks:
            side = conv_output_size(side, kernel, stride)
            channels = out_ch
        return channels, side

    @property
    def flat_features(self) -> int:
        channels, side = self.conv_output_shape()
        return channels * side * side

    def to_dict(self) -> dict:
        return {
            "conv_blocks": [list(b) for b in self.conv_blocks],
            "fc_size": self.fc_size,
            "decoder": self.decoder,
            "recurrent_size": self.recurrent_size,
            "recurrent_input": self.recurrent_input,
            "output_mode": self.output_mode,
            "horizon": self.horizon,
            "dropout_rate": self.dropout_rate,
            "raster_n": self.raster_n,
            "state_dim": self.state_dim,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        d["conv_blocks"] = tuple(tuple(b) for b in d["conv_blocks"])
        return ModelConfig(**d)


@dataclass
class ModelOutput:
    positions: np.ndarray  # (N, H, 2) actor-frame meters
    sigmas: np.ndarray | None = None  # (N, H), strictly positive


def init_params(cfg: ModelConfig, rng: np.random.Generator, dtype=np.float32) -> dict[str, np.ndarray]:
    """He-style init for rectified layers, Xavier for linear outputs,
    forget-gate bias at one for the recurrent cell."""
    params: dict[str, np.ndarray] = {}
    in_ch = 3
    for i, (out_ch, kernel, stride) in enumerate(cfg.conv_blocks):
        fan_in = in_ch * kernel * kernel
        params[f"conv{i}.w"] = rng.normal(0.0, np.sqrt(2.0 / fan_in),
                                          (out_ch, in_ch, kernel, kernel)).astype(dtype)
        params[f"conv{i}.b"] = np.zeros(out_ch, dtype=dtype)
        in_ch = out_ch
    trunk_in = cfg.flat_features + cfg.state_dim
    params["fc.w"] = rng.normal(0.0, np.sqrt(2.0 / trunk_in), (trunk_in, cfg.fc_size)).astype(dtype)
    params["fc.b"] = np.zeros(cfg.fc_size, dtype=dtype)
    if cfg.decoder == "feedforward":
        params["out.w"] = rng.normal(0.0, np.sqrt(1.0 / cfg.fc_size),
                                     (cfg.fc_size, cfg.output_width)).astype(dtype)
        params["out.b"] = np.zeros(cfg.output_width, dtype=dtype)
    else:
        r = cfg.recurrent_size
        params["bridge.w"] = rng.normal(0.0, np.sqrt(1.0 / cfg.fc_size), (cfg.fc_size, r)).astype(dtype)
        params["bridge.b"] = np.zeros(r, dtype=dtype)
        scale = np.sqrt(1.0 / (2 * r))
        params["lstm.wx"] = rng.normal(0.0, scale, (r, 4 * r)).astype(dtype)
        params["lstm.wh"] = rng.normal(0.0, scale, (r, 4 * r)).astype(dtype)
        b = np.zeros(4 * r, dtype=dtype)
        b[r : 2 * r] = 1.0
        params["lstm.b"] = b
        params["step.w"] = rng.normal(0.0, np.sqrt(1.0 / r), (r, cfg.step_width)).astype(dtype)
        params["step.b"] = np.zeros(cfg.step_width, dtype=dtype)
    return params


def normalize_rasters(images: np.ndarray, dtype=np.float32) -> np.ndarray:
    """uint8 (N, n, n, 3) images -> channel-first float batch in [0, 1]."""
    arr = np.asarray(images)
    if arr.ndim == 3:
        arr = arr[None]
    return (arr.astype(dtype) / dtype(255.0)).transpose(0, 3, 1, 2)


def _check_inputs(cfg: ModelConfig, rasters: np.ndarray, states: np.ndarray) -> None:
    n = cfg.raster_n
    if rasters.ndim != 4 or rasters.shape[1:] != (3, n, n):
        raise ShapeMismatchError(f"expected rasters (N, 3, {n}, {n}), got {rasters.shape}")
    if states.ndim != 2 or states.shape != (rasters.shape[0], cfg.state_dim):
        raise ShapeMismatchError(f"expected states ({rasters.shape[0]}, {cfg.state_dim}), got {states.shape}")
    if not np.isfinite(states).all():
        raise NonFiniteActivationError("non-finite state input")


def forward(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    rasters: np.ndarray,
    states: np.ndarray,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[ModelOutput, dict]:
    """Run the network; dropout is active only when a generator is supplied."""
    rasters = np.asarray(rasters)
    states = np.asarray(states, dtype=rasters.dtype)
    _check_inputs(cfg, rasters, states)
    n_batch = rasters.shape[0]

    cache: dict = {"cfg": cfg, "params": params, "conv": [], "n_batch": n_batch}
    x = rasters
    for i in range(len(cfg.conv_blocks)):
        stride = cfg.conv_blocks[i][2]
        y, conv_cache = conv2d_forward(x, params[f"conv{i}.w"], params[f"conv{i}.b"], stride)
        act, relu_cache = relu_forward(y)
        cache["conv"].append((conv_cache, relu_cache))
        x = act
    cache["conv_out_shape"] = x.shape
    flat = x.reshape(n_batch, -1)
    trunk_in = np.concatenate([flat, states], axis=1)

    fc_lin, fc_cache = dense_forward(trunk_in, params["fc.w"], params["fc.b"])
    fc_act, fc_relu = relu_forward(fc_lin)
    if dropout_rng is not None and cfg.dropout_rate > 0.0:
        mask = dropout_mask(dropout_rng, fc_act.shape, cfg.dropout_rate, fc_act.dtype)
        fc_out = fc_act * mask
    else:
        mask = None
        fc_out = fc_act
    cache.update(fc_cache=fc_cache, fc_relu=fc_relu, dropout=mask)

    if cfg.decoder == "feedforward":
        out_flat, out_cache = dense_forward(fc_out, params["out.w"], params["out.b"])
        cache["out_cache"] = out_cache
        raw = out_flat.reshape(n_batch, cfg.horizon, cfg.step_width)
    else:
        bridge, bridge_cache = dense_forward(fc_out, params["bridge.w"], params["bridge.b"])
        cache["bridge_cache"] = bridge_cache
        r = cfg.recurrent_size
        h = np.zeros((n_batch, r), dtype=fc_out.dtype)
        c = np.zeros_like(h)
        steps = []
        raw = np.empty((n_batch, cfg.horizon, cfg.step_width), dtype=fc_out.dtype)
        for t in range(cfg.horizon):
            x_t = bridge if (t == 0 or cfg.recurrent_input == "constant") else h
            h, c, lstm_cache = lstm_cell_forward(x_t, h, c, params["lstm.wx"],
                                                 params["lstm.wh"], params["lstm.b"])
            out_t, step_cache = dense_forward(h, params["step.w"], params["step.b"])
            raw[:, t] = out_t
            steps.append((lstm_cache, step_cache))
        cache["steps"] = steps

    positions = raw[:, :, :2]
    sigmas = None
    if cfg.output_mode == "uncertain":
        raw_sigma = raw[:, :, 2]
        clipped = np.clip(raw_sigma, -SIGMA_CLAMP, SIGMA_CLAMP)
        sigmas = np.exp(clipped)
        cache["sigma_mask"] = (raw_sigma > -SIGMA_CLAMP) & (raw_sigma < SIGMA_CLAMP)
        cache["sigmas"] = sigmas
    if not np.isfinite(positions).all() or (sigmas is not None and not np.isfinite(sigmas).all()):
        raise NonFiniteActivationError("non-finite network output")
    return ModelOutput(positions=positions, sigmas=sigmas), cache


def backward(
    cache: dict,
    d_positions: np.ndarray,
    d_sigmas: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss for every parameter, given the loss
    gradients w.r.t. positions (N, H, 2) and, in uncertain mode, sigmas (N, H)."""
    cfg: ModelConfig = cache["cfg"]
    params = cache["params"]
    n_batch = cache["n_batch"]
    dtype = d_positions.dtype

    d_raw = np.zeros((n_batch, cfg.horizon, cfg.step_width), dtype=dtype)
    d_raw[:, :, :2] = d_positions
    if cfg.output_mode == "uncertain":
        if d_sigmas is None:
            d_sigmas = np.zeros((n_batch, cfg.horizon), dtype=dtype)
        d_raw[:, :, 2] = d_sigmas * cache["sigmas"] * cache["sigma_mask"]

    grads: dict[str, np.ndarray] = {}
    if cfg.decoder == "feedforward":
        d_out_flat = d_raw.reshape(n_batch, cfg.output_width)
        d_fc_out, grads["out.w"], grads["out.b"] = dense_backward(d_out_flat, cache["out_cache"])
    else:
        r = cfg.recurrent_size
        grads["lstm.wx"] = np.zeros_like(params["lstm.wx"])
        grads["lstm.wh"] = np.zeros_like(params["lstm.wh"])
        grads["lstm.b"] = np.zeros_like(params["lstm.b"])
        grads["step.w"] = np.zeros_like(params["step.w"])
        grads["step.b"] = np.zeros_like(params["step.b"])
        d_bridge = None
        dh_next = np.zeros((n_batch, r), dtype=dtype)
        dc_next = np.zeros_like(dh_next)
        for t in range(cfg.horizon - 1, -1, -1):
            lstm_cache, step_cache = cache["steps"][t]
            dh_step, dw_step, db_step = dense_backward(d_raw[:, t], step_cache)
            grads["step.w"] += dw_step
            grads["step.b"] += db_step
            dh = dh_next + dh_step
            dx, dh_prev, dc_prev, dwx, dwh, db = lstm_cell_backward(dh, dc_next, lstm_cache)
            grads["lstm.wx"] += dwx
            grads["lstm.wh"] += dwh
            grads["lstm.b"] += db
            if t == 0 or cfg.recurrent_input == "constant":
                d_bridge = dx if d_bridge is None else d_bridge + dx
                dh_next = dh_prev
            else:
                dh_next = dh_prev + dx
            dc_next = dc_prev
        d_fc_out, grads["bridge.w"], grads["bridge.b"] = dense_backward(d_bridge, cache["bridge_cache"])

    if cache["dropout"] is not None:
        d_fc_out = d_fc_out * cache["dropout"]
    d_fc_lin = relu_backward(d_fc_out, cache["fc_relu"])
    d_trunk, grads["fc.w"], grads["fc.b"] = dense_backward(d_fc_lin, cache["fc_cache"])

    flat_dim = cfg.flat_features
    d_flat = d_trunk[:, :flat_dim]
    d_conv = d_flat.reshape(cache["conv_out_shape"])
    for i in range(len(cfg.conv_blocks) - 1, -1, -1):
        conv_cache, relu_cache = cache["conv"][i]
        d_conv = relu_backward(d_conv, relu_cache)
        d_conv, grads[f"conv{i}.w"], grads[f"conv{i}.b"] = conv2d_backward(d_conv, conv_cache)
    return grads
