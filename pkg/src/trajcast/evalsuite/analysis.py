"""Model-behavior analyses: event error heatmaps, error growth with
horizon, occlusion sensitivity, and dropout-based epistemic uncertainty."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..nnet.model import ModelConfig, forward, normalize_rasters
from ..rng import substream
from .metrics import trajectory_tangents


def error_heatmap(
    predictions: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Along/cross error matrices over (event tick, horizon).

    `predictions` and `targets` are (T, H, 2): one predicted/true
    trajectory per event tick.
    """
    t_len, h_len, _ = targets.shape
    along = np.empty((t_len, h_len))
    cross = np.empty((t_len, h_len))
    for t in range(t_len):
        tangents = trajectory_tangents(targets[t])
        err = predictions[t] - targets[t]
        along[t] = np.abs(np.sum(err * tangents, axis=1))
        cross[t] = np.abs(err[:, 0] * -tangents[:, 1] + err[:, 1] * tangents[:, 0])
    return along, cross


def error_vs_horizon(predictions: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Mean displacement per horizon step, (H,)."""
    d = np.linalg.norm(np.asarray(predictions, float) - np.asarray(targets, float), axis=2)
    return d.mean(axis=0)


@dataclass
class SensitivityMap:
    """Output change per occluder position; row 0 is the image's top row."""

    scores: np.ndarray  # (G, G), >= 0
    box_size: int
    stride: int

    def __post_init__(self) -> None:
        assert np.all(self.scores >= 0)


def occlusion_sensitivity(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    raster: np.ndarray,
    state: np.ndarray,
    box_size: int = 15,
    stride: int = 5,
    batch_size: int = 128,
) -> SensitivityMap:
    """Sweep a black box across the raster; score each position by the mean
    displacement between occluded and clean predicted trajectories.
    Deterministic: dropout stays off."""
    n = raster.shape[0]
    grid = (n - box_size) // stride + 1
    state_b = np.asarray(state, dtype=np.float32).reshape(1, -1)
    clean_out, _ = forward(params, cfg, normalize_rasters(raster[None]), state_b)
    clean = clean_out.positions[0]

    occluded = []
    positions = []
    scores_zero = []
    for gi in range(grid):
        for gj in range(grid):
            r0, c0 = gi * stride, gj * stride
            if not raster[r0 : r0 + box_size, c0 : c0 + box_size].any():
                scores_zero.append((gi, gj))  # occluder covers only background
                continue
            img = raster.copy()
            img[r0 : r0 + box_size, c0 : c0 + box_size] = 0
            occluded.append(img)
            positions.append((gi, gj))
    scores = np.zeros((grid, grid))
    for start in range(0, len(occluded), batch_size):
        chunk = np.stack(occluded[start : start + batch_size])
        states = np.repeat(state_b, len(chunk), axis=0)
        out, _ = forward(params, cfg, normalize_rasters(chunk), states)
        for k, pos in enumerate(positions[start : start + batch_size]):
            d = np.linalg.norm(out.positions[k] - clean, axis=1)
            scores[pos] = float(d.mean())
    return SensitivityMap(scores=scores, box_size=box_size, stride=stride)


def dropout_epistemic(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    raster: np.ndarray,
    state: np.ndarray,
    rate: float = 0.5,
    repeats: int = 100,
    seed: int = 0,
) -> np.ndarray:
    """Per-trajectory-point variance (H, 2) over seeded stochastic forward
    passes with `rate` of the FC nodes dropped."""
    dropped_cfg = replace(cfg, dropout_rate=rate)
    batch = np.repeat(normalize_rasters(raster[None]), repeats, axis=0)
    states = np.repeat(np.asarray(state, dtype=np.float32).reshape(1, -1), repeats, axis=0)
    rng = substream(seed, "dropout-analysis") if rate > 0 else None
    out, _ = forward(params, dropped_cfg, batch, states, rng)
    # float64 keeps the mean of identical float32 rows exact, so a
    # deterministic model reports exactly zero variance.
    return out.positions.astype(np.float64).var(axis=0)


def epistemic_std(per_point_variance: np.ndarray) -> np.ndarray:
    """Scalar spread per horizon: sqrt(var_x + var_y)."""
    return np.sqrt(per_point_variance.sum(axis=1))
