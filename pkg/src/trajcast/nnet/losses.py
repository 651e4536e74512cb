"""Trajectory losses: mean squared displacement and the half-normal
negative log-likelihood.

Per example, the point loss is the average over the horizon of squared
point displacements; the NLL is the sum over the horizon of
d^2 / (2 sigma^2) + log(sigma) (distribution constants dropped). Batch
versions return the mean over examples, so single-example calls match the
per-example definitions exactly.
"""

from __future__ import annotations

import numpy as np

from ..errors import LengthMismatchError, NonFiniteActivationError, NonPositiveSigmaError


def _as_batch(traj: np.ndarray) -> np.ndarray:
    arr = np.asarray(traj, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    return arr


def _check_lengths(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise LengthMismatchError(f"prediction {pred.shape} vs ground truth {gt.shape}")


def loss_point(pred_positions: np.ndarray, gt: np.ndarray) -> float:
    """Mean over examples of (1/H) * sum_h d_h^2."""
    pred = _as_batch(pred_positions)
    gt = _as_batch(gt)
    _check_lengths(pred, gt)
    sq = np.sum((pred - gt) ** 2, axis=2)
    value = float(np.mean(np.mean(sq, axis=1)))
    if not np.isfinite(value):
        raise NonFiniteActivationError("non-finite point loss")
    return value


def loss_point_grad(pred_positions: np.ndarray, gt: np.ndarray) -> tuple[float, np.ndarray]:
    pred = np.asarray(pred_positions)
    gt_arr = np.asarray(gt, dtype=pred.dtype)
    _check_lengths(pred, gt_arr)
    n, horizon, _ = pred.shape
    diff = pred - gt_arr
    value = float(np.mean(np.sum(diff.astype(np.float64) ** 2, axis=2).mean(axis=1)))
    if not np.isfinite(value):
        raise NonFiniteActivationError("non-finite point loss")
    d_pred = (2.0 / (n * horizon)) * diff
    return value, d_pred.astype(pred.dtype)


def loss_nll(pred_positions: np.ndarray, sigmas: np.ndarray, gt: np.ndarray) -> float:
    """Mean over examples of sum_h (d_h^2 / (2 sigma_h^2) + log sigma_h)."""
    pred = _as_batch(pred_positions)
    gt = _as_batch(gt)
    _check_lengths(pred, gt)
    sig = np.asarray(sigmas, dtype=float)
    if sig.ndim == 1:
        sig = sig[None]
    if sig.shape != pred.shape[:2]:
        raise LengthMismatchError(f"sigmas {sig.shape} vs positions {pred.shape[:2]}")
    if np.any(sig <= 0):
        raise NonPositiveSigmaError("all sigmas must be strictly positive")
    sq = np.sum((pred - gt) ** 2, axis=2)
    value = float(np.mean(np.sum(sq / (2.0 * sig**2) + np.log(sig), axis=1)))
    if not np.isfinite(value):
        raise NonFiniteActivationError("non-finite NLL loss")
    return value


def loss_nll_grad(
    pred_positions: np.ndarray, sigmas: np.ndarray, gt: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    pred = np.asarray(pred_positions)
    gt_arr = np.asarray(gt, dtype=pred.dtype)
    _check_lengths(pred, gt_arr)
    sig = np.asarray(sigmas)
    if np.any(sig <= 0):
        raise NonPositiveSigmaError("all sigmas must be strictly positive")
    n = pred.shape[0]
    diff = pred - gt_arr
    sq = np.sum(diff.astype(np.float64) ** 2, axis=2)
    sig64 = sig.astype(np.float64)
    value = float(np.mean(np.sum(sq / (2.0 * sig64**2) + np.log(sig64), axis=1)))
    if not np.isfinite(value):
        raise NonFiniteActivationError("non-finite NLL loss")
    d_pred = diff / (sig[..., None] ** 2) / n
    d_sig = (-sq.astype(pred.dtype) / sig**3 + 1.0 / sig) / n
    return value, d_pred.astype(pred.dtype), d_sig.astype(pred.dtype)
