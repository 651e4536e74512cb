"""Reliability diagrams for half-normal predictive uncertainty.

The error model treats each displacement as |N(0, sigma^2)|, so the
confidence-c threshold is sigma * q(c) with q the standard half-normal
quantile (q(0.6827) = 1, matching the one-sigma/68% convention). The
observed coverage at level c is the fraction of errors below threshold; a
calibrated model tracks the diagonal. The quantile convention is isolated
here so a two-sided alternative is a one-line change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfinv

from ..errors import EmptyInputError

DEFAULT_LEVELS = tuple(np.round(np.arange(0.1, 0.91, 0.1), 2))


def half_normal_quantile(level: float) -> float:
    """Quantile of |N(0, 1)| at the given probability level in (0, 1)."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    return math.sqrt(2.0) * float(erfinv(level))


@dataclass
class ReliabilityCurve:
    levels: np.ndarray
    observed: np.ndarray

    def __post_init__(self) -> None:
        self.levels = np.asarray(self.levels, dtype=float)
        self.observed = np.asarray(self.observed, dtype=float)
        assert np.all((self.observed >= 0) & (self.observed <= 1))
        assert np.all(np.diff(self.observed) >= 0), "coverage must be non-decreasing"

    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.observed - self.levels)))


def reliability_curve(
    errors: np.ndarray,
    sigmas: np.ndarray,
    levels=DEFAULT_LEVELS,
) -> ReliabilityCurve:
    """Observed coverage of |error| <= sigma * q(level) per level."""
    d = np.asarray(errors, dtype=float).reshape(-1)
    s = np.asarray(sigmas, dtype=float).reshape(-1)
    if d.size == 0 or s.size != d.size:
        raise EmptyInputError("need matching, non-empty error/sigma arrays")
    if np.any(s <= 0):
        raise ValueError("sigmas must be positive")
    observed = [float(np.mean(d <= s * half_normal_quantile(c))) for c in levels]
    return ReliabilityCurve(levels=np.asarray(levels), observed=np.asarray(observed))
