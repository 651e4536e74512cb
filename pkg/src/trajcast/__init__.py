"""Short-term vehicle trajectory prediction from rasterized scene context.

The package covers the full desk-scale pipeline: synthetic world and
traffic generation, unscented Kalman filtering of noisy tracks,
bird's-eye-view rasterization, a from-scratch convolutional trajectory
regressor with point and uncertainty-aware losses, engineered baselines,
and a metric/calibration analysis suite.
"""

from .geometry import (
    TICK_DT,
    ActorState,
    Lane,
    Pose2,
    Track,
    WorldMap,
    actor_to_world,
    future_positions,
    state_vector,
    world_to_actor,
)
from .raster import RasterConfig, rasterize_scene

__all__ = [
    "TICK_DT",
    "ActorState",
    "Lane",
    "Pose2",
    "RasterConfig",
    "Track",
    "WorldMap",
    "actor_to_world",
    "future_positions",
    "rasterize_scene",
    "state_vector",
    "world_to_actor",
]

__version__ = "0.1.0"
