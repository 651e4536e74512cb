"""Synthetic world, traffic, and dataset generation."""

from .scenarios import Scenario, ActorScript, build_map, generate_scenarios
from .simulate import NoiseModel, filter_tracks, observe, simulate
from .dataset import TrajectoryDataset, make_dataset, load_dataset, write_dataset

__all__ = [
    "ActorScript",
    "NoiseModel",
    "Scenario",
    "TrajectoryDataset",
    "build_map",
    "filter_tracks",
    "generate_scenarios",
    "load_dataset",
    "make_dataset",
    "observe",
    "simulate",
    "write_dataset",
]
