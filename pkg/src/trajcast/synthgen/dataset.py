"""Dataset assembly: scenarios -> tracks -> filtered tracks -> examples.

One example per (actor, tick) with full raster history and future
available. Model inputs (state vector, raster) come from the UKF-filtered
tracks while ground-truth targets are computed from the noiseless
simulation, reproducing the tracker-in-front-of-predictor noise structure.
Scenarios are split 3:1:1 by ranking a stable hash of the scenario id, so
no scenario leaks across splits.

On disk, a dataset directory holds a text manifest, a raster archive of
concatenated PPM blobs addressed by (offset, length) pairs from the
manifest, the serialized map, and both track sets per scenario; rasters
can be rebuilt from those instead of read from the archive.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..geometry import TICK_DT, ActorState, Pose2, Track, WorldMap, future_positions, state_vector
from ..mapio import load_map, save_map
from ..raster import RasterConfig, parse_ppm, ppm_bytes, rasterize_scene
from ..rng import substream
from ..ukf import UkfParams
from .scenarios import Scenario, build_map
from .simulate import NoiseModel, filter_tracks, observe, simulate

STATIC_THRESHOLD = 0.5  # meters of future motion below which an example is dropped


@dataclass
class DatasetExample:
    example_id: str
    scenario_id: str
    actor_id: str
    tick: int
    split: str
    frame: Pose2  # filtered world pose anchoring the actor frame
    state: np.ndarray  # (3,) velocity, acceleration, heading change rate
    targets: np.ndarray  # (H, 2) actor-frame ground truth
    raster_offset: int = -1
    raster_length: int = 0


@dataclass
class ScenarioData:
    scenario_id: str
    world_map: WorldMap
    true_tracks: dict[str, Track]
    filtered_tracks: dict[str, Track]


@dataclass
class TrajectoryDataset:
    horizon: int
    raster_config: RasterConfig
    examples: list[DatasetExample] = field(default_factory=list)
    rasters: np.ndarray | None = None  # (N, n, n, 3) uint8, aligned with examples
    scenario_maps: dict[str, WorldMap] = field(default_factory=dict)

    def indices(self, split: str) -> list[int]:
        return [i for i, ex in enumerate(self.examples) if ex.split == split]

    def split_examples(self, split: str) -> list[DatasetExample]:
        return [self.examples[i] for i in self.indices(split)]

    def arrays(self, split: str) -> tuple[np.ndarray | None, np.ndarray, np.ndarray]:
        """(rasters, states, targets) for one split."""
        idx = self.indices(split)
        states = np.array([self.examples[i].state for i in idx])
        targets = np.array([self.examples[i].targets for i in idx])
        rasters = self.rasters[idx] if self.rasters is not None else None
        return rasters, states, targets

    @property
    def counts(self) -> dict[str, int]:
        return {split: len(self.indices(split)) for split in ("train", "val", "test")}


def split_of(scenario_ids: list[str]) -> dict[str, str]:
    """3:1:1 split by hash rank: deterministic, order-independent, leak-free."""
    keyed = sorted(
        (hashlib.md5(sid.encode("utf-8")).hexdigest(), sid) for sid in set(scenario_ids)
    )
    n = len(keyed)
    n_train = int(round(n * 0.6))
    n_val = int(round(n * 0.2))
    assignment = {}
    for rank, (_, sid) in enumerate(keyed):
        if rank < n_train:
            assignment[sid] = "train"
        elif rank < n_train + n_val:
            assignment[sid] = "val"
        else:
            assignment[sid] = "test"
    return assignment


def build_scenario_data(
    scenario: Scenario,
    noise: NoiseModel,
    seed: int,
    ukf_params: UkfParams | None = None,
) -> ScenarioData:
    world_map = build_map(scenario)
    true_tracks = simulate(scenario, world_map)
    rng = substream(seed, "noise", scenario.scenario_id)
    observations = observe(true_tracks, noise, rng)
    filtered = filter_tracks(true_tracks, observations, ukf_params)
    return ScenarioData(scenario.scenario_id, world_map, true_tracks, filtered)


def _scenario_examples(
    data: ScenarioData,
    horizon: int,
    history_k: int,
    stride: int,
    max_per_scenario: int,
    static_threshold: float,
) -> list[DatasetExample]:
    out: list[DatasetExample] = []
    for aid in sorted(data.filtered_tracks):
        filt = data.filtered_tracks[aid]
        true = data.true_tracks[aid]
        t_lo = filt.first_tick + history_k - 1
        t_hi = min(filt.last_tick, true.last_tick - horizon)
        for t in range(t_lo, t_hi + 1, stride):
            targets = future_positions(true, t, horizon)
            pos0 = np.zeros(2)
            if np.max(np.linalg.norm(targets - pos0, axis=1)) < static_threshold:
                continue  # static actor at this tick
            fstate = filt.state_at(t)
            out.append(
                DatasetExample(
                    example_id=f"{data.scenario_id}:{aid}:{t}",
                    scenario_id=data.scenario_id,
                    actor_id=aid,
                    tick=t,
                    split="train",
                    frame=fstate.pose,
                    state=state_vector(fstate),
                    targets=targets,
                )
            )
            if len(out) >= max_per_scenario:
                return out
    return out


def _rasterize_scenario(args) -> list[np.ndarray]:
    data, examples, cfg = args
    return [
        rasterize_scene(data.world_map, data.filtered_tracks, ex.actor_id, ex.tick, cfg)
        for ex in examples
    ]


def make_dataset(
    scenarios: list[Scenario],
    raster_cfg: RasterConfig,
    horizon: int,
    noise: NoiseModel,
    seed: int,
    stride: int = 3,
    max_per_scenario: int = 60,
    static_threshold: float = STATIC_THRESHOLD,
    ukf_params: UkfParams | None = None,
    rasterize: bool = True,
    workers: int = 1,
) -> tuple[TrajectoryDataset, list[ScenarioData]]:
    """Simulate, filter, select examples, and (optionally) rasterize.

    Returns the dataset plus the per-scenario simulation data (needed when
    serializing tracks alongside the manifest).
    """
    datas = [build_scenario_data(sc, noise, seed, ukf_params) for sc in scenarios]
    assignment = split_of([sc.scenario_id for sc in scenarios])
    dataset = TrajectoryDataset(horizon=horizon, raster_config=raster_cfg)
    per_scenario: list[list[DatasetExample]] = []
    for data in datas:
        examples = _scenario_examples(
            data, horizon, raster_cfg.history_k, stride, max_per_scenario, static_threshold
        )
        for ex in examples:
            ex.split = assignment[ex.scenario_id]
        per_scenario.append(examples)
        dataset.examples.extend(examples)
        dataset.scenario_maps[data.scenario_id] = data.world_map

    if rasterize:
        tasks = [(data, examples, raster_cfg) for data, examples in zip(datas, per_scenario)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                chunks = list(pool.map(_rasterize_scenario, tasks))
        else:
            chunks = [_rasterize_scenario(t) for t in tasks]
        images = [img for chunk in chunks for img in chunk]
        n = raster_cfg.n
        dataset.rasters = (
            np.stack(images) if images else np.zeros((0, n, n, 3), dtype=np.uint8)
        )
    return dataset, datas


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset(dataset: TrajectoryDataset, datas: list[ScenarioData], out_dir: str | Path) -> None:
    out = Path(out_dir)
    (out / "maps").mkdir(parents=True, exist_ok=True)
    (out / "tracks").mkdir(exist_ok=True)

    offsets: list[tuple[int, int]] = []
    if dataset.rasters is not None:
        with open(out / "rasters.bin", "wb") as fh:
            pos = 0
            for img in dataset.rasters:
                blob = ppm_bytes(img)
                fh.write(blob)
                offsets.append((pos, len(blob)))
                pos += len(blob)
        for ex, (off, length) in zip(dataset.examples, offsets):
            ex.raster_offset = off
            ex.raster_length = length

    cfg = dataset.raster_config
    counts = dataset.counts
    with open(out / "manifest.txt", "w", encoding="utf-8") as fh:
        fh.write("# trajcast dataset v1\n")
        fh.write(f"# h={dataset.horizon} dt={_fmt(TICK_DT)}\n")
        fh.write(
            f"# raster n={cfg.n} resolution={_fmt(cfg.resolution)} anchor_w={cfg.anchor_w}"
            f" anchor_h={cfg.anchor_h} history_k={cfg.history_k} fade_delta={_fmt(cfg.fade_delta)}\n"
        )
        fh.write(f"# counts train={counts['train']} val={counts['val']} test={counts['test']}\n")
        fh.write(
            "# columns: example_id scenario actor tick split frame_x frame_y frame_heading"
            " v a hcr raster_offset raster_length targets...\n"
        )
        for ex in dataset.examples:
            row = [
                ex.example_id, ex.scenario_id, ex.actor_id, str(ex.tick), ex.split,
                _fmt(ex.frame.x), _fmt(ex.frame.y), _fmt(ex.frame.heading),
                _fmt(ex.state[0]), _fmt(ex.state[1]), _fmt(ex.state[2]),
                str(ex.raster_offset), str(ex.raster_length),
            ]
            row.extend(_fmt(v) for v in ex.targets.reshape(-1))
            fh.write(" ".join(row) + "\n")

    for data in datas:
        save_map(data.world_map, out / "maps" / f"{data.scenario_id}.map")
        _write_tracks(data.filtered_tracks, out / "tracks" / f"{data.scenario_id}.filtered.csv")
        _write_tracks(data.true_tracks, out / "tracks" / f"{data.scenario_id}.true.csv")


def _write_tracks(tracks: dict[str, Track], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("actor,tick,x,y,heading,velocity,acceleration,heading_change_rate,"
                 "bbox_length,bbox_width\n")
        for aid in sorted(tracks):
            for s in tracks[aid].states:
                fh.write(
                    ",".join(
                        [aid, str(s.t)]
                        + [_fmt(v) for v in (s.pose.x, s.pose.y, s.pose.heading, s.velocity,
                                             s.acceleration, s.heading_change_rate,
                                             s.bbox_length, s.bbox_width)]
                    )
                    + "\n"
                )


def read_tracks(path: str | Path) -> dict[str, Track]:
    rows: dict[str, list[ActorState]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        assert header.startswith("actor,")
        for line in fh:
            parts = line.strip().split(",")
            aid = parts[0]
            tick = int(parts[1])
            x, y, heading, v, a, hcr, bl, bw = (float(p) for p in parts[2:])
            rows.setdefault(aid, []).append(
                ActorState(aid, tick, bl, bw, Pose2(x, y, heading), v, a, hcr)
            )
    return {aid: Track(aid, states) for aid, states in rows.items()}


def load_dataset(path: str | Path, rasters: str = "archive") -> TrajectoryDataset:
    """Load a dataset directory; `rasters` is 'archive', 'rebuild', or 'none'."""
    root = Path(path)
    horizon = None
    cfg_kwargs: dict = {}
    examples: list[DatasetExample] = []
    with open(root / "manifest.txt", "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                if line.startswith("# h="):
                    fields = dict(tok.split("=") for tok in line[2:].split())
                    horizon = int(fields["h"])
                elif line.startswith("# raster"):
                    fields = dict(tok.split("=") for tok in line[len("# raster"):].split())
                    cfg_kwargs = dict(
                        n=int(fields["n"]), resolution=float(fields["resolution"]),
                        anchor_w=int(fields["anchor_w"]), anchor_h=int(fields["anchor_h"]),
                        history_k=int(fields["history_k"]), fade_delta=float(fields["fade_delta"]),
                    )
                continue
            if not line:
                continue
            parts = line.split(" ")
            (example_id, scenario_id, actor_id, tick, split,
             fx, fy, fh_, v, a, hcr, off, length) = parts[:13]
            targets = np.array([float(t) for t in parts[13:]]).reshape(horizon, 2)
            examples.append(
                DatasetExample(
                    example_id=example_id, scenario_id=scenario_id, actor_id=actor_id,
                    tick=int(tick), split=split, frame=Pose2(float(fx), float(fy), float(fh_)),
                    state=np.array([float(v), float(a), float(hcr)]), targets=targets,
                    raster_offset=int(off), raster_length=int(length),
                )
            )
    raster_cfg = RasterConfig(**cfg_kwargs)
    dataset = TrajectoryDataset(horizon=horizon, raster_config=raster_cfg, examples=examples)
    for map_path in sorted((root / "maps").glob("*.map")):
        dataset.scenario_maps[map_path.stem] = load_map(map_path)

    if rasters == "archive" and examples:
        blob = (root / "rasters.bin").read_bytes()
        images = [
            parse_ppm(blob[ex.raster_offset : ex.raster_offset + ex.raster_length])
            for ex in examples
        ]
        dataset.rasters = np.stack(images)
    elif rasters == "rebuild" and examples:
        tracks_by_scenario = {
            p.stem.removesuffix(".filtered"): read_tracks(p)
            for p in sorted((root / "tracks").glob("*.filtered.csv"))
        }
        images = [
            rasterize_scene(
                dataset.scenario_maps[ex.scenario_id],
                tracks_by_scenario[ex.scenario_id],
                ex.actor_id, ex.tick, raster_cfg,
            )
            for ex in examples
        ]
        dataset.rasters = np.stack(images)
    return dataset
