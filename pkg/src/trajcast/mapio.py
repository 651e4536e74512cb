"""Line-delimited text serialization of the vector map.

One record per line. Polygons:

    road <id> | x,y x,y x,y ...
    crosswalk <id> | x,y x,y x,y ...

Lanes:

    lane <id> | speed=<mps> | succ=<id,id,...> | center: x,y ... | left: x,y ... | right: x,y ...

Coordinates are meters, written with repr() so they round-trip exactly.
Records are written sorted by (kind, id), which makes serialization
deterministic for a given map.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .geometry import Lane, WorldMap

_HEADER = "# trajcast map v1"


def _fmt_points(points: np.ndarray) -> str:
    return " ".join(f"{repr(float(x))},{repr(float(y))}" for x, y in points)


def _parse_points(text: str) -> np.ndarray:
    pts = [tuple(float(v) for v in tok.split(",")) for tok in text.split()]
    return np.array(pts, dtype=float)


def dump_map(world_map: WorldMap, stream: io.TextIOBase) -> None:
    stream.write(_HEADER + "\n")
    records = []
    for idx, poly in enumerate(world_map.road_polygons):
        records.append(("road", f"road{idx:03d}", f"road road{idx:03d} | {_fmt_points(poly)}"))
    for idx, poly in enumerate(world_map.crosswalk_polygons):
        records.append(
            ("crosswalk", f"cw{idx:03d}", f"crosswalk cw{idx:03d} | {_fmt_points(poly)}")
        )
    for lane in world_map.lanes:
        parts = [
            f"lane {lane.lane_id}",
            f"speed={repr(float(lane.speed_limit))}",
            "succ=" + ",".join(lane.successors),
            "center: " + _fmt_points(lane.centerline),
        ]
        if lane.left_boundary is not None:
            parts.append("left: " + _fmt_points(lane.left_boundary))
        if lane.right_boundary is not None:
            parts.append("right: " + _fmt_points(lane.right_boundary))
        records.append(("lane", lane.lane_id, " | ".join(parts)))
    for _, _, line in sorted(records, key=lambda r: (r[0], r[1])):
        stream.write(line + "\n")


def save_map(world_map: WorldMap, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        dump_map(world_map, fh)


def parse_map(stream: io.TextIOBase) -> WorldMap:
    roads: list[np.ndarray] = []
    crossings: list[np.ndarray] = []
    lanes: list[Lane] = []
    for raw in stream:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        kind, rest = line.split(" ", 1)
        if kind in ("road", "crosswalk"):
            _, points = rest.split("|", 1)
            target = roads if kind == "road" else crossings
            target.append(_parse_points(points))
        elif kind == "lane":
            fields = [f.strip() for f in rest.split("|")]
            lane_id = fields[0]
            speed = 11.2
            successors: tuple[str, ...] = ()
            center = left = right = None
            for fld in fields[1:]:
                if fld.startswith("speed="):
                    speed = float(fld[len("speed="):])
                elif fld.startswith("succ="):
                    succ = fld[len("succ="):]
                    successors = tuple(s for s in succ.split(",") if s)
                elif fld.startswith("center:"):
                    center = _parse_points(fld[len("center:"):])
                elif fld.startswith("left:"):
                    left = _parse_points(fld[len("left:"):])
                elif fld.startswith("right:"):
                    right = _parse_points(fld[len("right:"):])
            lanes.append(
                Lane(
                    lane_id=lane_id,
                    centerline=center,
                    left_boundary=left,
                    right_boundary=right,
                    successors=successors,
                    speed_limit=speed,
                )
            )
        else:
            raise ValueError(f"unknown map record kind {kind!r}")
    return WorldMap(
        road_polygons=tuple(roads), crosswalk_polygons=tuple(crossings), lanes=tuple(lanes)
    )


def load_map(path: str | Path) -> WorldMap:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_map(fh)
