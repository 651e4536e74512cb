"""Deterministic rendering of actor-centric RGB context images.

The scene (map layers plus all actors' recent bounding boxes) is expressed
in the actor frame of the actor of interest and painted bottom-up with a
painter's algorithm: large-area layers first, finer structures on top.
Lane centerlines are colored by their direction relative to the actor's
heading (hue in HSV, saturation/value at maximum); actor history boxes
fade with age.

Pixel conventions: the image is an (n, n, 3) uint8 array in standard
row-major order (row 0 at the top). Rows are *addressed* from the bottom
edge when mapping geometry, so the actor (drawn heading-up) sits at column
``anchor_w``, ``anchor_h`` rows above the bottom. A pixel is filled when
its center lies inside a polygon; ties on edges take the lower-left pixel
(left edge and bottom edge inclusive, right and top exclusive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Mapping, Sequence

import numpy as np

from .errors import MissingTickError, UnknownActorError
from .geometry import Pose2, Track, wrap_angle, world_to_actor_many

RGB = tuple[int, int, int]

DEFAULT_LAYER_COLORS: dict[str, RGB] = {
    "road": (70, 70, 70),
    "crosswalk": (180, 180, 180),
    "lane_boundary": (255, 255, 255),
}

LAYER_Z_ORDER = {
    "road": 0,
    "crosswalk": 1,
    "lane_boundary": 2,
    "lane_direction": 3,
    "actor_history": 4,
    "actor_current": 5,
}


@dataclass(frozen=True)
class RasterConfig:
    """Raster geometry and palette."""

    n: int = 300
    resolution: float = 0.1
    anchor_w: int = 150
    anchor_h: int = 50
    history_k: int = 5
    fade_delta: float = 0.1
    layer_colors: Mapping[str, RGB] = field(default_factory=lambda: dict(DEFAULT_LAYER_COLORS))
    actor_of_interest_color: RGB = (255, 0, 0)
    other_actor_color: RGB = (255, 255, 0)
    draw_lane_boundaries: bool = True
    flip_lateral: bool = False

    def __post_init__(self) -> None:
        if not (0 < self.anchor_w < self.n and 0 < self.anchor_h < self.n):
            raise ValueError("anchor must lie strictly inside the image")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.history_k < 1:
            raise ValueError("history_k must be >= 1")
        if not 0.0 <= self.fade_delta <= 1.0:
            raise ValueError("fade_delta must be in [0, 1]")


@dataclass(frozen=True)
class VectorLayer:
    """Same-kind primitives painted together at one z level.

    Each primitive is (points, color, mode); mode is "fill" for polygons
    and "stroke" for polylines. Points are actor-frame meters.
    """

    kind: str
    z_order: int
    primitives: tuple[tuple[np.ndarray, RGB, str], ...]


def hue_from_direction(relative_angle: float) -> RGB:
    """Map a direction (radians in [0, 2*pi)) to a fully saturated hue."""
    hue_deg = math.degrees(relative_angle) % 360.0
    sector = hue_deg / 60.0
    i = int(sector) % 6
    f = sector - math.floor(sector)
    v, p, q, t = 1.0, 0.0, 1.0 - f, f
    rgb_f = ((v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q))[i]
    return tuple(int(255.0 * c + 0.5) for c in rgb_f)


def fading_brightness(k: int, delta: float) -> float:
    """Brightness factor for a bounding box k ticks in the past."""
    if k < 0:
        raise ValueError("history offset must be >= 0")
    return max(0.0, 1.0 - k * delta)


def scale_color(color: RGB, factor: float) -> RGB:
    return tuple(int(c * factor + 0.5) for c in color)


def point_to_pixel(cfg: RasterConfig, point: Sequence[float]) -> tuple[int, int] | None:
    """Actor-frame point -> (col, row-from-bottom), or None when off-image."""
    u, v = _to_pixel_coords(cfg, point[0], point[1])
    col = math.floor(u + 0.5)
    row = math.floor(v + 0.5)
    if 0 <= col < cfg.n and 0 <= row < cfg.n:
        return (col, row)
    return None


def _to_pixel_coords(cfg: RasterConfig, x: float, y: float) -> tuple[float, float]:
    lateral = -y if not cfg.flip_lateral else y
    return (cfg.anchor_w + lateral / cfg.resolution, cfg.anchor_h + x / cfg.resolution)


def _points_to_pixel_coords(cfg: RasterConfig, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    sign = -1.0 if not cfg.flip_lateral else 1.0
    u = cfg.anchor_w + sign * pts[:, 1] / cfg.resolution
    v = cfg.anchor_h + pts[:, 0] / cfg.resolution
    return np.column_stack((u, v))


def _put_pixel(img: np.ndarray, col: int, row: int, color: RGB) -> None:
    n = img.shape[0]
    if 0 <= col < n and 0 <= row < n:
        img[n - 1 - row, col] = color


def fill_polygon(img: np.ndarray, pixel_verts: np.ndarray, color: RGB) -> None:
    """Scanline fill over pixel centers (centers at integer coordinates)."""
    n = img.shape[0]
    verts = np.asarray(pixel_verts, dtype=float)
    m = len(verts)
    v_lo = max(0, math.ceil(verts[:, 1].min()))
    v_hi = min(n - 1, math.floor(verts[:, 1].max()))
    for row in range(v_lo, v_hi + 1):
        crossings = []
        for i in range(m):
            u1, v1 = verts[i]
            u2, v2 = verts[(i + 1) % m]
            if v1 == v2:
                continue
            # Half-open span [min, max) so shared vertices count once.
            if min(v1, v2) <= row < max(v1, v2):
                crossings.append(u1 + (row - v1) * (u2 - u1) / (v2 - v1))
        crossings.sort()
        for a, b in zip(crossings[::2], crossings[1::2]):
            c_lo = max(0, math.ceil(a))
            c_hi = min(n, math.ceil(b))
            if c_hi > c_lo:
                img[n - 1 - row, c_lo:c_hi] = color


def stroke_polyline(img: np.ndarray, pixel_pts: np.ndarray, color: RGB) -> None:
    """1-pixel-wide stroke, walking each segment at <= 0.5 px steps."""
    pts = np.asarray(pixel_pts, dtype=float)
    for (u1, v1), (u2, v2) in zip(pts[:-1], pts[1:]):
        length = math.hypot(u2 - u1, v2 - v1)
        steps = max(1, math.ceil(length / 0.5))
        for i in range(steps + 1):
            s = i / steps
            _put_pixel(
                img,
                math.floor(u1 + s * (u2 - u1) + 0.5),
                math.floor(v1 + s * (v2 - v1) + 0.5),
                color,
            )


def _colored_centerline_primitives(centerline_actor: np.ndarray) -> list[tuple[np.ndarray, RGB, str]]:
    prims = []
    for p1, p2 in zip(centerline_actor[:-1], centerline_actor[1:]):
        angle = math.atan2(p2[1] - p1[1], p2[0] - p1[0]) % (2.0 * math.pi)
        prims.append((np.array([p1, p2]), hue_from_direction(angle), "stroke"))
    return prims


def build_layers(
    world_map,
    tracks: Mapping[str, Track],
    actor_id: str,
    t: int,
    cfg: RasterConfig,
) -> list[VectorLayer]:
    """Assemble the z-ordered vector layers for one scene, in the actor frame."""
    if actor_id not in tracks:
        raise UnknownActorError(f"no track for actor {actor_id!r}")
    aoi = tracks[actor_id]
    if not aoi.has_tick(t):
        raise MissingTickError(f"actor {actor_id!r} has no state at tick {t}")
    frame = aoi.state_at(t).pose

    colors = {**DEFAULT_LAYER_COLORS, **dict(cfg.layer_colors)}
    layers: list[VectorLayer] = []

    road = [(world_to_actor_many(frame, poly), colors["road"], "fill") for poly in world_map.road_polygons]
    layers.append(VectorLayer("road", LAYER_Z_ORDER["road"], tuple(road)))

    cw = [
        (world_to_actor_many(frame, poly), colors["crosswalk"], "fill")
        for poly in world_map.crosswalk_polygons
    ]
    layers.append(VectorLayer("crosswalk", LAYER_Z_ORDER["crosswalk"], tuple(cw)))

    if cfg.draw_lane_boundaries:
        bounds = []
        for lane in world_map.lanes:
            for boundary in (lane.left_boundary, lane.right_boundary):
                if boundary is not None:
                    bounds.append((world_to_actor_many(frame, boundary), colors["lane_boundary"], "stroke"))
        layers.append(VectorLayer("lane_boundary", LAYER_Z_ORDER["lane_boundary"], tuple(bounds)))

    direction_prims: list[tuple[np.ndarray, RGB, str]] = []
    for lane in world_map.lanes:
        direction_prims.extend(_colored_centerline_primitives(world_to_actor_many(frame, lane.centerline)))
    layers.append(VectorLayer("lane_direction", LAYER_Z_ORDER["lane_direction"], tuple(direction_prims)))

    # History then current boxes, oldest first so recent ticks paint over old
    # ones; the actor of interest goes last within each tick.
    ordered_ids = sorted(tid for tid in tracks if tid != actor_id) + [actor_id]
    for k in range(cfg.history_k - 1, -1, -1):
        tick = t - k
        fade = fading_brightness(k, cfg.fade_delta)
        prims = []
        for tid in ordered_ids:
            track = tracks[tid]
            if not track.has_tick(tick):
                continue  # actors may enter sensor range mid-history
            state = track.state_at(tick)
            base = cfg.actor_of_interest_color if tid == actor_id else cfg.other_actor_color
            prims.append((world_to_actor_many(frame, state.footprint()), scale_color(base, fade), "fill"))
        kind = "actor_current" if k == 0 else "actor_history"
        layers.append(VectorLayer(kind, LAYER_Z_ORDER[kind], tuple(prims)))
    return layers


def _normalize_tracks(tracks) -> Mapping[str, Track]:
    if isinstance(tracks, Mapping):
        return tracks
    return {tr.actor_id: tr for tr in tracks}


def rasterize_scene(
    world_map,
    tracks: Mapping[str, Track] | Iterable[Track],
    actor_id: str,
    t: int,
    cfg: RasterConfig,
) -> np.ndarray:
    """Render the scene around `actor_id` at tick `t` into an (n, n, 3) uint8 image."""
    track_map = _normalize_tracks(tracks)
    layers = build_layers(world_map, track_map, actor_id, t, cfg)
    img = np.zeros((cfg.n, cfg.n, 3), dtype=np.uint8)
    for layer in sorted(layers, key=lambda l: l.z_order):
        for points, color, mode in layer.primitives:
            pix = _points_to_pixel_coords(cfg, points)
            if mode == "fill":
                fill_polygon(img, pix, color)
            else:
                stroke_polyline(img, pix, color)
    return img


def relative_direction(world_angle: float, frame: Pose2) -> float:
    """Direction of a world-frame angle in the actor frame, wrapped to [0, 2*pi)."""
    return wrap_angle(world_angle - frame.heading) % (2.0 * math.pi)


def write_ppm(img: np.ndarray, target: str | Path | BinaryIO) -> None:
    """Write a binary P6 PPM, bit-exact: header then raw RGB bytes."""
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an (h, w, 3) uint8 image")
    header = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    if hasattr(target, "write"):
        target.write(header)
        target.write(img.tobytes())
    else:
        with open(target, "wb") as fh:
            fh.write(header)
            fh.write(img.tobytes())


def ppm_bytes(img: np.ndarray) -> bytes:
    header = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    return header + img.tobytes()


def read_ppm(source: str | Path | BinaryIO) -> np.ndarray:
    if hasattr(source, "read"):
        data = source.read()
    else:
        data = Path(source).read_bytes()
    return parse_ppm(data)


def parse_ppm(data: bytes) -> np.ndarray:
    if not data.startswith(b"P6"):
        raise ValueError("not a binary PPM")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while data[pos : pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise ValueError("only 8-bit PPMs are supported")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height * 3, offset=pos)
    return pixels.reshape(height, width, 3).copy()
