import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajcast.errors import MissingTickError, UnknownActorError
from trajcast.geometry import ActorState, Lane, Pose2, Track, WorldMap
from trajcast.raster import (
    RasterConfig,
    fading_brightness,
    fill_polygon,
    hue_from_direction,
    parse_ppm,
    point_to_pixel,
    ppm_bytes,
    rasterize_scene,
    read_ppm,
    scale_color,
    write_ppm,
)


def make_state(actor_id="ego", t=0, x=0.0, y=0.0, heading=0.0, length=4.5, width=2.0):
    return ActorState(actor_id, t, length, width, Pose2(x, y, heading), 0.0, 0.0, 0.0)


def single_actor_scene(heading=0.0, ticks=1):
    track = Track("ego", [make_state(t=k, heading=heading) for k in range(ticks)])
    return WorldMap(), {"ego": track}


def test_hue_paper_anchors():
    assert hue_from_direction(0.0) == (255, 0, 0)
    assert hue_from_direction(2 * math.pi / 3) == (0, 255, 0)
    assert hue_from_direction(4 * math.pi / 3) == (0, 0, 255)


@given(st.floats(min_value=0.0, max_value=2 * math.pi, exclude_max=True))
@settings(max_examples=200)
def test_hue_always_valid_bytes(angle):
    rgb = hue_from_direction(angle)
    assert len(rgb) == 3
    assert all(0 <= c <= 255 for c in rgb)
    assert max(rgb) == 255  # value at maximum keeps one channel saturated


def test_fading_values():
    assert fading_brightness(0, 0.1) == 1.0
    assert fading_brightness(4, 0.1) == pytest.approx(0.6)
    assert fading_brightness(20, 0.1) == 0.0
    assert [fading_brightness(k, 0.1) for k in range(5)] == pytest.approx(
        [1.0, 0.9, 0.8, 0.7, 0.6]
    )


@given(st.integers(min_value=0, max_value=100), st.floats(min_value=0, max_value=1))
def test_fading_clamped(k, delta):
    b = fading_brightness(k, delta)
    assert 0.0 <= b <= 1.0


def test_point_to_pixel_anchor_and_axes():
    cfg = RasterConfig()
    assert point_to_pixel(cfg, (0.0, 0.0)) == (150, 50)
    assert point_to_pixel(cfg, (10.0, 0.0)) == (150, 150)
    assert point_to_pixel(cfg, (0.0, 2.0)) == (130, 50)
    assert point_to_pixel(cfg, (200.0, 0.0)) is None
    assert point_to_pixel(cfg, (0.0, -40.0)) is None


def test_point_to_pixel_flip_gate():
    cfg = RasterConfig(flip_lateral=True)
    assert point_to_pixel(cfg, (0.0, 2.0)) == (170, 50)


def test_raster_config_validation():
    with pytest.raises(ValueError):
        RasterConfig(anchor_w=0)
    with pytest.raises(ValueError):
        RasterConfig(resolution=0.0)
    with pytest.raises(ValueError):
        RasterConfig(history_k=0)
    with pytest.raises(ValueError):
        RasterConfig(fade_delta=1.5)


def test_single_stationary_actor_box():
    world_map, tracks = single_actor_scene()
    cfg = RasterConfig(history_k=1)
    img = rasterize_scene(world_map, tracks, "ego", 0, cfg)
    red = np.all(img == (255, 0, 0), axis=2)
    assert red.sum() > 0
    # Everything else stays background black.
    assert np.all(img[~red] == 0)
    rows, cols = np.nonzero(red)
    # Box is centered on the anchor pixel; rows are counted from the top here.
    assert cols.min() < 150 < cols.max()
    anchor_row_top = cfg.n - 1 - 50
    assert rows.min() < anchor_row_top < rows.max()
    # 4.5 m x 2.0 m at 0.1 m/px: 45 px tall (forward) and 20 px wide.
    assert rows.max() - rows.min() + 1 == pytest.approx(45, abs=1)
    assert cols.max() - cols.min() + 1 == pytest.approx(20, abs=1)


def test_stationary_history_full_brightness():
    # Coincident history boxes: the k=0 layer repaints at full brightness.
    world_map, tracks = single_actor_scene(ticks=5)
    cfg = RasterConfig(history_k=5)
    img = rasterize_scene(world_map, tracks, "ego", 4, cfg)
    painted = np.any(img != 0, axis=2)
    assert set(map(tuple, img[painted])) == {(255, 0, 0)}


def test_history_fading_trail():
    # Motion of 0.5 m/tick leaves older, dimmer box slivers behind.
    states = [make_state(t=k, x=0.5 * k) for k in range(5)]
    tracks = {"ego": Track("ego", states)}
    img = rasterize_scene(WorldMap(), tracks, "ego", 4, RasterConfig(history_k=5))
    reds = sorted({int(c[0]) for c in img[np.any(img != 0, axis=2)]})
    assert reds == [int(255 * f + 0.5) for f in (0.6, 0.7, 0.8, 0.9, 1.0)]


def test_other_actor_color_and_priority():
    states_ego = [make_state(t=0)]
    states_other = [make_state("other", 0, x=8.0)]
    tracks = {"ego": Track("ego", states_ego), "other": Track("other", states_other)}
    img = rasterize_scene(WorldMap(), tracks, "ego", 0, RasterConfig(history_k=1))
    yellow = np.all(img == (255, 255, 0), axis=2)
    red = np.all(img == (255, 0, 0), axis=2)
    assert yellow.sum() > 0 and red.sum() > 0


def test_unknown_actor_and_missing_tick():
    world_map, tracks = single_actor_scene()
    with pytest.raises(UnknownActorError):
        rasterize_scene(world_map, tracks, "ghost", 0, RasterConfig())
    with pytest.raises(MissingTickError):
        rasterize_scene(world_map, tracks, "ego", 99, RasterConfig())


def test_aligned_centerline_is_red():
    lane = Lane("l0", np.array([[-30.0, 0.0], [40.0, 0.0]]))
    wm = WorldMap(lanes=(lane,))
    tracks = {"ego": Track("ego", [make_state(t=0)])}
    cfg = RasterConfig(history_k=1)
    img = rasterize_scene(wm, tracks, "ego", 0, cfg)
    # Sample the centerline ahead of the actor's box (x = 10 m -> row 150 from bottom).
    px = img[cfg.n - 1 - 150, 150]
    assert tuple(px) == (255, 0, 0)


def test_opposite_centerline_is_cyan():
    lane = Lane("l0", np.array([[40.0, 1.0], [-30.0, 1.0]]))  # pointing against the actor
    wm = WorldMap(lanes=(lane,))
    tracks = {"ego": Track("ego", [make_state(t=0)])}
    cfg = RasterConfig(history_k=1)
    img = rasterize_scene(wm, tracks, "ego", 0, cfg)
    px = img[cfg.n - 1 - 150, 140]  # y = +1 m -> 10 px to image-left
    assert tuple(px) == (0, 255, 255)  # hue 180 degrees


def test_determinism():
    lane = Lane("l0", np.array([[-30.0, 0.5], [40.0, 0.5]]))
    wm = WorldMap(
        road_polygons=(np.array([[-30.0, -4.0], [40.0, -4.0], [40.0, 4.0], [-30.0, 4.0]]),),
        lanes=(lane,),
    )
    tracks = {"ego": Track("ego", [make_state(t=k, x=0.5 * k) for k in range(5)])}
    cfg = RasterConfig(history_k=5)
    a = rasterize_scene(wm, tracks, "ego", 4, cfg)
    b = rasterize_scene(wm, tracks, "ego", 4, cfg)
    assert ppm_bytes(a) == ppm_bytes(b)


def _rotate_quarter(p, cx=0.0, cy=0.0):
    # Exact 90-degree rotation about (cx, cy): (x, y) -> (-y, x).
    return (cx - (p[1] - cy), cy + (p[0] - cx))


def test_quarter_turn_rotation_equivariance():
    # Rotating the whole world by pi/2 about the actor cancels in the actor frame.
    lane = Lane("l0", np.array([[-30.0, 0.5], [40.0, 0.5]]))
    road = np.array([[-30.0, -4.0], [40.0, -4.0], [40.0, 4.0], [-30.0, 4.0]])
    other = make_state("other", 0, x=7.0, y=1.0, heading=0.2)
    wm = WorldMap(road_polygons=(road,), lanes=(lane,))
    tracks = {
        "ego": Track("ego", [make_state(t=0)]),
        "other": Track("other", [other]),
    }
    cfg = RasterConfig(history_k=1)
    base = rasterize_scene(wm, tracks, "ego", 0, cfg)

    rot_lane = Lane("l0", np.array([_rotate_quarter(p) for p in lane.centerline]))
    rot_road = np.array([_rotate_quarter(p) for p in road])
    rot_other = ActorState(
        "other", 0, other.bbox_length, other.bbox_width,
        Pose2(*_rotate_quarter((other.pose.x, other.pose.y)), other.pose.heading + math.pi / 2),
        0.0, 0.0, 0.0,
    )
    rot_tracks = {
        "ego": Track("ego", [make_state(t=0, heading=math.pi / 2)]),
        "other": Track("other", [rot_other]),
    }
    rot = rasterize_scene(WorldMap(road_polygons=(rot_road,), lanes=(rot_lane,)), rot_tracks, "ego", 0, cfg)
    assert ppm_bytes(base) == ppm_bytes(rot)


def test_fill_polygon_half_open_rule():
    img = np.zeros((8, 8, 3), dtype=np.uint8)
    # Unit-square polygon covering pixel centers 2..4 in u, 2..4 in v -> half-open keeps 2..3.
    fill_polygon(img, np.array([[2.0, 2.0], [4.0, 2.0], [4.0, 4.0], [2.0, 4.0]]), (9, 9, 9))
    painted = {(c, 7 - r) for r, c in zip(*np.nonzero(np.any(img != 0, axis=2)))}
    assert painted == {(2, 2), (2, 3), (3, 2), (3, 3)}


def test_scale_color_rounding():
    assert scale_color((255, 255, 0), 0.6) == (153, 153, 0)
    assert scale_color((255, 0, 0), 0.0) == (0, 0, 0)


def test_ppm_round_trip(tmp_path):
    img = (np.arange(27, dtype=np.uint8)).reshape(3, 3, 3)
    path = tmp_path / "img.ppm"
    write_ppm(img, path)
    data = path.read_bytes()
    assert data.startswith(b"P6\n3 3\n255\n")
    again = read_ppm(path)
    assert np.array_equal(img, again)
    buf = io.BytesIO()
    write_ppm(img, buf)
    assert np.array_equal(parse_ppm(buf.getvalue()), img)
