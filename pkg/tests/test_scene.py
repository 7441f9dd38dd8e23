import json

import numpy as np
import pytest

from dimreal.errors import ConfigError
from dimreal.geometry import Pose
from dimreal.scene import (BackgroundSpec, CameraIntrinsics, EllipseShape,
                           ObjectSpec, RectShape, SceneRenderer, SceneSpec,
                           TextureSpec, TrajectoryParams, camera_trajectory,
                           default_scene, render_frame, scene_from_dict)

INTR = CameraIntrinsics(fx=100.0, fy=100.0, cx=32.0, cy=18.0, width=64, height=36)


def gray_scene(objects=(), depth=3.0, seed=0):
    return SceneSpec(
        background=BackgroundSpec(depth=depth,
                                  texture=TextureSpec(kind="constant",
                                                      color_a=(128, 128, 128))),
        objects=tuple(objects),
        intrinsics=INTR,
        seed=seed,
    )


def test_empty_scene_constant_gray():
    frame, truth = render_frame(gray_scene(), Pose.identity(), 0)
    assert (frame.rgb == 128).all()
    assert np.allclose(frame.depth, 3.0)
    assert truth.object_masks == {}


def test_rectangle_projection_matches_pinhole_oracle():
    # Rect 0.2 x 0.1 m at 1 m, centered on the principal axis.  A pixel ray
    # ((u-32)/100, (v-18)/100, 1) scaled to z=1 lands inside the rectangle
    # iff |u-32| <= 10 and |v-18| <= 5.
    obj = ObjectSpec(id=1, class_label="card", shape=RectShape(0, 0, 0.2, 0.1),
                     depth=1.0, albedo=(200, 10, 10))
    frame, truth = render_frame(gray_scene([obj]), Pose.identity(), 0)
    mask = truth.object_masks[1].bits

    us, vs = np.meshgrid(np.arange(64), np.arange(36))
    expected = (np.abs((us - 32.0) / 100.0) <= 0.1) & (np.abs((vs - 18.0) / 100.0) <= 0.05)
    assert np.array_equal(mask, expected)
    assert np.allclose(frame.depth[mask], 1.0)
    assert np.allclose(frame.depth[~mask], 3.0)
    assert (frame.rgb[mask] == (200, 10, 10)).all()


def test_render_deterministic_bit_identical():
    spec = default_scene(7)
    f1, t1 = render_frame(spec, Pose.identity(), 3)
    f2, t2 = render_frame(spec, Pose.identity(), 3)
    assert np.array_equal(f1.rgb, f2.rgb)
    assert np.array_equal(f1.depth, f2.depth)
    assert np.array_equal(t1.background_rgb, t2.background_rgb)


def test_masks_disjoint_and_cover_closer_pixels():
    objs = [
        ObjectSpec(id=1, class_label="a", shape=RectShape(0.0, 0.0, 0.3, 0.2),
                   depth=1.0, albedo=(200, 0, 0)),
        ObjectSpec(id=2, class_label="b", shape=RectShape(0.05, 0.0, 0.3, 0.2),
                   depth=2.0, albedo=(0, 200, 0)),
    ]
    frame, truth = render_frame(gray_scene(objs), Pose.identity(), 0)
    m1, m2 = truth.object_masks[1].bits, truth.object_masks[2].bits
    assert not (m1 & m2).any()
    union = m1 | m2
    assert np.array_equal(union, frame.depth < 3.0)
    # nearest object wins in the overlap
    assert np.allclose(frame.depth[m1], 1.0)


def test_background_matches_outside_masks():
    spec = default_scene(3)
    frame, truth = render_frame(spec, Pose.identity(), 0)
    outside = np.ones(frame.depth.shape, dtype=bool)
    for m in truth.object_masks.values():
        outside &= ~m.bits
    assert np.array_equal(frame.rgb[outside], truth.background_rgb[outside])


def test_object_behind_background_rejected():
    obj = ObjectSpec(id=1, class_label="x", shape=RectShape(0, 0, 0.5, 0.5),
                     depth=4.0, albedo=(1, 2, 3))
    with pytest.raises(ConfigError):
        gray_scene([obj], depth=3.0)


def test_subpixel_object_rejected():
    obj = ObjectSpec(id=1, class_label="x", shape=RectShape(0, 0, 0.001, 0.001),
                     depth=1.0, albedo=(1, 2, 3))
    with pytest.raises(ConfigError):
        gray_scene([obj])


def test_degenerate_intrinsics_rejected():
    with pytest.raises(ConfigError):
        CameraIntrinsics(fx=0.0, fy=100.0, cx=32, cy=18, width=64, height=36)


def test_texture_colors_follow_seed():
    spec_a = gray_scene(seed=1)
    checker = TextureSpec(kind="checker")
    a1, b1 = checker.resolve_colors(1)
    a2, b2 = checker.resolve_colors(1)
    a3, _ = checker.resolve_colors(2)
    assert np.array_equal(a1, a2) and np.array_equal(b1, b2)
    assert not np.array_equal(a1, a3)
    del spec_a


def test_moving_camera_sees_world_anchored_texture():
    spec = SceneSpec(
        background=BackgroundSpec(depth=3.0, texture=TextureSpec(kind="checker",
                                                                 color_a=(0, 0, 0),
                                                                 color_b=(255, 255, 255),
                                                                 cell_m=0.5)),
        objects=(), intrinsics=INTR, seed=0)
    renderer = SceneRenderer(spec)
    f0, _ = renderer.render(Pose(np.eye(3), [0.0, 0.0, 0.0]), 0)
    f1, _ = renderer.render(Pose(np.eye(3), [0.25, 0.0, 0.0]), 1)
    assert not np.array_equal(f0.rgb, f1.rgb)


class TestTrajectory:
    def test_static_constant(self):
        a = camera_trajectory("static", 0)
        b = camera_trajectory("static", 100)
        assert a.allclose(b, atol=0)

    def test_pan_rate_zero_is_static(self):
        params = TrajectoryParams(pan_rate_deg=0.0)
        a = camera_trajectory("pan", 57, params)
        assert a.allclose(camera_trajectory("static", 57, params), atol=0)

    def test_orbit_periodic(self):
        params = TrajectoryParams(orbit_radius=1.5, orbit_period=200.0)
        a = camera_trajectory("orbit", 13, params)
        b = camera_trajectory("orbit", 213, params)
        assert np.max(np.abs(a.rotation - b.rotation)) < 1e-9
        assert np.max(np.abs(a.translation - b.translation)) < 1e-9

    def test_orbit_continuous(self):
        params = TrajectoryParams(orbit_period=100.0)
        a = camera_trajectory("orbit", 10.0, params)
        b = camera_trajectory("orbit", 10.001, params)
        assert np.max(np.abs(a.translation - b.translation)) < 1e-3

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            camera_trajectory("spiral", 0)

    def test_negative_index(self):
        with pytest.raises(ConfigError):
            camera_trajectory("static", -1)


def test_scene_json_loading(tmp_path):
    doc = {
        "seed": 5,
        "intrinsics": {"fx": 100.0, "fy": 100.0, "cx": 32.0, "cy": 18.0,
                       "width": 64, "height": 36},
        "background": {"depth": 3.0,
                       "texture": {"kind": "constant", "color_a": [10, 20, 30]}},
        "objects": [
            {"id": 1, "class": "mug", "depth": 1.0, "albedo": [200, 10, 10],
             "shape": {"kind": "rect", "cx": 0.0, "cy": 0.0, "w": 0.2, "h": 0.1}},
            {"id": 2, "class": "ball", "depth": 1.5, "albedo": [10, 200, 10],
             "shape": {"kind": "ellipse", "cx": 0.1, "cy": 0.0, "rx": 0.1, "ry": 0.1}},
        ],
    }
    spec = scene_from_dict(doc)
    assert spec.seed == 5
    assert len(spec.objects) == 2
    assert isinstance(spec.objects[1].shape, EllipseShape)

    path = tmp_path / "scene.json"
    path.write_text(json.dumps(doc))
    from dimreal.scene import load_scene
    spec2 = load_scene(path, seed_override=9)
    assert spec2.seed == 9

    with pytest.raises(ConfigError):
        scene_from_dict({"intrinsics": doc["intrinsics"]})


def test_frame_and_timestamp_monotone():
    spec = gray_scene()
    renderer = SceneRenderer(spec)
    f0, _ = renderer.render(Pose.identity(), 0)
    f9, _ = renderer.render(Pose.identity(), 9)
    assert f9.frame_id == 9
    assert f9.timestamp_ns > f0.timestamp_ns
