"""Kinematics, the 2-link arm, scenes, rendering, and the sim loop."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agvlab import simworld as sw
from agvlab.navigation import NavConfig, WheelSpeeds
from agvlab.simworld import (
    Pose2D,
    SceneError,
    UnreachableTarget,
    arm_fk_2link,
    arm_ik_2link,
    step_diff_drive,
)

speeds = st.floats(-120, 120, allow_nan=False)
angles = st.floats(-math.pi, math.pi, allow_nan=False)


class TestDiffDrive:
    def test_straight_motion(self):
        p = step_diff_drive(Pose2D(0, 0, 0), WheelSpeeds(100, 100), 120, 0.5)
        assert (p.x, p.y, p.heading) == pytest.approx((50, 0, 0))

    def test_reference_arc(self):
        # vl=90, vr=110, wheelbase 120, dt 1: radius 600, heading change 1/6
        p = step_diff_drive(Pose2D(0, 0, 0), WheelSpeeds(90, 110), 120, 1.0)
        dth = 1.0 / 6.0
        assert p.heading == pytest.approx(dth, abs=1e-12)
        assert p.x == pytest.approx(600 * math.sin(dth), abs=1e-9)
        assert p.y == pytest.approx(600 * (1 - math.cos(dth)), abs=1e-9)

    def test_pure_rotation_in_place(self):
        p = step_diff_drive(Pose2D(3, 4, 0.2), WheelSpeeds(-60, 60), 120, 0.25)
        assert (p.x, p.y) == pytest.approx((3, 4), abs=1e-9)
        assert p.heading == pytest.approx(0.2 + 120 / 120 * 0.25)

    def test_zero_speeds_fixed_point(self):
        p0 = Pose2D(1, 2, 0.3)
        assert step_diff_drive(p0, WheelSpeeds(0, 0), 120, 0.1) == p0

    def test_nonpositive_dt_rejected(self):
        with pytest.raises(ValueError):
            step_diff_drive(Pose2D(0, 0, 0), WheelSpeeds(1, 1), 120, 0)

    @settings(max_examples=150, deadline=None)
    @given(speeds, speeds, angles, st.floats(0.001, 1.0))
    def test_arc_composition(self, vl, vr, heading, dt):
        """Two half steps equal one full step to 1e-9 (exact arc property)."""
        p0 = Pose2D(10.0, -20.0, heading)
        w = WheelSpeeds(vl, vr)
        full = step_diff_drive(p0, w, 120, dt)
        half = step_diff_drive(step_diff_drive(p0, w, 120, dt / 2), w, 120, dt / 2)
        assert half.x == pytest.approx(full.x, abs=1e-9)
        assert half.y == pytest.approx(full.y, abs=1e-9)
        assert half.heading == pytest.approx(full.heading, abs=1e-9)


class TestArm:
    L1, L2 = 240.0, 220.0

    def test_full_reach_straight(self):
        t1, t2 = arm_ik_2link((self.L1 + self.L2, 0), self.L1, self.L2)
        assert (t1, t2) == pytest.approx((0.0, 0.0), abs=1e-9)

    def test_unreachable_far(self):
        with pytest.raises(UnreachableTarget):
            arm_ik_2link((600, 0), self.L1, self.L2)

    def test_unreachable_near(self):
        with pytest.raises(UnreachableTarget):
            arm_ik_2link((5, 0), self.L1, self.L2)

    @settings(max_examples=150, deadline=None)
    @given(st.floats(25, 455), angles)
    def test_fk_roundtrip(self, radius, bearing):
        target = (radius * math.cos(bearing), radius * math.sin(bearing))
        t1, t2 = arm_ik_2link(target, self.L1, self.L2)
        assert t2 <= 0  # elbow-down branch
        fk = arm_fk_2link(t1, t2, self.L1, self.L2)
        assert fk == pytest.approx(target, abs=1e-6)


class TestTrackAndScene:
    def test_default_track_shape(self):
        g = sw.default_track()
        assert g.source.name == "S"
        assert sorted(g.terminal(k).name for k in range(4)) == ["T0", "T1", "T2", "T3"]
        # terminals hang 140 mm below their destination squares
        for k in range(4):
            x, y = g.terminal(k).pos
            assert x == pytest.approx((k + 0.5) * 280)
            assert y == pytest.approx(-140)

    def test_marker_layout_grid(self):
        layout = sw.marker_layout()
        assert layout.shape == (10, 2)
        assert set(map(tuple, layout)) == {
            (i * 280.0, j * 280.0) for i in range(5) for j in (0, 1)}

    def test_destination_square(self):
        sq = sw.destination_square(2)
        assert sq[:, 0].min() == 560 and sq[:, 0].max() == 840
        assert sq[:, 1].min() == 0 and sq[:, 1].max() == 280

    def test_scene_json_roundtrip(self):
        scene = sw.default_scene(seed=4)
        rng = np.random.default_rng(0)
        sw.stage_job(scene, 1, rng)
        again = sw.SceneSpec.from_json(scene.to_json())
        assert again.to_json() == scene.to_json()

    def test_scene_save_load(self, tmp_path):
        scene = sw.default_scene(seed=4)
        p = tmp_path / "scene.json"
        scene.save(p)
        assert sw.SceneSpec.load(p).to_json() == scene.to_json()

    def test_bad_version_rejected(self):
        with pytest.raises(SceneError):
            sw.SceneSpec.from_json({"scene_version": 2})

    def test_zone_outside_square_rejected(self):
        scene = sw.default_scene()
        bad = sw.DropZone(0, np.array([(10, 10), (400, 10), (400, 200), (10, 200)]))
        with pytest.raises(SceneError):
            scene.set_drop_zones([bad])

    def test_self_intersecting_zone_rejected(self):
        scene = sw.default_scene()
        bow = sw.DropZone(0, np.array([(40, 40), (200, 200), (200, 40), (40, 200)]))
        with pytest.raises(SceneError):
            scene.set_drop_zones([bow])

    def test_stage_job_places_valid_zone(self):
        scene = sw.default_scene()
        rng = np.random.default_rng(7)
        for dest in range(4):
            sw.stage_job(scene, dest, rng)
            assert len(scene.drop_zones) == 1
            z = scene.drop_zones[0]
            assert z.destination == dest
            sw.SceneSpec.validate_zone(z)

    def test_true_drop_point_inside_zone(self):
        from agvlab.geometry import point_polygon_distance

        scene = sw.default_scene()
        rng = np.random.default_rng(9)
        for dest in range(4):
            sw.stage_job(scene, dest, rng)
            gt = scene.true_drop_point(dest)
            d = point_polygon_distance((gt.x, gt.y), scene.drop_zones[0].polygon)
            assert d == pytest.approx(gt.radius, abs=0.5)


class TestRendering:
    def test_overhead_deterministic(self):
        scene = sw.default_scene(seed=2)
        a = sw.render_overhead(scene)
        b = sw.render_overhead(scene)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (448, 1280) and a.dtype == np.uint8

    def test_onboard_shape_and_determinism(self):
        scene = sw.default_scene(seed=2)
        cfg = NavConfig()
        pose = Pose2D(560, -700, math.pi / 2)
        a = sw.render_onboard(scene, pose, cfg)
        b = sw.render_onboard(scene, pose, cfg)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (300, 300)

    def test_onboard_sees_line_ahead(self):
        scene = sw.default_scene(seed=2)
        cfg = NavConfig()
        pose = Pose2D(560, -700, math.pi / 2)  # at the source, facing the stem
        frame = sw.render_onboard(scene, pose, cfg)
        from agvlab import imaging

        _, bits = imaging.segment_otsu(imaging.gaussian_blur3(frame))
        err = imaging.path_error(bits, cfg.roi())
        assert err is not None and abs(err) < 5

    def test_lighting_gain_darkens(self):
        bright = sw.default_scene(seed=2)
        dark = sw.default_scene(seed=2)
        dark.lighting = sw.Lighting(gain=0.7, noise_sigma=bright.lighting.noise_sigma,
                                    seed=bright.lighting.seed)
        dark.invalidate()
        assert sw.render_overhead(dark).mean() < sw.render_overhead(bright).mean()

    def test_tilted_camera_is_projective(self):
        rng = np.random.default_rng(3)
        cam = sw.tilted_camera(rng)
        h = cam.world_to_px.matrix
        assert h[2, 0] != 0.0 or h[2, 1] != 0.0


class TestSimLoop:
    def test_single_job_places_object(self):
        scene = sw.default_scene(seed=1)
        rng = np.random.default_rng(5)
        sw.stage_job(scene, 2, rng)
        sim = sw.Simulator(scene, NavConfig())
        result = sim.run_job()
        assert result.completed
        gt = scene.true_drop_point(2)
        assert math.hypot(result.placed[0] - gt.x,
                          result.placed[1] - gt.y) < 10.0
        assert "pick" in result.events and "drop" in result.events

    def test_sim_run_writes_trace(self, tmp_path):
        scene = sw.default_scene(seed=1)
        trace = sw.sim_run(scene, jobs=1, seed=3, destinations=[1])
        assert len(trace.jobs) == 1 and trace.jobs[0].completed
        out = tmp_path / "trace.jsonl"
        trace.write_jsonl(out)
        import json

        lines = out.read_text().splitlines()
        assert len(lines) == trace.jobs[0].steps
        rec = json.loads(lines[0])
        assert set(rec) == {"t", "x", "y", "heading", "state", "error", "cmd", "event"}

    def test_snapshot_keys(self):
        sim = sw.Simulator(sw.default_scene(seed=1), NavConfig())
        snap = sim.snapshot()
        assert set(snap) == {"pose", "state", "steps", "sim_time_s", "carrying",
                             "object", "last_event", "destination"}
        assert snap["state"] == "idle"
