"""Pose algebra, rigid fitting, robust motion estimation, trajectory IO."""

import numpy as np
import pytest

from dynoscan.egomotion import (
    Pose,
    accumulate,
    compose,
    estimate_motion,
    quat_from_rotation,
    read_tum,
    relative_to_world,
    reorthonormalize,
    rotation_from_quat,
    rotation_z,
    solve_rigid,
    world_to_relative,
    write_tum,
)
from dynoscan.errors import DegenerateGeometryError, UnreliableMotionError

from conftest import random_pose, random_rotation


class TestPose:
    def test_identity(self):
        p = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(Pose.identity().apply(p), p)

    def test_apply_matches_definition(self):
        rng = np.random.default_rng(0)
        pose = random_pose(rng)
        pts = rng.normal(size=(10, 3))
        np.testing.assert_allclose(pose.apply(pts), pts @ pose.R.T + pose.t, atol=1e-12)
        np.testing.assert_allclose(pose.apply(pts[0]), pose.R @ pts[0] + pose.t, atol=1e-12)

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(1)
        pose = random_pose(rng)
        pts = rng.normal(size=(5, 3))
        np.testing.assert_allclose(pose.inverse().apply(pose.apply(pts)), pts, atol=1e-12)

    def test_compose_applies_right_then_left(self):
        rng = np.random.default_rng(2)
        a, b = random_pose(rng), random_pose(rng)
        pts = rng.normal(size=(7, 3))
        np.testing.assert_allclose(compose(a, b).apply(pts), a.apply(b.apply(pts)), atol=1e-12)

    def test_matrix_round_trip(self):
        pose = random_pose(np.random.default_rng(3))
        again = Pose.from_matrix(pose.matrix())
        np.testing.assert_allclose(again.R, pose.R, atol=1e-15)
        np.testing.assert_allclose(again.t, pose.t, atol=1e-15)
        assert pose.matrix()[3].tolist() == [0, 0, 0, 1]

    def test_accumulate(self):
        rng = np.random.default_rng(4)
        chain = [random_pose(rng) for _ in range(5)]
        total = accumulate(chain)
        pts = rng.normal(size=(4, 3))
        expect = pts
        for p in reversed(chain):
            expect = p.apply(expect)
        np.testing.assert_allclose(total.apply(pts), expect, atol=1e-10)
        np.testing.assert_array_equal(accumulate([]).R, np.eye(3))

    def test_long_chain_stays_orthonormal(self):
        rng = np.random.default_rng(5)
        pose = Pose.identity()
        for _ in range(10_000):
            step = Pose(rotation_z(rng.normal(scale=0.02)), rng.normal(scale=0.05, size=3))
            pose = compose(pose, step)
        assert pose.orthonormality_error() <= 1e-6

    def test_reorthonormalize_fixes_drifted_rotation(self):
        rng = np.random.default_rng(6)
        R = random_rotation(rng) + rng.normal(scale=1e-4, size=(3, 3))
        fixed = reorthonormalize(R)
        np.testing.assert_allclose(fixed.T @ fixed, np.eye(3), atol=1e-12)
        assert np.linalg.det(fixed) == pytest.approx(1.0, abs=1e-12)


class TestSolveRigid:
    def test_exact_recovery(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            pose = random_pose(rng, t_scale=2.0)
            src = rng.uniform(-10, 10, (20, 3))
            got = solve_rigid(src, pose.apply(src))
            assert np.abs(got.R - pose.R).max() <= 1e-9
            assert np.abs(got.t - pose.t).max() <= 1e-9

    def test_minimal_three_points(self):
        pose = Pose(rotation_z(0.3), np.array([1.0, -2.0, 0.5]))
        src = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0]])
        got = solve_rigid(src, pose.apply(src))
        np.testing.assert_allclose(got.R, pose.R, atol=1e-12)

    def test_reflection_never_returned(self):
        # Mirrored targets cannot be reached by a rotation; det must stay +1.
        src = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0], [0.0, 0, 1]])
        dst = src * np.array([1.0, 1.0, -1.0])
        got = solve_rigid(src, dst)
        assert np.linalg.det(got.R) == pytest.approx(1.0, abs=1e-9)

    def test_collinear_raises(self):
        src = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0]])
        with pytest.raises(DegenerateGeometryError):
            solve_rigid(src, src + 1.0)

    def test_too_few_points_raises(self):
        with pytest.raises(DegenerateGeometryError):
            solve_rigid(np.zeros((2, 3)), np.zeros((2, 3)))


class TestEstimateMotion:
    def test_clean_correspondences(self):
        rng = np.random.default_rng(20)
        pose = Pose(rotation_z(0.1), np.array([0.4, 0.1, 0.0]))
        src = rng.uniform(-10, 10, (50, 3))
        got = estimate_motion(src, pose.apply(src))
        assert np.abs(got.R - pose.R).max() <= 1e-9
        assert np.abs(got.t - pose.t).max() <= 1e-9

    def test_outliers_rejected(self):
        rng = np.random.default_rng(21)
        pose = Pose(rotation_z(-0.05), np.array([0.3, 0.0, 0.0]))
        src = rng.uniform(-10, 10, (60, 3))
        dst = pose.apply(src)
        bad = rng.choice(60, size=12, replace=False)
        dst[bad] += rng.uniform(1.0, 5.0, (12, 3)) * rng.choice([-1, 1], (12, 3))
        got = estimate_motion(src, dst)
        assert np.linalg.norm(got.t - pose.t) < 0.02
        assert np.abs(got.R - pose.R).max() < 0.01

    def test_low_inlier_ratio_raises(self):
        rng = np.random.default_rng(22)
        pose = Pose(rotation_z(0.1), np.array([0.5, 0.0, 0.0]))
        src = rng.uniform(-10, 10, (40, 3))
        dst = pose.apply(src)
        dst[:20] += rng.uniform(2.0, 8.0, (20, 3))
        with pytest.raises(UnreliableMotionError):
            estimate_motion(src, dst, min_inlier_ratio=0.9)

    def test_too_few_correspondences(self):
        with pytest.raises(DegenerateGeometryError):
            estimate_motion(np.zeros((3, 3)), np.zeros((3, 3)))

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(23)
        src = rng.uniform(-10, 10, (30, 3))
        dst = Pose(rotation_z(0.07), np.array([0.2, -0.1, 0.0])).apply(src)
        dst[:5] += 3.0
        a = estimate_motion(src, dst, seed=42)
        b = estimate_motion(src, dst, seed=42)
        np.testing.assert_array_equal(a.R, b.R)
        np.testing.assert_array_equal(a.t, b.t)


class TestQuaternions:
    def test_round_trip_all_branches(self):
        rng = np.random.default_rng(30)
        near_pi = [rotation_from_quat(q) for q in
                   ([1, 0, 0, 1e-3], [0, 1, 0, 1e-3], [0, 0, 1, 1e-3], [0, 0, 0, 1])]
        for R in near_pi + [random_rotation(rng) for _ in range(50)]:
            q = quat_from_rotation(R)
            assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)
            np.testing.assert_allclose(rotation_from_quat(q), R, atol=1e-9)


class TestTrajectories:
    def test_relative_world_round_trip(self):
        rng = np.random.default_rng(40)
        relative = [Pose.identity()] + [
            Pose(rotation_z(rng.normal(scale=0.1)), rng.normal(scale=0.3, size=3))
            for _ in range(9)]
        world = relative_to_world(relative)
        assert np.abs(world[0].matrix() - np.eye(4)).max() == 0
        back = world_to_relative(world)
        for a, b in zip(relative, back):
            np.testing.assert_allclose(a.R, b.R, atol=1e-9)
            np.testing.assert_allclose(a.t, b.t, atol=1e-9)

    def test_world_pose_tracks_fixed_point(self):
        # A point fixed in the world must appear at rel-transformed coordinates
        # each frame, and the world pose must map it back to frame-0 coords.
        rng = np.random.default_rng(41)
        p_world = np.array([3.0, -1.0, 0.5])
        relative = [Pose.identity()] + [
            Pose(rotation_z(rng.normal(scale=0.1)), rng.normal(scale=0.2, size=3))
            for _ in range(6)]
        world = relative_to_world(relative)
        p_frame = p_world.copy()
        for i in range(1, len(relative)):
            p_frame = relative[i].apply(p_frame)
            np.testing.assert_allclose(world[i].apply(p_frame), p_world, atol=1e-9)

    def test_tum_round_trip(self, tmp_path):
        rng = np.random.default_rng(42)
        times = [0.1 * i for i in range(8)]
        poses = [random_pose(rng, t_scale=5.0) for _ in range(8)]
        path = tmp_path / "traj.tum"
        write_tum(path, times, poses)
        got_t, got_p = read_tum(path)
        np.testing.assert_allclose(got_t, times, atol=1e-9)
        for a, b in zip(poses, got_p):
            np.testing.assert_allclose(a.R, b.R, atol=1e-6)
            np.testing.assert_allclose(a.t, b.t, atol=1e-9)

    def test_tum_skips_comments_and_blanks(self, tmp_path):
        path = tmp_path / "traj.tum"
        path.write_text("# header\n\n0.0 1 2 3 0 0 0 1\n")
        times, poses = read_tum(path)
        assert times == [0.0]
        np.testing.assert_array_equal(poses[0].t, [1.0, 2.0, 3.0])

    def test_tum_bad_line(self, tmp_path):
        path = tmp_path / "traj.tum"
        path.write_text("0.0 1 2 3\n")
        with pytest.raises(ValueError):
            read_tum(path)
