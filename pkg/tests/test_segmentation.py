"""Ground plane estimation, seed projection, and region growing."""

import math

import numpy as np
import pytest

from dynoscan.egomotion import Pose, rotation_z
from dynoscan.frames import NO_POINT, IntensityImage, PointFrame, SensorModel, grid_directions
from dynoscan.segmentation import (
    GroundPlane,
    estimate_ground_plane,
    region_grow,
    seeds_to_current,
)


def floor_and_wall_frame(rng, n_floor=500, n_wall=300, tilt=0.0):
    """Points on a (possibly tilted) floor through (0,0,-0.8) plus a wall."""
    normal = np.array([math.sin(tilt), 0.0, math.cos(tilt)])
    xy = rng.uniform(-10, 10, (n_floor, 2))
    z = (normal @ [0, 0, -0.8] - normal[0] * xy[:, 0] - normal[1] * xy[:, 1]) / normal[2]
    floor = np.column_stack([xy, z + rng.normal(scale=0.01, size=n_floor)])
    wall = np.column_stack([
        np.full(n_wall, 8.0),
        rng.uniform(-10, 10, n_wall),
        rng.uniform(-0.5, 2.5, n_wall)])
    xyz = np.vstack([floor, wall])
    return PointFrame(0.0, xyz, np.zeros(len(xyz))), normal


class TestGroundPlane:
    def test_flat_floor_recovered(self):
        frame, normal = floor_and_wall_frame(np.random.default_rng(80))
        plane = estimate_ground_plane(frame)
        assert not plane.fallback
        assert math.acos(min(1.0, plane.normal @ normal)) < math.radians(1.0)
        assert abs(plane.signed_distance(np.array([[0.0, 0.0, -0.8]]))[0]) < 0.03

    def test_tilted_floor_recovered(self):
        tilt = math.radians(5.0)
        frame, normal = floor_and_wall_frame(np.random.default_rng(81), tilt=tilt)
        plane = estimate_ground_plane(frame)
        assert not plane.fallback
        assert math.acos(min(1.0, plane.normal @ normal)) < math.radians(1.5)

    def test_normal_points_up(self):
        frame, _ = floor_and_wall_frame(np.random.default_rng(82))
        plane = estimate_ground_plane(frame)
        assert plane.normal[2] > 0.9
        # above-plane points measure positive
        assert plane.signed_distance(np.array([[0.0, 0.0, 1.0]]))[0] > 0

    def test_deterministic(self):
        frame, _ = floor_and_wall_frame(np.random.default_rng(83))
        a = estimate_ground_plane(frame)
        b = estimate_ground_plane(frame)
        np.testing.assert_array_equal(a.normal, b.normal)
        assert a.d == b.d

    def test_fallback_on_sparse_input(self):
        rng = np.random.default_rng(84)
        xyz = rng.uniform(-5, 5, (60, 3))       # 30% of 60 is well under 50
        plane = estimate_ground_plane(PointFrame(0.0, xyz, np.zeros(60)))
        assert plane.fallback
        np.testing.assert_array_equal(plane.normal, [0, 0, 1])
        # plane sits at the 5th-percentile height
        z5 = np.percentile(xyz[:, 2], 5.0)
        assert -plane.d == pytest.approx(z5)

    def test_fallback_when_nothing_below_sensor(self):
        rng = np.random.default_rng(85)
        xyz = rng.uniform(-5, 5, (600, 3))
        xyz[:, 2] = rng.uniform(0.5, 3.0, 600)   # all returns above the sensor
        plane = estimate_ground_plane(PointFrame(0.0, xyz, np.zeros(600)))
        assert plane.fallback

    def test_fallback_on_non_planar_low_points(self):
        rng = np.random.default_rng(86)
        xyz = rng.uniform(-5, 5, (600, 3))       # a thick diffuse cloud, no floor
        plane = estimate_ground_plane(PointFrame(0.0, xyz, np.zeros(600)))
        assert plane.fallback


def range_image(sensor, rng_grid, empties=None):
    rng_grid = np.asarray(rng_grid, dtype=np.float64)
    src = np.arange(sensor.h * sensor.w, dtype=np.int32).reshape(sensor.h, sensor.w)
    if empties is not None:
        src[empties] = NO_POINT
        rng_grid = np.where(empties, 0.0, rng_grid)
    intensity = np.where(src != NO_POINT, 50.0, 0.0)
    return IntensityImage(sensor.w, sensor.h, intensity, rng_grid, src)


FAR_PLANE = GroundPlane(np.array([0.0, 0.0, 1.0]), 100.0, tolerance=0.1)


class TestSeeds:
    def setup_method(self):
        self.sensor = SensorModel(w=16, h=8, beta_up=np.pi / 4, beta_fov=np.pi / 2)

    def test_direct_hit(self):
        img = range_image(self.sensor, np.full((8, 16), 5.0))
        # a centroid straight ahead lands at azimuth bin 8, elevation row 4
        seeds, dropped = seeds_to_current(np.array([[5.0, 0.1, 0.0]]), Pose.identity(),
                                          img, self.sensor)
        assert dropped == 0
        assert seeds == [(8, 4)]

    def test_pose_is_undone_before_projection(self):
        img = range_image(self.sensor, np.full((8, 16), 5.0))
        pose = Pose(rotation_z(0.7), np.array([1.0, -2.0, 0.3]))
        centroid = pose.apply(np.array([5.0, 0.1, 0.0]))
        seeds, dropped = seeds_to_current(centroid[None, :], pose, img, self.sensor)
        assert seeds == [(8, 4)] and dropped == 0

    def test_snap_to_nearest_occupied(self):
        empties = np.zeros((8, 16), dtype=bool)
        empties[4, 8] = True      # landing pixel is empty
        empties[4, 9] = True      # a distance-1 alternative is also empty
        img = range_image(self.sensor, np.full((8, 16), 5.0), empties)
        seeds, dropped = seeds_to_current(np.array([[5.0, 0.1, 0.0]]), Pose.identity(),
                                          img, self.sensor)
        assert dropped == 0
        assert seeds == [(8, 3)]     # (v-1, u) wins the distance-1 tie by row order

    def test_snap_tie_breaks_by_row_then_column(self):
        empties = np.zeros((8, 16), dtype=bool)
        empties[4, 8] = True
        empties[3, 8] = True         # push the snap to distance-1 column choices
        img = range_image(self.sensor, np.full((8, 16), 5.0), empties)
        seeds, _ = seeds_to_current(np.array([[5.0, 0.1, 0.0]]), Pose.identity(),
                                    img, self.sensor)
        assert seeds == [(7, 4)]     # same row, lower column index

    def test_drop_when_nothing_in_reach(self):
        empties = np.zeros((8, 16), dtype=bool)
        empties[1:8, 4:13] = True    # a hole much wider than the snap radius
        img = range_image(self.sensor, np.full((8, 16), 5.0), empties)
        seeds, dropped = seeds_to_current(np.array([[5.0, 0.1, 0.0]]), Pose.identity(),
                                          img, self.sensor, snap_radius=3)
        assert seeds == [] and dropped == 1

    def test_drop_outside_vertical_fov(self):
        img = range_image(self.sensor, np.full((8, 16), 5.0))
        seeds, dropped = seeds_to_current(np.array([[1.0, 0.0, 5.0]]), Pose.identity(),
                                          img, self.sensor)
        assert seeds == [] and dropped == 1

    def test_empty_centroids(self):
        img = range_image(self.sensor, np.full((8, 16), 5.0))
        assert seeds_to_current(np.zeros((0, 3)), Pose.identity(), img, self.sensor) \
            == ([], 0)


def grow_naive(image, seeds, sensor, plane, eps):
    """Reference grower: plain set-based BFS over the same eligibility rule."""
    h, w = sensor.h, sensor.w
    pts = grid_directions(sensor) * image.range[:, :, None]
    above = plane.signed_distance(pts.reshape(-1, 3)).reshape(h, w) > plane.tolerance
    eligible = image.occupied & above
    result: set[tuple[int, int]] = set()
    dropped = 0
    for su, sv in seeds:
        if not (0 <= su < w and 0 <= sv < h) or not eligible[sv, su]:
            dropped += 1
            continue
        if (su, sv) in result:
            continue
        comp = {(su, sv)}
        frontier = [(su, sv)]
        while frontier:
            u, v = frontier.pop()
            for du in (-1, 0, 1):
                for dv in (-1, 0, 1):
                    if du == 0 and dv == 0:
                        continue
                    nv = v + dv
                    nu = (u + du) % w
                    if not (0 <= nv < h) or (nu, nv) in comp or (nu, nv) in result:
                        continue
                    if eligible[nv, nu] and \
                            np.linalg.norm(pts[nv, nu] - pts[v, u]) <= eps:
                        comp.add((nu, nv))
                        frontier.append((nu, nv))
        result |= comp
    return sorted(v * w + u for u, v in result), dropped


def random_grow_fixture(rng):
    sensor = SensorModel(w=64, h=16, beta_up=np.pi / 6, beta_fov=np.pi / 3)
    grid = 5.0 + rng.uniform(-0.05, 0.05, (16, 64))
    for _ in range(int(rng.integers(1, 4))):
        v0, u0 = int(rng.integers(0, 12)), int(rng.integers(0, 58))
        grid[v0:v0 + int(rng.integers(2, 5)), u0:u0 + int(rng.integers(2, 6))] = \
            rng.uniform(1.5, 3.0)
    empties = rng.uniform(size=(16, 64)) < 0.08
    image = range_image(sensor, grid, empties)
    plane = GroundPlane(np.array([0.0, 0.0, 1.0]), 2.0, tolerance=0.1)
    seeds = [(int(rng.integers(0, 64)), int(rng.integers(0, 16)))
             for _ in range(int(rng.integers(1, 5)))]
    return sensor, image, plane, seeds


class TestRegionGrow:
    def test_matches_naive_bfs(self):
        rng = np.random.default_rng(87)
        for _ in range(30):
            sensor, image, plane, seeds = random_grow_fixture(rng)
            got = region_grow(image, seeds, sensor, plane, eps=0.8, max_points=100000)
            want_idx, want_dropped = grow_naive(image, seeds, sensor, plane, eps=0.8)
            assert got.label.indices.tolist() == want_idx
            assert got.dropped_seeds == want_dropped
            assert not got.truncated

    def test_eps_monotonicity(self):
        rng = np.random.default_rng(88)
        sensor, image, plane, seeds = random_grow_fixture(rng)
        tight = region_grow(image, seeds, sensor, plane, eps=0.3, max_points=100000)
        loose = region_grow(image, seeds, sensor, plane, eps=0.9, max_points=100000)
        assert set(tight.label.indices.tolist()) <= set(loose.label.indices.tolist())

    def test_depth_discontinuity_stops_growth(self):
        sensor = SensorModel(w=64, h=16, beta_up=np.pi / 6, beta_fov=np.pi / 3)
        grid = np.full((16, 64), 10.0)
        grid[:, 10:20] = 3.0         # a near slab against a far backdrop
        image = range_image(sensor, grid)
        got = region_grow(image, [(12, 8)], sensor, FAR_PLANE, eps=0.8,
                          max_points=100000)
        cols = set(int(i) % 64 for i in got.label.indices)
        assert cols == set(range(10, 20))

    def test_ground_pixels_never_join(self):
        sensor = SensorModel(w=64, h=16, beta_up=np.pi / 6, beta_fov=np.pi / 3)
        grid = np.full((16, 64), 4.0)
        image = range_image(sensor, grid)
        plane = GroundPlane(np.array([0.0, 0.0, 1.0]), 1.2, tolerance=0.1)
        got = region_grow(image, [(30, 2)], sensor, plane, eps=2.0, max_points=100000)
        pts = grid_directions(sensor).reshape(-1, 3) * 4.0
        dist = plane.signed_distance(pts)
        assert len(got.label) > 0
        assert (dist[got.label.indices] > plane.tolerance).all()

    def test_seam_wrap(self):
        sensor = SensorModel(w=64, h=16, beta_up=np.pi / 6, beta_fov=np.pi / 3)
        grid = np.full((16, 64), 10.0)
        grid[6:9, 62:] = 2.0
        grid[6:9, :3] = 2.0          # one object straddling the seam
        image = range_image(sensor, grid)
        got = region_grow(image, [(63, 7)], sensor, FAR_PLANE, eps=0.8,
                          max_points=100000)
        cols = set(int(i) % 64 for i in got.label.indices)
        assert cols == {62, 63, 0, 1, 2}

    def test_truncation_flag_and_budget(self):
        sensor = SensorModel(w=64, h=16, beta_up=np.pi / 6, beta_fov=np.pi / 3)
        image = range_image(sensor, np.full((16, 64), 2.0))
        got = region_grow(image, [(5, 5)], sensor, FAR_PLANE, eps=5.0, max_points=10)
        assert got.truncated
        assert len(got.label) <= 10

    def test_ineligible_seed_dropped(self):
        sensor = SensorModel(w=64, h=16, beta_up=np.pi / 6, beta_fov=np.pi / 3)
        empties = np.zeros((16, 64), dtype=bool)
        empties[5, 5] = True
        image = range_image(sensor, np.full((16, 64), 10.0), empties)
        got = region_grow(image, [(5, 5), (200, 0)], sensor, FAR_PLANE, eps=0.8)
        assert got.dropped_seeds == 2

    def test_duplicate_seeds_count_once(self):
        rng = np.random.default_rng(89)
        sensor, image, plane, _ = random_grow_fixture(rng)
        seeds = [(30, 8), (30, 8), (31, 8)]
        got = region_grow(image, seeds, sensor, plane, eps=0.8, max_points=100000)
        want_idx, _ = grow_naive(image, seeds, sensor, plane, eps=0.8)
        assert got.label.indices.tolist() == want_idx

    def test_bad_eps(self):
        sensor = SensorModel(w=64, h=16)
        image = range_image(sensor, np.full((16, 64), 2.0))
        with pytest.raises(ValueError):
            region_grow(image, [], sensor, FAR_PLANE, eps=0.0)
