import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from georefvo.stereosim import (MotionProfile, NoiseSpec, RigConfig, SceneConfig,
                                SceneTooSparseError, generate_cloud, project, project_points,
                                simulate, subpixel_count, track_sequence)
from georefvo.trajectory import Pose

RIG = RigConfig(f=500, cu=320, cv=240, B=0.12)


def test_project_examples():
    assert project(RIG, Pose.identity(), (0, 0, 10)) == pytest.approx((320, 240, 314))
    assert project(RIG, Pose.identity(), (0, 0, -5)) is None
    uL, vL, uR = project(RIG, Pose.identity(), (0, 0, 10000))
    assert uL == 320 and uL - uR == pytest.approx(0.006)


def test_out_of_image_not_visible():
    assert project(RIG, Pose.identity(), (100, 0, 10)) is None
    assert project(RIG, Pose.identity(), (0, 0, 0.4)) is None


def test_rig_validation():
    with pytest.raises(ValueError):
        RigConfig(B=0.0)
    with pytest.raises(ValueError):
        RigConfig(f=-1)


def test_cloud_count_and_determinism():
    with pytest.raises(ValueError):
        generate_cloud(SceneConfig(n_points=0), 0)
    a = generate_cloud(SceneConfig(n_points=1000), 3)
    b = generate_cloud(SceneConfig(n_points=1000), 3)
    assert a.shape == (1000, 3) and np.array_equal(a, b)
    assert not np.array_equal(a, generate_cloud(SceneConfig(n_points=1000), 4))


def test_cloud_infinite_fraction():
    # near points stay inside the one-pixel depth f*B = 60 m, far points beyond it
    scene = SceneConfig(n_points=1000, z_range=(2.0, 59.0), fraction_infinite=0.2)
    cloud = generate_cloud(scene, 1, rig=RIG)
    Z = cloud[:, 2]
    assert np.sum(RIG.f * RIG.B / Z < 1.0) == 200
    assert subpixel_count(RIG, cloud) == 200


def test_far_points_must_be_subpixel():
    with pytest.raises(ValueError):
        generate_cloud(SceneConfig(far_depth=(10.0, 100.0), fraction_infinite=0.1), 0, rig=RIG)


def test_static_rig_constant_observations():
    cloud = generate_cloud(SceneConfig(n_points=500), 2)
    motion = MotionProfile.parametric(0.0, n_frames=5)
    tracks, gt = simulate(RIG, motion, cloud)
    first_ids, first = tracks.at_frame(0)
    for k in range(1, 5):
        ids, obs = tracks.at_frame(k)
        assert np.array_equal(ids, first_ids) and np.array_equal(obs, first)
    assert np.allclose(gt.positions, 0)


def test_disparity_doubles_approaching():
    motion = MotionProfile.parametric(1.0, frame_interval=1.0, n_frames=6)
    tracks, _ = simulate(RIG, motion, np.array([[0.0, 0.0, 10.0], [1.0, 0.0, 12.0]]))
    d = {k: tracks.at_frame(k)[1][0] for k in (0, 5)}
    assert d[0][0] - d[0][2] == pytest.approx(6.0)
    assert d[5][0] - d[5][2] == pytest.approx(12.0)


def test_noisy_simulation_is_seeded():
    cloud = generate_cloud(SceneConfig(n_points=300), 0)
    motion = MotionProfile.parametric(10.0, n_frames=10)
    a, _ = simulate(RIG, motion, cloud, NoiseSpec(sigma=0.5, seed=9))
    b, _ = simulate(RIG, motion, cloud, NoiseSpec(sigma=0.5, seed=9))
    c, _ = simulate(RIG, motion, cloud, NoiseSpec(sigma=0.5, seed=10))
    assert np.array_equal(a.obs, b.obs) and np.array_equal(a.ids, b.ids)
    assert not np.array_equal(a.obs, c.obs)


def test_noiseless_observation_invariants():
    cloud = generate_cloud(SceneConfig(n_points=800, fraction_infinite=0.2), 5)
    motion = MotionProfile.parametric(8.0, yaw_rate=2.0, n_frames=30)
    tracks, _ = simulate(RIG, motion, cloud)
    for k in (0, 17, 29):
        ids, obs = tracks.at_frame(k)
        assert np.all((obs[:, 1] >= 0) & (obs[:, 1] < RIG.height))
        assert np.all(obs[:, 0] - obs[:, 2] >= 0)
        # recover depth from the pose and compare with the disparity formula
        pts = motion.poses[k].inverse().apply(cloud)
        _, vis = project_points(RIG, motion.poses[k], cloud)
        Z = pts[vis, 2]
        assert np.allclose(obs[:, 0] - obs[:, 2], RIG.f * RIG.B / Z, rtol=0, atol=1e-9)


def test_quantized_observations_on_grid():
    cloud = generate_cloud(SceneConfig(n_points=300), 0)
    tracks, _ = simulate(RIG, MotionProfile.parametric(10.0, n_frames=4), cloud, NoiseSpec(quantize=1.0))
    assert np.array_equal(tracks.obs, np.round(tracks.obs))
    assert np.all(tracks.obs[:, 0] >= tracks.obs[:, 2])


def test_reentering_point_gets_new_track():
    # the first point leaves the view sideways at frame 2 and comes back at frame 3
    poses = [Pose.identity(), Pose.identity(), Pose(np.eye(3), [50.0, 0, 0]), Pose.identity()]
    tracks, _ = simulate(RIG, MotionProfile(tuple(poses)), np.array([[0.0, 0.0, 10.0], [50.0, 0.0, 10.0]]))
    assert np.array_equal(tracks.at_frame(0)[0], tracks.at_frame(1)[0])
    assert set(tracks.at_frame(1)[0]).isdisjoint(tracks.at_frame(3)[0])
    assert len(tracks) == 3
    assert [tr.id for tr in tracks] == [0, 1, 2]


def test_too_sparse_scene():
    with pytest.raises(SceneTooSparseError):
        simulate(RIG, MotionProfile.parametric(1.0, n_frames=3), np.array([[0.0, 0.0, -10.0]]))


def test_tracks_roundtrip_through_feature_tracks():
    cloud = generate_cloud(SceneConfig(n_points=200), 1)
    tracks, _ = simulate(RIG, MotionProfile.parametric(10.0, n_frames=6), cloud)
    again = track_sequence(list(tracks), tracks.n_frames)
    assert np.array_equal(again.ids, tracks.ids) and np.array_equal(again.obs, tracks.obs)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-2, 2), st.floats(1.0, 500.0))
def test_projection_disparity_formula(x, y, z):
    obs = project(RIG, Pose.identity(), (x, y, z))
    if obs is not None:
        assert obs[0] - obs[2] == pytest.approx(RIG.f * RIG.B / z, rel=1e-12)


def test_drive_with_turn():
    motion = MotionProfile.drive(200, 0.04, 8.0, turn_deg=45.0, turn_at=4.0, turn_width=1.0)
    final_yaw = np.degrees(np.arctan2(motion.poses[-1].R[0, 2], motion.poses[-1].R[2, 2]))
    assert 30.0 < final_yaw < 46.0
    assert len(motion.times()) == 200
