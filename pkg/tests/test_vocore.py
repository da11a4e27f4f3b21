import numpy as np
import pytest

from georefvo.stereosim import (MotionProfile, NoiseSpec, RigConfig, SceneConfig, generate_cloud,
                                project_points, simulate)
from georefvo.trajectory import Pose, rot_y, rotation_angle_deg
from georefvo.vocore import (ClampPolicy, MotionEstimationError, estimate_motion,
                             reprojection_jacobian, reprojection_residuals, run_vo,
                             run_vo_detailed, solve_motion, triangulate, triangulate_many)

RIG = RigConfig(f=500, cu=320, cv=240, B=0.12)


def test_triangulate_examples():
    lm = triangulate(RIG, (320, 240, 314))
    assert (lm.X, lm.Y, lm.Z) == pytest.approx((0, 0, 10))
    assert triangulate(RIG, (320, 240, 320), ClampPolicy(1.0)).Z == pytest.approx(60.0)
    assert triangulate(RIG, (320, 240, 320), ClampPolicy(0.01)).Z == pytest.approx(6000.0)
    assert triangulate(RIG, (380, 240, 320)).Z == pytest.approx(1.0)


def test_drop_mode_and_negative_disparity():
    assert triangulate(RIG, (320, 240, 319.5), ClampPolicy(1.0, "drop")) is None
    assert triangulate(RIG, (320, 240, 320.3)).Z == pytest.approx(60.0)
    with pytest.raises(ValueError):
        triangulate(RIG, (320, 240, 321))


def test_policy_validation():
    with pytest.raises(ValueError):
        ClampPolicy(0.0)
    with pytest.raises(ValueError):
        ClampPolicy(1.0, "round")


def test_triangulation_roundtrip_clamped_inside_epsilon():
    pts = np.column_stack([np.zeros(3), np.zeros(3), [10.0, 100.0, 1000.0]])
    obs, _ = project_points(RIG, Pose.identity(), pts)
    back, keep = triangulate_many(RIG, obs, ClampPolicy(1.0))
    assert keep.all()
    assert back[0, 2] == pytest.approx(10.0) and back[1, 2] == pytest.approx(60.0)
    assert back[2, 2] == pytest.approx(60.0)


def _frame_pair(motion_pose, n=200, seed=0):
    rng = np.random.default_rng(seed)
    pts = np.column_stack([rng.uniform(-8, 8, n), rng.uniform(-3, 2, n), rng.uniform(4, 40, n)])
    a, va = project_points(RIG, Pose.identity(), pts)
    b, vb = project_points(RIG, motion_pose, pts)
    keep = va & vb
    return a[keep], b[keep]


def test_identical_frames_give_identity():
    a, _ = _frame_pair(Pose.identity())
    m = estimate_motion(RIG, a, a, ClampPolicy(0.01))
    assert np.allclose(m.pose.matrix(), np.eye(4), atol=1e-12) and m.rms_reproj < 1e-9


def test_forward_step_recovered():
    truth = Pose(np.eye(3), [0, 0, 1.0])
    a, b = _frame_pair(truth)
    m = estimate_motion(RIG, a, b, ClampPolicy(0.01))
    assert np.allclose(m.pose.t, [0, 0, 1], atol=1e-6)
    assert rotation_angle_deg(m.pose.R) < 1e-6


def test_yaw_and_forward_recovered():
    truth = Pose(rot_y(2.0), [0, 0, 1.0])
    a, b = _frame_pair(truth)
    m = estimate_motion(RIG, a, b, ClampPolicy(0.01))
    assert np.allclose(m.pose.matrix(), truth.matrix(), atol=1e-5)


def test_too_few_matches():
    a, b = _frame_pair(Pose(np.eye(3), [0, 0, 1.0]), n=200)
    with pytest.raises(MotionEstimationError):
        estimate_motion(RIG, a[:2], b[:2])


def test_ransac_rejects_outliers():
    truth = Pose(rot_y(1.0), [0.1, 0, 0.8])
    a, b = _frame_pair(truth, seed=3)
    b = b.copy()
    b[:20, :2] += 40.0
    b[:20, 2] += 40.0
    m = estimate_motion(RIG, a, b, ClampPolicy(0.01), ransac=True, seed=1)
    assert m.inliers == len(a) - 20
    assert np.allclose(m.pose.matrix(), truth.matrix(), atol=1e-6)


def test_jacobian_against_finite_differences():
    rng = np.random.default_rng(4)
    lms = np.column_stack([rng.uniform(-5, 5, 10), rng.uniform(-2, 2, 10), rng.uniform(5, 30, 10)])
    obs = rng.uniform(0, 400, (10, 3))
    x = np.concatenate([rng.normal(0, 0.2, 3), rng.normal(0, 0.5, 3)])
    J = reprojection_jacobian(RIG, lms, x)
    h = 1e-6
    num = np.column_stack([(reprojection_residuals(RIG, lms, obs, x + h * e)
                            - reprojection_residuals(RIG, lms, obs, x - h * e)) / (2 * h)
                           for e in np.eye(6)])
    assert np.linalg.norm(J - num) / np.linalg.norm(num) < 1e-6


def test_collinear_landmarks_singular():
    lms = np.column_stack([np.zeros(5), np.zeros(5), np.linspace(5, 10, 5)])
    obs, _ = project_points(RIG, Pose.identity(), lms)
    with pytest.raises(MotionEstimationError, match="singular"):
        solve_motion(RIG, lms, obs)


def test_static_rig_stays_at_origin():
    cloud = generate_cloud(SceneConfig(n_points=500), 0)
    tracks, _ = simulate(RIG, MotionProfile.parametric(0.0, n_frames=10), cloud)
    assert np.allclose(run_vo(RIG, tracks, ClampPolicy(0.01), 3).positions, 0, atol=1e-12)


def test_constant_forward_stride_three():
    cloud = generate_cloud(SceneConfig(n_points=1500, z_range=(2.0, 50.0)), 1)
    motion = MotionProfile.parametric(25.0, frame_interval=0.04, n_frames=31)  # 1 m per frame
    tracks, _ = simulate(RIG, motion, cloud)
    traj, motions, keys = run_vo_detailed(RIG, tracks, ClampPolicy(0.01), 3)
    assert np.array_equal(keys, np.arange(0, 31, 3))
    assert np.allclose(traj.positions[:, 2], 3.0 * np.arange(len(keys)), atol=1e-5)
    assert np.allclose(traj.times, keys * 0.04)
    assert all(m.iterations <= 50 for m in motions)


def test_small_epsilon_wins_with_far_features():
    scene = SceneConfig(n_points=3000, z_range=(2.0, 150.0), fraction_infinite=0.2)
    cloud = generate_cloud(scene, 2)
    motion = MotionProfile.parametric(10.0, n_frames=61)
    tracks, gt = simulate(RIG, motion, cloud, NoiseSpec(quantize=1.0, seed=2))
    errs = [np.linalg.norm(run_vo(RIG, tracks, ClampPolicy(e), 3).positions[-1] - gt.positions[60])
            for e in (1.0, 0.01)]
    assert errs[1] < errs[0]


def test_failure_names_frame():
    cloud = generate_cloud(SceneConfig(n_points=200), 0)
    tracks, _ = simulate(RIG, MotionProfile.parametric(10.0, n_frames=7), cloud)
    keep = tracks.frames != 6
    from georefvo.stereosim import Tracks
    cut = Tracks(tracks.ids[keep], tracks.frames[keep], tracks.obs[keep], 7)
    with pytest.raises(MotionEstimationError, match="frame 6"):
        run_vo(RIG, cut, ClampPolicy(0.01), 3)
