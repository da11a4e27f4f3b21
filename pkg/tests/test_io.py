import numpy as np
import pytest

from georefvo import io
from georefvo.geo import GpsFix
from georefvo.metrics import MetricReport
from georefvo.stereosim import MotionProfile, RigConfig, SceneConfig, generate_cloud, simulate
from georefvo.trajectory import Pose, Trajectory


def test_trajectory_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    traj = Trajectory(np.cumsum(rng.uniform(0.01, 1, 20)), rng.normal(size=(20, 3)))
    io.write_trajectory_csv(tmp_path / "t.csv", traj)
    back = io.read_trajectory_csv(tmp_path / "t.csv")
    assert np.array_equal(back.times, traj.times) and np.array_equal(back.positions, traj.positions)


def test_gps_roundtrip(tmp_path):
    fixes = [GpsFix(0.0, 45.1, 15.2, 100.0), GpsFix(1.0, 45.10001, 15.20002, 100.5)]
    io.write_gps_csv(tmp_path / "g.csv", fixes)
    assert io.read_gps_csv(tmp_path / "g.csv") == fixes


def test_gps_without_altitude(tmp_path):
    (tmp_path / "g.csv").write_text("t,lat,lon\n0,1,2\n1,1,2.00001\n")
    assert io.read_gps_csv(tmp_path / "g.csv")[1].alt == 0.0


@pytest.mark.parametrize("body,match", [
    ("t,lat,lon\n0,1,2\n0,1,2\n", ":3"),
    ("t,lat,lon\n0,1,2\n1,95,2\n", ":3"),
    ("t,lat,lon\n0,1,x\n", ":2"),
    ("t,x,y\n0,1,2\n", "header"),
    ("t,lat,lon\n", "no GPS"),
])
def test_bad_gps_files(tmp_path, body, match):
    (tmp_path / "g.csv").write_text(body)
    with pytest.raises(io.InputError, match=match):
        io.read_gps_csv(tmp_path / "g.csv")


def test_poses_roundtrip(tmp_path):
    poses = [Pose.from_rotvec([0.1, -0.2, 0.3], [1, 2, 3]), Pose.identity()]
    io.write_poses(tmp_path / "p.txt", poses)
    back = io.read_poses(tmp_path / "p.txt")
    assert all(np.array_equal(a.matrix(), b.matrix()) for a, b in zip(back, poses))


def test_poses_wrong_count(tmp_path):
    (tmp_path / "p.txt").write_text("1 0 0 0 0 1 0 0 0 0 1\n")
    with pytest.raises(io.InputError, match=":1"):
        io.read_poses(tmp_path / "p.txt")


def test_tracks_roundtrip(tmp_path):
    cloud = generate_cloud(SceneConfig(n_points=200), 0)
    tracks, _ = simulate(RigConfig(), MotionProfile.parametric(5.0, n_frames=5), cloud)
    io.write_tracks_csv(tmp_path / "k.csv", tracks)
    back = io.read_tracks_csv(tmp_path / "k.csv")
    assert np.array_equal(back.ids, tracks.ids) and np.array_equal(back.obs, tracks.obs)
    assert back.n_frames == tracks.n_frames


def test_report_roundtrip(tmp_path):
    r = MetricReport(0.101, 0.249, 24.053, 2.882, 109, 2)
    io.write_report_csv(tmp_path / "r.csv", {"filtered": r})
    text = (tmp_path / "r.csv").read_text().splitlines()
    assert text[0] == ",".join(io.REPORT_HEADER)
    assert io.read_report_csv(tmp_path / "r.csv")["filtered"]["MSE_rot_deg2"] == 24.053


def test_config_parsing(tmp_path):
    (tmp_path / "c.cfg").write_text("# rig\nbaseline = 0.25  # m\nn-points=100\n\n")
    assert io.read_config(tmp_path / "c.cfg") == {"baseline": "0.25", "n_points": "100"}
    (tmp_path / "bad.cfg").write_text("baseline 0.25\n")
    with pytest.raises(io.InputError, match=":1"):
        io.read_config(tmp_path / "bad.cfg")
