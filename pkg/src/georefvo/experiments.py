"""Synthetic-rig experiments: baseline and disparity-clamp sweeps, and a
full simulate -> VO -> register -> evaluate run against synthetic GPS."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geo import GpsFix, LocalTrack, local_to_wgs84, wgs84_to_local
from .metrics import METRIC_NAMES, MetricReport, evaluate
from .registration import Registration, register
from .stereosim import (MotionProfile, NoiseSpec, RigConfig, SceneConfig, Tracks,
                        generate_cloud, simulate)
from .trajectory import Trajectory, interpolate_at, rot_z
from .vocore import ClampPolicy, FrameMotion, run_vo_detailed

BASELINES = (0.05, 0.12, 0.25, 0.5)
EPSILONS = (1.0, 0.01)

# camera world frame (x right, y down, z forward) -> ENU (x east, y north, z up)
CAMERA_TO_ENU = np.array([[1.0, 0.0, 0.0],
                          [0.0, 0.0, 1.0],
                          [0.0, -1.0, 0.0]])


@dataclass(frozen=True)
class Benchmark:
    """Straight drive through a street corridor with 1-px quantized matches."""

    n_key: int = 40
    stride: int = 3
    speed: float = 10.0
    frame_interval: float = 0.04
    scene: SceneConfig = SceneConfig(n_points=3000, z_range=(2.0, 150.0), fraction_infinite=0.2)
    quantize: float = 1.0
    sigma: float = 0.0

    def motion(self) -> MotionProfile:
        return MotionProfile.parametric(self.speed, 0.0, self.frame_interval,
                                        self.n_key * self.stride + 1)

    def simulate(self, baseline: float, seed: int) -> tuple[RigConfig, Tracks, Trajectory]:
        rig = RigConfig(B=baseline)
        cloud = generate_cloud(self.scene, seed)
        tracks, gt = simulate(rig, self.motion(), cloud,
                              NoiseSpec(sigma=self.sigma, quantize=self.quantize, seed=seed))
        return rig, tracks, gt


def endpoint_error(traj: Trajectory, gt: Trajectory) -> float:
    """Distance between final positions; ``gt`` is read at the last VO time."""
    return float(np.linalg.norm(traj.positions[-1] - interpolate_at(gt, traj.end)))


def sweep(baselines=BASELINES, epsilons=EPSILONS, seeds=range(20),
          bench: Benchmark = Benchmark(), mode: str = "clamp") -> dict[tuple[float, float], np.ndarray]:
    """Endpoint errors keyed by (baseline, epsilon), one entry per seed."""
    out = {(b, e): [] for b in baselines for e in epsilons}
    for b in baselines:
        for seed in seeds:
            rig, tracks, gt = bench.simulate(b, seed)
            for e in epsilons:
                traj = run_vo_detailed(rig, tracks, ClampPolicy(e, mode), bench.stride)[0]
                out[b, e].append(endpoint_error(traj, gt))
    return {k: np.array(v) for k, v in out.items()}


@dataclass(frozen=True)
class E2EConfig:
    rig: RigConfig = RigConfig()
    scene: SceneConfig = SceneConfig(n_points=4000, z_range=(2.0, 260.0), fraction_infinite=0.2)
    n_frames: int = 500
    frame_interval: float = 0.04
    speed: float = 9.0
    speed_amplitude: float = 3.0
    speed_period: float = 7.0
    turn_deg: float = 70.0
    turn_at: float = 3.0
    turn_width: float = 1.2
    sigma: float = 0.0
    quantize: float = 1.0
    seed: int = 0
    stride: int = 3
    epsilons: tuple[float, ...] = EPSILONS
    mode: str = "clamp"
    injected_offset: float = 0.6         # camera time minus GPS time, s
    gps_heading: float = 35.0            # deg, rotation of the drive about ENU up
    anchor: GpsFix = GpsFix(0.0, 45.8150, 15.9819)
    window: tuple[float, float] = (-10.0, 10.0)
    n_align: int = 4

    def motion(self) -> MotionProfile:
        return MotionProfile.drive(self.n_frames, self.frame_interval, self.speed,
                                   speed_amplitude=self.speed_amplitude,
                                   speed_period=self.speed_period, turn_deg=self.turn_deg,
                                   turn_at=self.turn_at, turn_width=self.turn_width)


def synthetic_gps(gt: Trajectory, t0: float, heading: float, anchor: GpsFix) -> list[GpsFix]:
    """1 Hz fixes of the rig path; GPS time t reads the rig at camera time t + t0."""
    n = int(math.floor(gt.end - t0 - gt.start)) + 1
    t = np.arange(n, dtype=float)
    t = t[gt.covers(t + t0)]
    enu = interpolate_at(gt, t + t0) @ (rot_z(heading) @ CAMERA_TO_ENU).T
    return local_to_wgs84(Trajectory(t, enu), anchor)


@dataclass
class E2EResult:
    gps_fixes: list[GpsFix]
    gps: LocalTrack
    tracks: Tracks
    gt: Trajectory
    runs: dict[float, dict] = field(default_factory=dict)

    def table(self) -> list[list[str]]:
        """Rows in MSE_trans, MAE_trans, MSE_rot, MAE_rot order; one column per epsilon."""
        eps = list(self.runs)
        rows = [["metric"] + [f"eps={e:g}" for e in eps]]
        for k, name in enumerate(METRIC_NAMES):
            rows.append([name] + [f"{self.runs[e]['filtered'].values()[k]:.3f}" for e in eps])
        return rows


def run_e2e(cfg: E2EConfig = E2EConfig()) -> E2EResult:
    motion = cfg.motion()
    cloud = generate_cloud(cfg.scene, cfg.seed, path=motion)
    tracks, gt = simulate(cfg.rig, motion, cloud,
                          NoiseSpec(sigma=cfg.sigma, quantize=cfg.quantize, seed=cfg.seed))
    fixes = synthetic_gps(gt, cfg.injected_offset, cfg.gps_heading, cfg.anchor)
    gps = wgs84_to_local(fixes)
    result = E2EResult(fixes, gps, tracks, gt)
    for e in cfg.epsilons:
        vo, motions, keys = run_vo_detailed(cfg.rig, tracks, ClampPolicy(e, cfg.mode), cfg.stride)
        reg = register(vo, gps, window=cfg.window, n=cfg.n_align)
        result.runs[e] = {
            "vo": vo, "motions": motions, "keys": keys, "registration": reg,
            "filtered": evaluate(gps, reg.aligned),
            "strict": evaluate(gps, reg.aligned, strict=True),
        }
    return result
