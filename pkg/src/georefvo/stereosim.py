"""Artificial rectified stereo rig driving through a synthetic street scene.

The scene is a ground-plane corridor flanked by two facade bands, plus an
optional share of very distant points whose disparity is below one pixel.
A virtual rig moves along a motion profile; every frame projects the cloud
into both images and visible projections are chained into feature tracks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .trajectory import Pose, Trajectory, rot_y

Z_NEAR = 0.5  # m


@dataclass(frozen=True)
class RigConfig:
    """Rectified stereo intrinsics; the right camera sits ``B`` meters along +x."""

    f: float = 500.0
    cu: float = 320.0
    cv: float = 240.0
    width: int = 640
    height: int = 480
    B: float = 0.12

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError(f"focal length must be positive, got {self.f}")
        if not self.B > 0:
            raise ValueError(f"baseline must be positive, got {self.B}")
        if not 0 < self.cu < self.width:
            raise ValueError(f"cu={self.cu} outside (0, {self.width})")
        if not 0 < self.cv < self.height:
            raise ValueError(f"cv={self.cv} outside (0, {self.height})")

    @property
    def fb(self) -> float:
        """Disparity times depth; the depth at which disparity is one pixel."""
        return self.f * self.B


@dataclass(frozen=True)
class SceneConfig:
    n_points: int = 4000
    z_range: tuple[float, float] = (2.0, 200.0)
    half_width: float = 7.0            # corridor half width, facade planes at +-x
    facade_depth: float = 3.0          # facade band thickness beyond the plane
    facade_top: float = 12.0           # m above the camera
    camera_height: float = 1.5         # ground plane at y = +camera_height
    ground_fraction: float = 0.35
    fraction_infinite: float = 0.0
    far_depth: tuple[float, float] = (2000.0, 20000.0)
    far_spread: tuple[float, float, float, float] = (-0.6, 0.6, -0.45, 0.05)  # x/z, y/z bounds

    def __post_init__(self):
        if self.n_points <= 0:
            raise ValueError(f"point count must be positive, got {self.n_points}")
        lo, hi = self.z_range
        if not 0 < lo < hi:
            raise ValueError(f"bad depth range {self.z_range}")
        if not 0.0 <= self.fraction_infinite <= 1.0:
            raise ValueError(f"fraction_infinite {self.fraction_infinite} outside [0, 1]")
        if not 0 < self.far_depth[0] <= self.far_depth[1]:
            raise ValueError(f"bad far depth range {self.far_depth}")


def generate_cloud(scene: SceneConfig, seed: int, rig: RigConfig | None = None,
                   path: MotionProfile | None = None) -> np.ndarray:
    """Seeded (N, 3) world points; far points come last.

    Without ``path`` the corridor runs straight along +z. With a path, the
    depth coordinate of near points is read as arc length and the corridor
    bends with the path (straight beyond its end). When ``rig`` is given,
    the far depth range is checked to lie beyond the rig's
    one-pixel-disparity depth.
    """
    if rig is not None and scene.far_depth[0] < rig.fb:
        raise ValueError(f"far points from {scene.far_depth[0]} m are not sub-pixel "
                         f"for a rig with f*B = {rig.fb} m")
    rng = np.random.default_rng(seed)
    n_far = int(round(scene.n_points * scene.fraction_infinite))
    n_near = scene.n_points - n_far
    n_ground = int(round(n_near * scene.ground_fraction))
    n_facade = n_near - n_ground
    z0, z1 = scene.z_range

    z = rng.uniform(z0, z1, n_ground)
    ground = np.column_stack([rng.uniform(-scene.half_width, scene.half_width, n_ground),
                              np.full(n_ground, scene.camera_height), z])

    side = rng.choice([-1.0, 1.0], n_facade)
    facade = np.column_stack([
        side * (scene.half_width + rng.uniform(0.0, scene.facade_depth, n_facade)),
        rng.uniform(-scene.facade_top, scene.camera_height, n_facade),
        rng.uniform(z0, z1, n_facade),
    ])
    near = np.concatenate([ground, facade])
    if path is not None:
        near = _bend_along(near, path)

    x0, x1, y0, y1 = scene.far_spread
    zf = np.exp(rng.uniform(math.log(scene.far_depth[0]), math.log(scene.far_depth[1]), n_far))
    far = np.column_stack([rng.uniform(x0, x1, n_far) * zf, rng.uniform(y0, y1, n_far) * zf, zf])
    return np.concatenate([near, far])


def _bend_along(points: np.ndarray, path: MotionProfile) -> np.ndarray:
    pos = np.array([p.t for p in path.poses])
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pos, axis=0), axis=1))])
    k = np.clip(np.searchsorted(arc, points[:, 2], side="right") - 1, 0, len(arc) - 1)
    out = np.empty_like(points)
    for j in np.unique(k):
        sel = k == j
        local = points[sel].copy()
        local[:, 2] -= arc[j]
        out[sel] = path.poses[j].apply(local)
    return out


def project_points(rig: RigConfig, pose: Pose, points) -> tuple[np.ndarray, np.ndarray]:
    """Project world points seen from a rig at world-from-camera ``pose``.

    Returns ``(obs, visible)``: an (N, 3) array of ``(uL, vL, uR)`` and the
    visibility mask. Disparity is computed directly as ``f * B / Z``.
    """
    Xc = pose.inverse().apply(np.atleast_2d(points))
    X, Y, Z = Xc[:, 0], Xc[:, 1], Xc[:, 2]
    in_front = Z > Z_NEAR
    Zs = np.where(in_front, Z, 1.0)
    uL = rig.f * X / Zs + rig.cu
    vL = rig.f * Y / Zs + rig.cv
    uR = uL - rig.f * rig.B / Zs
    visible = (in_front & (uR >= 0.0) & (uL < rig.width) & (uL >= 0.0) & (uR < rig.width)
               & (vL >= 0.0) & (vL < rig.height))
    return np.column_stack([uL, vL, uR]), visible


def project(rig: RigConfig, pose: Pose, point):
    """``(uL, vL, uR)`` of one point, or None when it is not visible."""
    obs, visible = project_points(rig, pose, np.asarray(point, dtype=float).reshape(1, 3))
    return tuple(float(v) for v in obs[0]) if visible[0] else None


@dataclass(frozen=True)
class MotionProfile:
    """Per-frame world-from-camera poses and their timestamps."""

    poses: tuple[Pose, ...]
    frame_interval: float = 0.04

    def __post_init__(self):
        if len(self.poses) < 2:
            raise ValueError("motion needs at least 2 frames")
        if not self.frame_interval > 0:
            raise ValueError(f"frame interval must be positive, got {self.frame_interval}")
        object.__setattr__(self, "poses", tuple(self.poses))

    @classmethod
    def parametric(cls, speed: float, yaw_rate: float = 0.0, frame_interval: float = 0.04,
                   n_frames: int = 100) -> "MotionProfile":
        """Constant speed (m/s) along +z with constant yaw rate (deg/s, about +y)."""
        return cls.drive(n_frames, frame_interval, speed, yaw_rate=yaw_rate)

    @classmethod
    def drive(cls, n_frames: int, frame_interval: float = 0.04, speed: float = 10.0, *,
              speed_amplitude: float = 0.0, speed_period: float = 7.0, yaw_rate: float = 0.0,
              turn_deg: float = 0.0, turn_at: float = 3.0, turn_width: float = 1.5) -> "MotionProfile":
        """Sinusoidal speed about ``speed`` plus a Gaussian-shaped turn of
        ``turn_deg`` centred at ``turn_at`` seconds on top of ``yaw_rate``."""
        if n_frames < 2:
            raise ValueError("motion needs at least 2 frames")
        t = np.arange(n_frames - 1) * frame_interval
        v = speed + speed_amplitude * np.sin(2 * np.pi * t / speed_period)
        bump = np.exp(-0.5 * ((t - turn_at) / turn_width) ** 2) / (turn_width * math.sqrt(2 * math.pi))
        w = yaw_rate + turn_deg * bump
        poses = [Pose.identity()]
        for vk, wk in zip(v, w):
            poses.append(poses[-1] @ Pose(rot_y(wk * frame_interval), [0.0, 0.0, vk * frame_interval]))
        return cls(tuple(poses), frame_interval)

    def __len__(self) -> int:
        return len(self.poses)

    def times(self) -> np.ndarray:
        return np.arange(len(self.poses)) * self.frame_interval

    def trajectory(self) -> Trajectory:
        return Trajectory(self.times(), [p.t for p in self.poses])


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0      # px, isotropic Gaussian per coordinate
    quantize: float = 0.0   # px grid step, 0 disables
    seed: int = 0


@dataclass(frozen=True)
class FeatureTrack:
    id: int
    obs: dict[int, tuple[float, float, float]]


@dataclass(frozen=True)
class Tracks:
    """Columnar feature observations sorted by (frame, feature id)."""

    ids: np.ndarray
    frames: np.ndarray
    obs: np.ndarray
    n_frames: int
    frame_interval: float = 0.04
    _starts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        frames = np.asarray(self.frames, dtype=np.int64)
        obs = np.asarray(self.obs, dtype=float).reshape(-1, 3)
        order = np.lexsort((ids, frames))
        ids, frames, obs = ids[order], frames[order], obs[order]
        n_frames = max(int(self.n_frames), int(frames.max()) + 1 if len(frames) else 0)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "obs", obs)
        object.__setattr__(self, "n_frames", n_frames)
        object.__setattr__(self, "_starts", np.searchsorted(frames, np.arange(n_frames + 1)))

    def __len__(self) -> int:
        return len(np.unique(self.ids))

    def at_frame(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self._starts[k], self._starts[k + 1]
        return self.ids[a:b], self.obs[a:b]

    def matches(self, a: int, b: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Features observed in both frames: ``(ids, obs_a, obs_b)``."""
        ia, oa = self.at_frame(a)
        ib, ob = self.at_frame(b)
        common, ja, jb = np.intersect1d(ia, ib, assume_unique=True, return_indices=True)
        return common, oa[ja], ob[jb]

    def __iter__(self) -> Iterator[FeatureTrack]:
        order = np.lexsort((self.frames, self.ids))
        ids, frames, obs = self.ids[order], self.frames[order], self.obs[order]
        cuts = np.nonzero(np.diff(ids))[0] + 1
        for seg in np.split(np.arange(len(ids)), cuts):
            if len(seg):
                yield FeatureTrack(int(ids[seg[0]]),
                                   {int(frames[j]): tuple(float(v) for v in obs[j]) for j in seg})

    def longest(self) -> int:
        if not len(self.ids):
            return 0
        return int(np.bincount(np.unique(self.ids, return_inverse=True)[1]).max())


class SceneTooSparseError(ValueError):
    pass


def simulate(rig: RigConfig, motion: MotionProfile, cloud, noise: NoiseSpec = NoiseSpec()
             ) -> tuple[Tracks, Trajectory]:
    """Feature tracks of ``cloud`` along ``motion`` and the exact rig trajectory.

    A point yields a new track each time it (re)enters the view. Noise
    draws come from per-frame substreams of ``noise.seed``.
    """
    cloud = np.asarray(cloud, dtype=float).reshape(-1, 3)
    n_frames = len(motion)
    per_frame = []
    vis = np.zeros((n_frames, len(cloud)), dtype=bool)
    streams = np.random.SeedSequence(noise.seed).spawn(n_frames)
    for k, pose in enumerate(motion.poses):
        obs, visible = project_points(rig, pose, cloud)
        obs = obs[visible]
        if noise.sigma > 0:
            rng = np.random.default_rng(streams[k])
            e = rng.normal(0.0, noise.sigma, (len(obs), 3))
            obs = obs + e
        if noise.quantize > 0:
            obs = np.round(obs / noise.quantize) * noise.quantize
        if noise.sigma > 0 or noise.quantize > 0:
            obs[:, 0] = np.clip(obs[:, 0], 0.0, rig.width - 1e-9)
            obs[:, 1] = np.clip(obs[:, 1], 0.0, rig.height - 1e-9)
            obs[:, 2] = np.clip(np.minimum(obs[:, 2], obs[:, 0]), 0.0, None)
        vis[k] = visible
        per_frame.append(obs)

    # a track starts wherever a point becomes visible; ids increase in (frame, point) order
    starts = vis & ~np.vstack([np.zeros((1, len(cloud)), dtype=bool), vis[:-1]])
    start_ids = np.full(vis.shape, -1, dtype=np.int64)
    start_ids[starts] = np.arange(int(starts.sum()))
    track_of = np.maximum.accumulate(start_ids, axis=0)

    frames = np.concatenate([np.full(len(o), k) for k, o in enumerate(per_frame)])
    ids = np.concatenate([track_of[k][vis[k]] for k in range(n_frames)])
    tracks = Tracks(ids, frames, np.concatenate(per_frame) if per_frame else np.zeros((0, 3)),
                    n_frames, motion.frame_interval)
    if tracks.longest() < 2:
        raise SceneTooSparseError("scene too sparse: no feature is tracked over 2 frames")
    return tracks, motion.trajectory()


def subpixel_count(rig: RigConfig, cloud, pose: Pose | None = None) -> int:
    """Points in front of the rig whose true disparity is below one pixel."""
    Xc = (pose or Pose.identity()).inverse().apply(np.atleast_2d(cloud))
    Z = Xc[:, 2]
    return int(np.sum((Z > 0) & (rig.fb / np.where(Z > 0, Z, 1.0) < 1.0)))


def track_sequence(tracks: Sequence[FeatureTrack], n_frames: int | None = None,
                   frame_interval: float = 0.04) -> Tracks:
    """Pack FeatureTrack objects back into the columnar form."""
    ids, frames, obs = [], [], []
    for tr in tracks:
        for k, o in tr.obs.items():
            ids.append(tr.id)
            frames.append(k)
            obs.append(o)
    return Tracks(ids, frames, np.array(obs).reshape(-1, 3), n_frames or 0, frame_interval)
