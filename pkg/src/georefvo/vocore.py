"""Minimal stereo visual odometry over rectified feature tracks.

Landmarks are triangulated in the previous key-image; the motion to the
current key-image minimizes the stacked stereo reprojection residuals
``(uL, vL, uR)`` of those landmarks with Gauss-Newton over an axis-angle
rotation and a translation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .stereosim import RigConfig, Tracks
from .trajectory import Pose, Trajectory, accumulate, rotvec_to_matrix

log = logging.getLogger(__name__)

NEGATIVE_DISPARITY_LIMIT = -0.5  # px; noisier observations are rejected
MIN_MATCHES = 3
CONFIDENT_MATCHES = 6
MAX_ITER = 50
STEP_TOL = 1e-10
SINGULAR_COND = 1e12


class MotionEstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClampPolicy:
    """Zero-disparity handling: ``clamp`` floors disparity at ``epsilon``,
    ``drop`` discards features below it."""

    epsilon: float = 1.0
    mode: str = "clamp"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.mode not in ("clamp", "drop"):
            raise ValueError(f"mode must be 'clamp' or 'drop', got {self.mode!r}")


class Landmark(NamedTuple):
    X: float
    Y: float
    Z: float
    source_disparity: float


@dataclass(frozen=True)
class FrameMotion:
    pose: Pose              # frame k+1 expressed in frame k
    inliers: int
    rms_reproj: float       # px
    iterations: int


def triangulate_many(rig: RigConfig, obs, policy: ClampPolicy = ClampPolicy()
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized triangulation; returns ``(points, keep)``.

    ``keep`` is False for observations with disparity below the negative
    limit, and in drop mode for those below ``epsilon``.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    uL, vL, uR = obs[:, 0], obs[:, 1], obs[:, 2]
    d = uL - uR
    keep = d >= NEGATIVE_DISPARITY_LIMIT
    if policy.mode == "drop":
        keep &= d >= policy.epsilon
    d_used = np.maximum(np.maximum(d, 0.0), policy.epsilon)
    Z = rig.fb / d_used
    pts = np.column_stack([(uL - rig.cu) * Z / rig.f, (vL - rig.cv) * Z / rig.f, Z])
    return pts, keep


def triangulate(rig: RigConfig, obs, policy: ClampPolicy = ClampPolicy()) -> Landmark | None:
    """Landmark in the observing camera frame, or None when dropped."""
    uL, vL, uR = (float(v) for v in obs)
    if uL - uR < NEGATIVE_DISPARITY_LIMIT:
        raise ValueError(f"disparity {uL - uR:.3f} px below {NEGATIVE_DISPARITY_LIMIT} px")
    pts, keep = triangulate_many(rig, [(uL, vL, uR)], policy)
    if not keep[0]:
        return None
    X, Y, Z = pts[0]
    return Landmark(float(X), float(Y), float(Z), uL - uR)


def _right_jacobian(w) -> np.ndarray:
    x, y, z = (float(v) for v in w)
    theta2 = x * x + y * y + z * z
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    if theta2 < 1e-12:
        a, b = 0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0
    else:
        theta = math.sqrt(theta2)
        a = (1.0 - math.cos(theta)) / theta2
        b = (theta - math.sin(theta)) / (theta2 * theta)
    return np.eye(3) - a * K + b * K @ K


def reprojection_residuals(rig: RigConfig, landmarks, obs, params) -> np.ndarray:
    """Stacked ``projection - observation`` for ``X' = R(w) X + t``; shape (3N,)."""
    params = np.asarray(params, dtype=float)
    Xc = np.asarray(landmarks, dtype=float) @ rotvec_to_matrix(params[:3]).T + params[3:]
    X, Y, Z = Xc[:, 0], Xc[:, 1], Xc[:, 2]
    pred = np.column_stack([rig.f * X / Z + rig.cu,
                            rig.f * Y / Z + rig.cv,
                            rig.f * (X - rig.B) / Z + rig.cu])
    return (pred - np.asarray(obs, dtype=float)).reshape(-1)


def reprojection_jacobian(rig: RigConfig, landmarks, params) -> np.ndarray:
    """Analytic d(residuals)/d(w, t); shape (3N, 6)."""
    params = np.asarray(params, dtype=float)
    P = np.asarray(landmarks, dtype=float)
    R = rotvec_to_matrix(params[:3])
    Xc = P @ R.T + params[3:]
    X, Y, Z = Xc[:, 0], Xc[:, 1], Xc[:, 2]
    n = len(P)
    f = rig.f
    # d(uL, vL, uR)/d(X, Y, Z), one 3x3 block per landmark
    dproj = np.zeros((n, 3, 3))
    dproj[:, 0, 0] = f / Z
    dproj[:, 0, 2] = -f * X / Z**2
    dproj[:, 1, 1] = f / Z
    dproj[:, 1, 2] = -f * Y / Z**2
    dproj[:, 2, 0] = f / Z
    dproj[:, 2, 2] = -f * (X - rig.B) / Z**2
    # d(R X)/dw = -R [X]x Jr(w)
    skew = np.zeros((n, 3, 3))
    skew[:, 0, 1], skew[:, 0, 2] = -P[:, 2], P[:, 1]
    skew[:, 1, 0], skew[:, 1, 2] = P[:, 2], -P[:, 0]
    skew[:, 2, 0], skew[:, 2, 1] = -P[:, 1], P[:, 0]
    dXdw = -np.einsum("ij,njk,kl->nil", R, skew, _right_jacobian(params[:3]))
    J = np.concatenate([dproj @ dXdw, dproj], axis=2)
    return J.reshape(3 * n, 6)


def solve_motion(rig: RigConfig, landmarks, obs, x0=None, max_iter: int = MAX_ITER,
                 tol: float = STEP_TOL) -> tuple[np.ndarray, float, int]:
    """Gauss-Newton for ``(w, t)`` mapping landmarks into the observing frame.

    Returns ``(params, rms_px, iterations)``.
    """
    x = np.zeros(6) if x0 is None else np.array(x0, dtype=float)
    it = 0
    for it in range(1, max_iter + 1):
        r = reprojection_residuals(rig, landmarks, obs, x)
        J = reprojection_jacobian(rig, landmarks, x)
        H = J.T @ J
        cond = np.linalg.cond(H)
        if not np.isfinite(cond) or cond > SINGULAR_COND:
            raise MotionEstimationError(
                f"Gauss-Newton normal matrix singular (condition {cond:.3g}); "
                "landmark geometry is degenerate")
        step = -np.linalg.solve(H, J.T @ r)
        x = x + step
        if np.linalg.norm(step) < tol:
            break
    r = reprojection_residuals(rig, landmarks, obs, x)
    return x, float(np.sqrt(np.mean(r * r))), it


def params_to_motion(params) -> Pose:
    """Frame transform ``X' = R X + t`` to the pose of the new frame in the old one."""
    return Pose(rotvec_to_matrix(params[:3]), params[3:]).inverse()


def _point_errors(rig, landmarks, obs, params) -> np.ndarray:
    r = reprojection_residuals(rig, landmarks, obs, params).reshape(-1, 3)
    return np.linalg.norm(r, axis=1)


def estimate_motion(rig: RigConfig, prev_obs, curr_obs, policy: ClampPolicy = ClampPolicy(), *,
                    ransac: bool = False, ransac_iters: int = 100, ransac_threshold: float = 2.0,
                    seed: int = 0, max_iter: int = MAX_ITER, tol: float = STEP_TOL) -> FrameMotion:
    """Motion between two key-images from matched stereo observations."""
    prev_obs = np.atleast_2d(np.asarray(prev_obs, dtype=float))
    curr_obs = np.atleast_2d(np.asarray(curr_obs, dtype=float))
    if prev_obs.shape != curr_obs.shape:
        raise ValueError(f"observation shapes differ: {prev_obs.shape} vs {curr_obs.shape}")
    landmarks, keep = triangulate_many(rig, prev_obs, policy)
    keep &= (curr_obs[:, 0] - curr_obs[:, 2]) >= NEGATIVE_DISPARITY_LIMIT
    landmarks, curr_obs = landmarks[keep], curr_obs[keep]
    n = len(landmarks)
    if n < MIN_MATCHES:
        raise MotionEstimationError(f"{n} usable matches, need at least {MIN_MATCHES}")
    if n < CONFIDENT_MATCHES:
        log.warning("only %d matches; motion estimate is low-confidence", n)

    if ransac:
        rng = np.random.default_rng(seed)
        best_in = None
        for _ in range(ransac_iters):
            sample = rng.choice(n, MIN_MATCHES, replace=False)
            try:
                x, _, _ = solve_motion(rig, landmarks[sample], curr_obs[sample], max_iter=20, tol=1e-8)
            except (MotionEstimationError, np.linalg.LinAlgError):
                continue
            inl = _point_errors(rig, landmarks, curr_obs, x) < ransac_threshold
            if best_in is None or inl.sum() > best_in.sum():
                best_in = inl
        if best_in is None or best_in.sum() < MIN_MATCHES:
            raise MotionEstimationError("RANSAC found no consensus set")
        landmarks, curr_obs = landmarks[best_in], curr_obs[best_in]

    x, rms, iters = solve_motion(rig, landmarks, curr_obs, max_iter=max_iter, tol=tol)
    return FrameMotion(params_to_motion(x), len(landmarks), rms, iters)


def run_vo_detailed(rig: RigConfig, tracks: Tracks, policy: ClampPolicy = ClampPolicy(),
                    frame_stride: int = 3, frame_interval: float | None = None,
                    **motion_opts) -> tuple[Trajectory, list[FrameMotion], np.ndarray]:
    """Chain motions over every ``frame_stride``-th frame.

    Returns the trajectory, the per-key-image motions and the key frame
    indices.
    """
    if frame_stride < 1:
        raise ValueError(f"frame stride must be >= 1, got {frame_stride}")
    dt = tracks.frame_interval if frame_interval is None else frame_interval
    keys = np.arange(0, tracks.n_frames, frame_stride)
    if len(keys) < 2:
        raise ValueError(f"{tracks.n_frames} frames give fewer than 2 key-images at stride {frame_stride}")
    motions = []
    for a, b in zip(keys[:-1], keys[1:]):
        _, oa, ob = tracks.matches(int(a), int(b))
        try:
            motions.append(estimate_motion(rig, oa, ob, policy, **motion_opts))
        except (MotionEstimationError, np.linalg.LinAlgError) as e:
            raise MotionEstimationError(f"frame {b} (from key-image {a}): {e}") from e
    traj = accumulate([m.pose for m in motions], keys * dt)
    return traj, motions, keys


def run_vo(rig: RigConfig, tracks: Tracks, policy: ClampPolicy = ClampPolicy(),
           frame_stride: int = 3, **kwargs) -> Trajectory:
    return run_vo_detailed(rig, tracks, policy, frame_stride, **kwargs)[0]
