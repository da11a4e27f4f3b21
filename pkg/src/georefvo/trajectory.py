"""SE(3) pose algebra and sampled trajectories.

Frame conventions (used by every module in the package):

* camera frame: x right, y down, z forward (optical axis);
* a motion ``[R|t]`` is the pose of key-image k+1 expressed in key-image k,
  i.e. camera-to-world when chained from the 0th key-image, so forward
  motion makes positions grow along +z;
* yaw is a right-handed rotation about +y: ``rot_y(90) @ (0, 0, 1) == (1, 0, 0)``,
  which with y pointing down is a turn to the right.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

ORTHO_TOL = 1e-9          # re-orthonormalize above this defect
INPUT_ORTHO_TOL = 1e-6    # reject user-supplied rotations above this defect
DEGENERACY_FLOOR = 0.05   # m, minimum increment norm for a rotation angle
GPS_INTERVAL = 1.0        # s


class DegenerateIncrementError(ValueError):
    """An incremental displacement is too short to define a direction."""


def rotvec_to_matrix(w) -> np.ndarray:
    """Rodrigues formula; exact identity at w == 0."""
    x, y, z = (float(v) for v in w)
    theta2 = x * x + y * y + z * z
    if theta2 < 1e-16:
        a, b = 1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0
    else:
        theta = math.sqrt(theta2)
        a, b = math.sin(theta) / theta, (1.0 - math.cos(theta)) / theta2
    # R = I + a K + b K^2, K = [w]x
    return np.array([
        [1.0 - b * (y * y + z * z), b * x * y - a * z, b * x * z + a * y],
        [b * x * y + a * z, 1.0 - b * (x * x + z * z), b * y * z - a * x],
        [b * x * z - a * y, b * y * z + a * x, 1.0 - b * (x * x + y * y)],
    ])


def matrix_to_rotvec(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    cos_t = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = math.acos(cos_t)
    if theta < 1e-8:
        return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    if math.pi - theta < 1e-6:
        # near pi the antisymmetric part vanishes; read the axis off R + I
        M = (R + np.eye(3)) / 2.0
        k = int(np.argmax(np.diag(M)))
        axis = M[:, k] / math.sqrt(M[k, k])
        return axis / np.linalg.norm(axis) * theta
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return w * theta / (2.0 * math.sin(theta))


def rot_x(deg: float) -> np.ndarray:
    return rotvec_to_matrix([math.radians(deg), 0.0, 0.0])


def rot_y(deg: float) -> np.ndarray:
    return rotvec_to_matrix([0.0, math.radians(deg), 0.0])


def rot_z(deg: float) -> np.ndarray:
    return rotvec_to_matrix([0.0, 0.0, math.radians(deg)])


def rotation_angle_deg(R) -> float:
    """Geodesic angle of a rotation matrix, in degrees."""
    return math.degrees(float(np.linalg.norm(matrix_to_rotvec(R))))


def orthonormality_defect(R) -> float:
    R = np.asarray(R, dtype=float)
    return max(float(np.abs(R.T @ R - np.eye(3)).max()), abs(float(np.linalg.det(R)) - 1.0))


def nearest_rotation(R) -> np.ndarray:
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


@dataclass(frozen=True)
class Pose:
    """Rigid transform ``x -> R @ x + t``."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.array(self.R, dtype=float).reshape(3, 3)
        t = np.array(self.t, dtype=float).reshape(3)
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def from_rotvec(cls, w, t=(0.0, 0.0, 0.0)) -> "Pose":
        return cls(rotvec_to_matrix(w), t)

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.t
        return T

    def inverse(self) -> "Pose":
        return Pose(self.R.T, -self.R.T @ self.t)

    def compose(self, other: "Pose") -> "Pose":
        R = self.R @ other.R
        if orthonormality_defect(R) > ORTHO_TOL:
            R = nearest_rotation(R)
        return Pose(R, self.R @ other.t + self.t)

    __matmul__ = compose

    def apply(self, points) -> np.ndarray:
        """Transform a (3,) point or an (N, 3) array of points."""
        return np.asarray(points, dtype=float) @ self.R.T + self.t

    def rotvec(self) -> np.ndarray:
        return matrix_to_rotvec(self.R)


class TimedPoint(NamedTuple):
    t: float
    p: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Positions sampled at strictly increasing times."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        positions = np.array(self.positions, dtype=float).reshape(-1, 3)
        if len(times) < 1:
            raise ValueError("trajectory needs at least one sample")
        if len(times) != len(positions):
            raise ValueError(f"{len(times)} times for {len(positions)} positions")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(positions))):
            raise ValueError("trajectory contains non-finite values")
        bad = np.nonzero(np.diff(times) <= 0)[0]
        if len(bad):
            i = int(bad[0]) + 1
            raise ValueError(f"times not strictly increasing at sample {i} "
                             f"({times[i - 1]!r} -> {times[i]!r})")
        times.flags.writeable = False
        positions.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)

    @classmethod
    def from_points(cls, points: Sequence[TimedPoint]) -> "Trajectory":
        return cls([p.t for p in points], [p.p for p in points])

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self) -> Iterator[TimedPoint]:
        for t, p in zip(self.times, self.positions):
            yield TimedPoint(float(t), p)

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def covers(self, t) -> np.ndarray | bool:
        t = np.asarray(t, dtype=float)
        return (t >= self.times[0]) & (t <= self.times[-1])


def accumulate(motions: Sequence[Pose], timestamps: Sequence[float]) -> Trajectory:
    """Chain per-key-image motions from the identity origin.

    Position k is the translation of ``motions[0] @ ... @ motions[k-1]``.
    """
    if len(timestamps) != len(motions) + 1:
        raise ValueError(f"need {len(motions) + 1} timestamps for {len(motions)} motions, "
                         f"got {len(timestamps)}")
    pose = Pose.identity()
    positions = [pose.t]
    for i, m in enumerate(motions):
        defect = orthonormality_defect(m.R)
        if defect > INPUT_ORTHO_TOL:
            raise ValueError(f"motion {i} is not a rotation (orthonormality defect {defect:.3g})")
        pose = pose @ m
        positions.append(pose.t)
    return Trajectory(timestamps, positions)


def _check_range(traj: Trajectory, t: np.ndarray) -> None:
    outside = ~traj.covers(t)
    if np.any(outside):
        bad = np.atleast_1d(t)[np.atleast_1d(outside)][0]
        raise ValueError(f"time {bad!r} outside trajectory range [{traj.start!r}, {traj.end!r}]")


def interpolate_at(traj: Trajectory, t):
    """Linearly interpolated position(s); no extrapolation.

    Accepts a scalar time (returns a 3-vector) or an array of times
    (returns an (N, 3) array).
    """
    tq = np.asarray(t, dtype=float)
    _check_range(traj, tq)
    flat = np.atleast_1d(tq)
    if len(traj) == 1:
        out = np.repeat(traj.positions, len(flat), axis=0)
    else:
        out = np.column_stack([np.interp(flat, traj.times, traj.positions[:, k]) for k in range(3)])
    return out[0] if tq.ndim == 0 else out


def delta_p(traj: Trajectory, t, dt: float = GPS_INTERVAL):
    """Incremental translation ``p(t) - p(t - dt)``."""
    t = np.asarray(t, dtype=float)
    return interpolate_at(traj, t) - interpolate_at(traj, t - dt)


def delta_s(traj: Trajectory, t, dt: float = GPS_INTERVAL):
    """Distance travelled over the interval ending at ``t``."""
    d = delta_p(traj, t, dt)
    return np.linalg.norm(d, axis=-1) if np.ndim(d) > 1 else float(np.linalg.norm(d))


def angle_between_deg(a, b) -> np.ndarray:
    """Angle between row vectors via clamped arccos, in degrees."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.sum(a * b, axis=-1) / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))
    return np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))


def delta_phi(traj: Trajectory, t: float, dt: float = GPS_INTERVAL,
              floor: float = DEGENERACY_FLOOR) -> float:
    """Turning angle between the increments ending at ``t`` and ``t + dt``.

    Raises DegenerateIncrementError when either increment is shorter than
    ``floor``; the angle is ill-conditioned at low speed.
    """
    a = delta_p(traj, t, dt)
    b = delta_p(traj, t + dt, dt)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na <= floor or nb <= floor or na == 0.0 or nb == 0.0:
        raise DegenerateIncrementError(
            f"increment norms {na:.4g} m and {nb:.4g} m at t={t} below floor {floor} m")
    return float(angle_between_deg(a, b))


def transformed(traj: Trajectory, pose: Pose) -> Trajectory:
    return Trajectory(traj.times, pose.apply(traj.positions))
