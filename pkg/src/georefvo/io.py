"""Readers and writers for the CSV and text formats used by the CLI."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .geo import GpsFix
from .metrics import MetricReport
from .registration import Registration
from .stereosim import Tracks
from .trajectory import Pose, Trajectory

TRAJECTORY_HEADER = ["t", "x", "y", "z"]
TRACK_HEADER = ["feature_id", "frame", "uL", "vL", "uR"]
DIAGNOSTICS_HEADER = ["frame", "inliers", "rms_reproj", "iters"]
REGISTRATION_HEADER = ["t0_s", "residual_m2", "axis_angle_x", "axis_angle_y", "axis_angle_z",
                       "T_x", "T_y", "T_z", "residual_deg2", "n_dropped_samples"]
REPORT_HEADER = ["variant", "MSE_trans_m2", "MAE_trans_m", "MSE_rot_deg2", "MAE_rot_deg",
                 "n_samples", "n_degenerate_rot"]


class InputError(ValueError):
    """Malformed input file; the message names the file and line."""


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = None
        for row in reader:
            if not row or row[0].lstrip().startswith("#"):
                continue
            row = [c.strip() for c in row]
            if header is None:
                header = row
                continue
            yield reader.line_num, header, row


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if not isinstance(v, str) else v for v in r])


def _floats(path, line, row, n):
    try:
        vals = [float(v) for v in row[:n]]
    except ValueError as e:
        raise InputError(f"{path}:{line}: {e}") from None
    if not all(math.isfinite(v) for v in vals):
        raise InputError(f"{path}:{line}: non-finite value")
    return vals


def read_gps_csv(path) -> list[GpsFix]:
    fixes = []
    prev_t = None
    for line, header, row in _rows(path):
        if header[:3] != ["t", "lat", "lon"]:
            raise InputError(f"{path}: header must start with t,lat,lon, got {','.join(header)}")
        has_alt = len(header) > 3 and header[3] == "alt"
        vals = _floats(path, line, row, 4 if has_alt else 3)
        if prev_t is not None and not vals[0] > prev_t:
            raise InputError(f"{path}:{line}: time {vals[0]} does not increase (previous {prev_t})")
        prev_t = vals[0]
        try:
            fixes.append(GpsFix(*vals))
        except ValueError as e:
            raise InputError(f"{path}:{line}: {e}") from None
    if not fixes:
        raise InputError(f"{path}: no GPS fixes")
    return fixes


def write_gps_csv(path, fixes) -> None:
    _write(path, ["t", "lat", "lon", "alt"], [(f.t, f.lat, f.lon, f.alt) for f in fixes])


def read_trajectory_csv(path) -> Trajectory:
    times, pos = [], []
    for line, header, row in _rows(path):
        if header[:4] != TRAJECTORY_HEADER:
            raise InputError(f"{path}: header must be t,x,y,z")
        t, x, y, z = _floats(path, line, row, 4)
        if times and not t > times[-1]:
            raise InputError(f"{path}:{line}: time {t} does not increase")
        times.append(t)
        pos.append((x, y, z))
    if not times:
        raise InputError(f"{path}: empty trajectory")
    return Trajectory(times, pos)


def write_trajectory_csv(path, traj: Trajectory) -> None:
    _write(path, TRAJECTORY_HEADER, [(t, *p) for t, p in zip(traj.times, traj.positions)])


def read_poses(path) -> list[Pose]:
    """One motion per line: 12 numbers, row-major 3x4 [R|t]."""
    poses = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 12:
                raise InputError(f"{path}:{i}: expected 12 numbers, got {len(parts)}")
            M = np.array(_floats(path, i, parts, 12)).reshape(3, 4)
            poses.append(Pose(M[:, :3], M[:, 3]))
    return poses


def write_poses(path, poses) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in poses:
            M = np.hstack([p.R, p.t[:, None]])
            fh.write(" ".join(_fmt(v) for v in M.reshape(-1)) + "\n")


def read_tracks_csv(path, frame_interval: float = 0.04) -> Tracks:
    ids, frames, obs = [], [], []
    for line, header, row in _rows(path):
        if header[:5] != TRACK_HEADER:
            raise InputError(f"{path}: header must be {','.join(TRACK_HEADER)}")
        try:
            ids.append(int(row[0]))
            frames.append(int(row[1]))
        except ValueError as e:
            raise InputError(f"{path}:{line}: {e}") from None
        obs.append(_floats(path, line, row[2:], 3))
    if not ids:
        raise InputError(f"{path}: no observations")
    return Tracks(ids, frames, np.array(obs), 0, frame_interval)


def write_tracks_csv(path, tracks: Tracks) -> None:
    order = np.lexsort((tracks.frames, tracks.ids))
    _write(path, TRACK_HEADER, [(tracks.ids[j], tracks.frames[j], *tracks.obs[j]) for j in order])


def write_diagnostics_csv(path, keys, motions) -> None:
    _write(path, DIAGNOSTICS_HEADER,
           [(int(k), m.inliers, m.rms_reproj, m.iterations) for k, m in zip(keys[1:], motions)])


def write_registration_csv(path, reg: Registration) -> None:
    w = reg.alignment.rotvec()
    T = reg.alignment.T
    _write(path, REGISTRATION_HEADER, [(reg.offset.t0, reg.offset.residual, *w, *T,
                                        reg.alignment.residual, reg.offset.n_dropped)])


def read_registration_csv(path) -> dict[str, float]:
    for line, header, row in _rows(path):
        return dict(zip(header, _floats(path, line, row, len(header))))
    raise InputError(f"{path}: empty registration report")


def write_report_csv(path, reports: dict[str, MetricReport]) -> None:
    _write(path, REPORT_HEADER, [(name, *r.values(), r.n_samples, r.n_degenerate_rot)
                                 for name, r in reports.items()])


def read_report_csv(path) -> dict[str, dict[str, float]]:
    out = {}
    for line, header, row in _rows(path):
        out[row[0]] = dict(zip(header[1:], _floats(path, line, row[1:], len(header) - 1)))
    return out


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    cfg = {}
    for i, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{i}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg
