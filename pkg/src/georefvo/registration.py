"""Temporal and spatial registration of a VO trajectory to a GPS track.

Time convention: a GPS time ``t`` corresponds to camera time ``t + t0``.
Shifting the VO trajectory by ``t0`` (``apply_time_offset``) puts it on the
GPS clock, after which ``R @ p + T`` maps it into GPS coordinates.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .trajectory import (DEGENERACY_FLOOR, GPS_INTERVAL, DegenerateIncrementError,
                         Trajectory, angle_between_deg, delta_p, delta_s,
                         interpolate_at, matrix_to_rotvec, rotvec_to_matrix)

log = logging.getLogger(__name__)

OFFSET_WINDOW = (-10.0, 10.0)
COARSE_STEP = 0.1
OFFSET_TOL = 1e-3
MIN_COVERAGE = 0.8
FLAT_OBJECTIVE = 1e-9
ALIGN_INCREMENTS = 4
COLLINEAR_DEG = 1.0
REFINE_CANDIDATES = 5

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class RegistrationError(ValueError):
    pass


@dataclass(frozen=True)
class TimeOffset:
    t0: float
    residual: float
    n_dropped: int = 0


@dataclass(frozen=True)
class Alignment:
    R: np.ndarray
    T: np.ndarray
    residual: float = 0.0

    @classmethod
    def identity(cls) -> "Alignment":
        return cls(np.eye(3), np.zeros(3))

    def rotvec(self) -> np.ndarray:
        return matrix_to_rotvec(self.R)


def evaluation_times(gps: Trajectory) -> np.ndarray:
    """GPS sample times used in sums over t = 1 .. T_last - 1.

    Drops the first and last fix, and any fix whose preceding interval
    would leave the track.
    """
    ts = gps.times[1:-1]
    return ts[ts - GPS_INTERVAL >= gps.start]


def _usable(traj: Trajectory, t: np.ndarray) -> np.ndarray:
    return (t - GPS_INTERVAL >= traj.start) & (t <= traj.end)


def displacement_signal(traj: Trajectory, offset: float, gps_times) -> tuple[np.ndarray, np.ndarray]:
    """Distances travelled by ``traj`` over the second ending at each
    ``gps_time + offset``.

    Returns ``(values, used)`` where ``used`` masks the GPS times whose
    interval lies inside the trajectory; the others are dropped.
    """
    t = np.asarray(gps_times, dtype=float) + offset
    used = _usable(traj, t)
    if used.sum() < 2:
        raise RegistrationError(f"only {int(used.sum())} usable samples at offset {offset:+.3f} s")
    return delta_s(traj, t[used]), used


class _OffsetObjective:
    def __init__(self, vo: Trajectory, gps: Trajectory, min_coverage: float):
        self.vo = vo
        self.ts = evaluation_times(gps)
        if len(self.ts) < 2:
            raise RegistrationError("GPS track too short to form increments")
        self.ds_gps = delta_s(gps, self.ts)
        self.min_used = max(2, math.ceil(min_coverage * len(self.ts) - 1e-9))

    def __call__(self, t0: float) -> float:
        t = self.ts + t0
        used = _usable(self.vo, t)
        n = int(used.sum())
        if n < self.min_used:
            return math.inf
        r = delta_s(self.vo, t[used]) - self.ds_gps[used]
        # rescale partial sums so candidates with dropped samples stay comparable
        return float(np.dot(r, r)) * len(self.ts) / n

    def dropped(self, t0: float) -> int:
        return int((~_usable(self.vo, self.ts + t0)).sum())


def offset_objective(vo: Trajectory, gps: Trajectory, t0: float,
                     min_coverage: float = MIN_COVERAGE) -> float:
    """Sum of squared mismatches between VO and GPS travelled distances."""
    return _OffsetObjective(vo, gps, min_coverage)(t0)


def _golden_section(f, a: float, b: float, tol: float) -> tuple[float, float]:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _grid_minima(grid: np.ndarray, values: np.ndarray, k: int) -> list[float]:
    order = np.argsort(grid)
    g, v = grid[order], values[order]
    left = np.concatenate([[np.inf], v[:-1]])
    right = np.concatenate([v[1:], [np.inf]])
    idx = np.nonzero(np.isfinite(v) & (v <= left) & (v <= right))[0]
    idx = idx[np.lexsort((np.abs(g[idx]), v[idx]))][:k]
    return [float(g[j]) for j in idx]


def estimate_time_offset(vo: Trajectory, gps: Trajectory,
                         window: tuple[float, float] = OFFSET_WINDOW,
                         coarse_step: float = COARSE_STEP,
                         tol: float = OFFSET_TOL,
                         min_coverage: float = MIN_COVERAGE) -> TimeOffset:
    """Grid search over ``window`` then golden-section refinement to ``tol``.

    The lowest ``REFINE_CANDIDATES`` local minima of the grid are each
    refined over one grid step on either side; the best wins.
    """
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise RegistrationError(f"empty offset window [{lo}, {hi}]")
    if coarse_step <= 0 or hi - lo < coarse_step:
        raise RegistrationError(f"window [{lo}, {hi}] smaller than coarse step {coarse_step}")
    if gps.end - gps.start < 5.0:
        raise RegistrationError(f"GPS track spans {gps.end - gps.start:.2f} s, need at least 5 s")

    f = _OffsetObjective(vo, gps, min_coverage)
    # integer multiples of the step, so 0 is always a candidate when inside the window
    ks = np.arange(math.ceil(lo / coarse_step - 1e-9), math.floor(hi / coarse_step + 1e-9) + 1)
    grid = ks * coarse_step
    # fixed evaluation order: ties resolve toward smaller |t0|, then toward negative
    grid = grid[np.lexsort((grid, np.abs(grid)))]
    values = np.array([f(t) for t in grid])
    finite = np.isfinite(values)
    if not finite.any():
        raise RegistrationError(
            f"no candidate offset in [{lo}, {hi}] overlaps {min_coverage:.0%} of the GPS samples")
    if values[finite].max() - values[finite].min() < FLAT_OBJECTIVE:
        raise RegistrationError("offset unidentifiable: objective is flat over the window")
    vals = np.where(finite, values, np.inf)
    i = int(np.argmin(vals))
    best_t, best_f = float(grid[i]), float(vals[i])

    # the true valley can be narrower than the grid step: refine the lowest few grid minima
    for t_c in _grid_minima(grid, vals, REFINE_CANDIDATES):
        a, b = max(lo, t_c - coarse_step), min(hi, t_c + coarse_step)
        t_ref, f_ref = _golden_section(f, a, b, tol)
        if f_ref < best_f:
            best_t, best_f = t_ref, f_ref
    n_dropped = f.dropped(best_t)
    if n_dropped:
        log.info("time offset %+.3f s: %d GPS samples outside the VO range", best_t, n_dropped)
    return TimeOffset(best_t, best_f, n_dropped)


def apply_time_offset(vo: Trajectory, t0: float) -> Trajectory:
    """Relabel VO samples onto the GPS clock: sample at camera time tc moves to tc - t0."""
    return Trajectory(vo.times - t0, vo.positions)


def estimate_translation(gps: Trajectory, vo: Trajectory, t_ref: float | None = None,
                         R=None) -> np.ndarray:
    """``p_gps(t_ref) - R @ p_vo(t_ref)`` with ``t_ref`` defaulting to the first GPS fix.

    ``vo`` must already be on the GPS clock. With ``R`` omitted this is the
    plain difference of positions.
    """
    if t_ref is None:
        t_ref = gps.start
    for name, traj in (("GPS", gps), ("VO", vo)):
        if not traj.covers(t_ref):
            raise RegistrationError(f"reference time {t_ref} outside the {name} range "
                                    f"[{traj.start}, {traj.end}]")
    p_vo = interpolate_at(vo, t_ref)
    if R is not None:
        p_vo = np.asarray(R) @ p_vo
    return interpolate_at(gps, t_ref) - p_vo


# spread over SO(3): cube-corner axes at a quarter turn
_ROTATION_STARTS = [np.array(s) * (math.pi / 2) / math.sqrt(3.0)
                    for s in ((1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1),
                              (-1, 1, 1), (-1, 1, -1), (-1, -1, 1), (-1, -1, -1))]


def alignment_increments(gps: Trajectory, vo: Trajectory, n: int = ALIGN_INCREMENTS):
    """First ``n`` one-second increments available in both streams."""
    ts = gps.times[1:]
    ok = _usable(gps, ts) & _usable(vo, ts)
    ts = ts[ok][:n]
    if len(ts) < 2:
        raise RegistrationError(f"need at least 2 common increments for rotation, found {len(ts)}")
    if len(ts) < n:
        log.warning("only %d of %d requested alignment increments available", len(ts), n)
    return ts, delta_p(vo, ts), delta_p(gps, ts)


def rotation_objective(w, d_vo: np.ndarray, d_gps: np.ndarray) -> float:
    """Sum of squared angles (deg^2) between rotated VO and GPS increments."""
    R = rotvec_to_matrix(w)
    return float(np.sum(angle_between_deg(d_vo @ R.T, d_gps) ** 2))


def _unit_objective(w, u_vo: np.ndarray, u_gps: np.ndarray) -> float:
    # rotation_objective on pre-normalized rows, for the optimizer loop
    c = np.einsum("ij,ij->i", u_vo @ rotvec_to_matrix(w).T, u_gps)
    a = np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))
    return float(a @ a)


def _max_spread_deg(d: np.ndarray) -> float:
    u = d / np.linalg.norm(d, axis=1, keepdims=True)
    c = np.abs(np.clip(u @ u.T, -1.0, 1.0))
    return float(np.degrees(np.arccos(c.min())))


def estimate_rotation(gps: Trajectory, vo: Trajectory, n: int = ALIGN_INCREMENTS,
                      floor: float = DEGENERACY_FLOOR) -> Alignment:
    """Rotation taking VO increment directions onto GPS increment directions.

    Axis-angle parameters, Nelder-Mead from eight spread starts, then one
    restart from the best; the identity wins ties. ``vo`` must already be on
    the GPS clock.
    """
    if n < 2:
        raise RegistrationError(f"need N >= 2 increments, got {n}")
    ts, d_vo, d_gps = alignment_increments(gps, vo, n)
    for name, d in (("VO", d_vo), ("GPS", d_gps)):
        norms = np.linalg.norm(d, axis=1)
        if norms.min() <= floor:
            k = int(np.argmin(norms))
            raise DegenerateIncrementError(
                f"{name} increment at t={ts[k]} has norm {norms[k]:.4g} m (floor {floor} m)")
        if _max_spread_deg(d) < COLLINEAR_DEG:
            raise RegistrationError("rotation underdetermined about motion axis: "
                                    f"{name} increments collinear within {COLLINEAR_DEG} deg")

    args = (d_vo / np.linalg.norm(d_vo, axis=1, keepdims=True),
            d_gps / np.linalg.norm(d_gps, axis=1, keepdims=True))
    coarse = {"xatol": 1e-4, "fatol": 1e-8, "maxiter": 600}
    fine = {"xatol": 1e-11, "fatol": 1e-15, "maxiter": 4000, "initial_simplex": None}
    best = None
    for w0 in _ROTATION_STARTS:
        res = minimize(_unit_objective, w0, args=args, method="Nelder-Mead", options=coarse)
        if best is None or res.fun < best.fun:
            best = res
    # polish the winner with a fresh, small simplex
    x0 = best.x
    fine["initial_simplex"] = np.vstack([x0, x0 + 1e-3 * np.eye(3)])
    res = minimize(_unit_objective, x0, args=args, method="Nelder-Mead", options=fine)
    w = res.x if res.fun <= best.fun else best.x
    # the identity is always a candidate, so already-aligned streams map exactly
    if rotation_objective(np.zeros(3), d_vo, d_gps) <= rotation_objective(w, d_vo, d_gps):
        w = np.zeros(3)
    R = rotvec_to_matrix(w)
    return Alignment(R, np.zeros(3), rotation_objective(w, d_vo, d_gps))


def apply_alignment(vo: Trajectory, align: Alignment) -> Trajectory:
    return Trajectory(vo.times, vo.positions @ np.asarray(align.R).T + np.asarray(align.T))


@dataclass(frozen=True)
class Registration:
    offset: TimeOffset
    alignment: Alignment
    aligned: Trajectory


def register(vo: Trajectory, gps: Trajectory, *, window=OFFSET_WINDOW, coarse_step=COARSE_STEP,
             n: int = ALIGN_INCREMENTS) -> Registration:
    """Offset, then rotation, then translation; returns the VO on the GPS clock and frame.

    Translation is taken at the first GPS fix the shifted VO covers, after
    rotation, so the aligned VO passes through that fix.
    """
    offset = estimate_time_offset(vo, gps, window=window, coarse_step=coarse_step)
    shifted = apply_time_offset(vo, offset.t0)
    align = estimate_rotation(gps, shifted, n=n)
    covered = gps.times[shifted.covers(gps.times)]
    if not len(covered):
        raise RegistrationError("shifted VO trajectory covers no GPS fix")
    T = estimate_translation(gps, shifted, t_ref=float(covered[0]), R=align.R)
    align = replace(align, T=T)
    return Registration(offset, align, apply_alignment(shifted, align))
