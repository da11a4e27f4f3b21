"""Incremental accuracy scores of an aligned VO trajectory against GPS."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .registration import evaluation_times
from .trajectory import DEGENERACY_FLOOR, GPS_INTERVAL, Trajectory, angle_between_deg, delta_p

# Table row order
METRIC_NAMES = ("MSE_trans", "MAE_trans", "MSE_rot", "MAE_rot")
METRIC_UNITS = ("m^2", "m", "deg^2", "deg")


@dataclass(frozen=True)
class MetricReport:
    mse_trans: float
    mae_trans: float
    mse_rot: float
    mae_rot: float
    n_samples: int
    n_degenerate_rot: int = 0

    def values(self) -> tuple[float, float, float, float]:
        return (self.mse_trans, self.mae_trans, self.mse_rot, self.mae_rot)


def _mse_mae(a, b) -> tuple[float, float]:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise ValueError("empty sequences")
    e = a - b
    return float(np.mean(e * e)), float(np.mean(np.abs(e)))


def mse_mae_trans(ds_vo, ds_gps) -> tuple[float, float]:
    """Mean squared (m^2) and mean absolute (m) travelled-distance errors."""
    return _mse_mae(ds_vo, ds_gps)


def mse_mae_rot(dphi_vo, dphi_gps) -> tuple[float, float]:
    """Mean squared (deg^2) and mean absolute (deg) turning-angle errors."""
    return _mse_mae(dphi_vo, dphi_gps)


@dataclass(frozen=True)
class IncrementSeries:
    """Per-GPS-time increments of both streams, for reports and plots."""

    t: np.ndarray
    ds_vo: np.ndarray
    ds_gps: np.ndarray
    dphi_vo: np.ndarray        # nan where an increment is exactly zero
    dphi_gps: np.ndarray
    degenerate: np.ndarray     # either stream has an increment below the floor


def increment_series(gps: Trajectory, vo_aligned: Trajectory,
                     floor: float = DEGENERACY_FLOOR) -> IncrementSeries:
    ts = evaluation_times(gps)
    ts = ts[vo_aligned.covers(ts - GPS_INTERVAL) & vo_aligned.covers(ts + GPS_INTERVAL)
            & (ts + GPS_INTERVAL <= gps.end)]
    if len(ts) < 2:
        raise ValueError(f"only {len(ts)} usable GPS samples; need at least 2")
    out = {}
    low = np.zeros(len(ts), dtype=bool)
    for name, traj in (("vo", vo_aligned), ("gps", gps)):
        a = delta_p(traj, ts)
        b = delta_p(traj, ts + GPS_INTERVAL)
        na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            phi = angle_between_deg(a, b)
        phi[(na == 0.0) | (nb == 0.0)] = np.nan
        out["ds_" + name] = na
        out["dphi_" + name] = phi
        low |= (na <= floor) | (nb <= floor)
    return IncrementSeries(ts, out["ds_vo"], out["ds_gps"], out["dphi_vo"], out["dphi_gps"], low)


def evaluate(gps: Trajectory, vo_aligned: Trajectory, floor: float = DEGENERACY_FLOOR,
             strict: bool = False) -> MetricReport:
    """All four scores at GPS times t = 1 .. T_last - 1.

    The filtered variant (default) excludes rotation samples where either
    stream moved less than ``floor`` over one of the two intervals. With
    ``strict=True`` every sample is kept except those with an exactly zero
    increment, whose angle is undefined.
    """
    s = increment_series(gps, vo_aligned, floor)
    mse_t, mae_t = mse_mae_trans(s.ds_vo, s.ds_gps)
    undefined = np.isnan(s.dphi_vo) | np.isnan(s.dphi_gps)
    skip = undefined if strict else (s.degenerate | undefined)
    if skip.all():
        mse_r = mae_r = float("nan")
    else:
        mse_r, mae_r = mse_mae_rot(s.dphi_vo[~skip], s.dphi_gps[~skip])
    return MetricReport(mse_t, mae_t, mse_r, mae_r, len(s.t), int(skip.sum()))
