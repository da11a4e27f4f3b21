"""SVG comparison plots: trajectory overlay, travelled distance with scale
error, and turning angle."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import increment_series  # noqa: E402
from .trajectory import Trajectory  # noqa: E402

# fixed ids and no timestamp so reruns are byte-identical
plt.rcParams["svg.hashsalt"] = "georefvo"


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_trajectories(gps: Trajectory, vo: Trajectory, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(gps.positions[:, 0], gps.positions[:, 1], "o-", ms=3, label="GPS")
    ax.plot(vo.positions[:, 0], vo.positions[:, 1], "-", label="VO")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend()
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_displacements(gps: Trajectory, vo: Trajectory, path) -> None:
    s = increment_series(gps, vo)
    fig, (a, b) = plt.subplots(1, 2, figsize=(11, 4))
    a.plot(s.t, s.ds_gps, "o-", ms=3, label="GPS")
    a.plot(s.t, s.ds_vo, "s-", ms=3, label="VO")
    a.set_xlabel("t [s]")
    a.set_ylabel("travelled distance per second [m]")
    a.legend()
    with np.errstate(divide="ignore", invalid="ignore"):
        b.plot(s.t, s.ds_gps / s.ds_vo, "o-", ms=3)
    b.axhline(1.0, color="0.6", lw=0.8)
    b.set_xlabel("t [s]")
    b.set_ylabel("scale error GPS / VO")
    _save(fig, path)


def plot_rotations(gps: Trajectory, vo: Trajectory, path) -> None:
    s = increment_series(gps, vo)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(s.t, s.dphi_gps, "o-", ms=3, label="GPS")
    ax.plot(s.t, s.dphi_vo, "s-", ms=3, label="VO")
    if s.degenerate.any():
        ax.plot(s.t[s.degenerate], s.dphi_gps[s.degenerate], "x", color="k", label="low speed")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("turning angle [deg]")
    ax.legend()
    _save(fig, path)


def plot_all(gps: Trajectory, vo: Trajectory, out_dir, prefix: str = "") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / f"{prefix}trajectory.svg", out_dir / f"{prefix}displacement.svg",
             out_dir / f"{prefix}rotation.svg"]
    plot_trajectories(gps, vo, paths[0])
    plot_displacements(gps, vo, paths[1])
    plot_rotations(gps, vo, paths[2])
    return paths
