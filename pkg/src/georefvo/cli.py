"""Command-line entry point: ``georefvo <command> [options]``.

Every numeric option can also be given in a flat ``key = value`` config
file (``--config``); flags on the command line win.

Exit codes: 0 success, 2 bad input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .experiments import BASELINES, E2EConfig, run_e2e
from .geo import wgs84_to_local
from .metrics import evaluate
from .registration import RegistrationError, register
from .stereosim import (MotionProfile, NoiseSpec, RigConfig, SceneConfig, generate_cloud,
                        simulate, subpixel_count)
from .trajectory import DegenerateIncrementError, Trajectory, accumulate
from .vocore import ClampPolicy, MotionEstimationError, run_vo_detailed

log = logging.getLogger("georefvo")

EXIT_BAD_INPUT = 2
EXIT_NUMERICAL = 3
CONFIG_HELP = "flat key = value file; keys are the long option names, flags override it"

# name: (type, help); defaults live with each command
PARAMS = {
    "f": (float, "focal length [px]"),
    "cu": (float, "principal point u [px]"),
    "cv": (float, "principal point v [px]"),
    "width": (int, "image width [px]"),
    "height": (int, "image height [px]"),
    "baseline": (float, "stereo baseline B [m]"),
    "n_points": (int, "scene point count"),
    "z_min": (float, "nearest scene depth / arc length [m]"),
    "z_max": (float, "farthest near-scene depth / arc length [m]"),
    "fraction_infinite": (float, "share of far points with sub-pixel disparity"),
    "far_min": (float, "far point depth lower bound [m]"),
    "far_max": (float, "far point depth upper bound [m]"),
    "n_frames": (int, "number of simulated frames"),
    "frame_interval": (float, "time between frames [s] (25 Hz = 0.04)"),
    "speed": (float, "mean rig speed [m/s]"),
    "speed_amplitude": (float, "sinusoidal speed amplitude [m/s]"),
    "speed_period": (float, "speed oscillation period [s]"),
    "yaw_rate": (float, "constant yaw rate about +y [deg/s]"),
    "turn_deg": (float, "total angle of a single road turn [deg]"),
    "turn_at": (float, "time of the turn centre [s]"),
    "turn_width": (float, "turn duration scale (Gaussian sigma) [s]"),
    "sigma": (float, "Gaussian pixel noise per coordinate [px]"),
    "quantize": (float, "round observations to this pixel step, 0 = off"),
    "seed": (int, "random seed"),
    "epsilon": (float, "zero-disparity clamp: disparities below it are raised to it [px]"),
    "clamp_mode": (str, "'clamp' raises small disparities to epsilon, 'drop' discards them"),
    "stride": (int, "use every stride-th frame as a key-image"),
    "window_min": (float, "time offset search lower bound [s]"),
    "window_max": (float, "time offset search upper bound [s]"),
    "coarse_step": (float, "time offset grid step before golden-section refinement [s]"),
    "n_align": (int, "number of one-second increments for the rotation alignment"),
    "injected_offset": (float, "e2e: camera time minus GPS time of the synthetic GPS [s]"),
    "gps_heading": (float, "e2e: heading of the drive in the GPS frame [deg]"),
}

RIG = ("f", "cu", "cv", "width", "height", "baseline")
SCENE = ("n_points", "z_min", "z_max", "fraction_infinite", "far_min", "far_max")
MOTION = ("n_frames", "frame_interval", "speed", "speed_amplitude", "speed_period", "yaw_rate",
          "turn_deg", "turn_at", "turn_width")
NOISE = ("sigma", "quantize", "seed")
VO = ("epsilon", "clamp_mode", "stride", "frame_interval")
REG = ("window_min", "window_max", "coarse_step", "n_align")

_RIG0 = RigConfig()
_SCENE0 = SceneConfig()
DEFAULTS = {
    "f": _RIG0.f, "cu": _RIG0.cu, "cv": _RIG0.cv, "width": _RIG0.width, "height": _RIG0.height,
    "baseline": _RIG0.B, "n_points": _SCENE0.n_points, "z_min": _SCENE0.z_range[0],
    "z_max": _SCENE0.z_range[1], "fraction_infinite": _SCENE0.fraction_infinite,
    "far_min": _SCENE0.far_depth[0], "far_max": _SCENE0.far_depth[1],
    "n_frames": 300, "frame_interval": 0.04, "speed": 10.0, "speed_amplitude": 0.0,
    "speed_period": 7.0, "yaw_rate": 0.0, "turn_deg": 0.0, "turn_at": 3.0, "turn_width": 1.5,
    "sigma": 0.0, "quantize": 0.0, "seed": 0, "epsilon": 1.0, "clamp_mode": "clamp", "stride": 3,
    "window_min": -10.0, "window_max": 10.0, "coarse_step": 0.1, "n_align": 4,
    "injected_offset": 0.6, "gps_heading": 35.0,
}


def _add(p: argparse.ArgumentParser, names) -> None:
    for name in dict.fromkeys(names):
        typ, text = PARAMS[name]
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None,
                       help=f"{text} (default {DEFAULTS[name]})")


def _settings(args, names, defaults=None) -> dict:
    """Resolve options: flag, then config file, then default."""
    cfg = io.read_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(cfg) - set(PARAMS)
    if unknown:
        raise io.InputError(f"{args.config}: unknown keys {', '.join(sorted(unknown))}")
    out = {}
    for name in dict.fromkeys(names):
        typ = PARAMS[name][0]
        val = getattr(args, name, None)
        if val is None and name in cfg:
            try:
                val = typ(cfg[name])
            except ValueError:
                raise io.InputError(f"{args.config}: bad value for {name}: {cfg[name]!r}") from None
        if val is None:
            val = (defaults or DEFAULTS).get(name, DEFAULTS[name])
        out[name] = val
    return out


def _rig(s) -> RigConfig:
    return RigConfig(s["f"], s["cu"], s["cv"], s["width"], s["height"], s["baseline"])


def _scene(s) -> SceneConfig:
    return SceneConfig(n_points=s["n_points"], z_range=(s["z_min"], s["z_max"]),
                       fraction_infinite=s["fraction_infinite"], far_depth=(s["far_min"], s["far_max"]))


def _motion(s) -> MotionProfile:
    return MotionProfile.drive(s["n_frames"], s["frame_interval"], s["speed"],
                               speed_amplitude=s["speed_amplitude"], speed_period=s["speed_period"],
                               yaw_rate=s["yaw_rate"], turn_deg=s["turn_deg"],
                               turn_at=s["turn_at"], turn_width=s["turn_width"])


def _read_gps(path) -> Trajectory:
    """GPS track from either a WGS84 ``t,lat,lon[,alt]`` or a local ``t,x,y,z`` CSV."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().replace(" ", "")
    if header.startswith("t,lat,lon"):
        return wgs84_to_local(io.read_gps_csv(path))
    return io.read_trajectory_csv(path)


def _read_vo(path, pose_interval: float) -> Trajectory:
    """VO track from a ``t,x,y,z`` CSV, a WGS84 CSV, or a motion file of 12 numbers per line."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().replace(" ", "")
    if header.startswith(("t,x,y,z", "t,lat,lon")):
        return _read_gps(path)
    motions = io.read_poses(path)
    return accumulate(motions, pose_interval * np.arange(len(motions) + 1))


def cmd_convert(args) -> int:
    track = wgs84_to_local(io.read_gps_csv(args.gps_csv))
    io.write_trajectory_csv(args.output, track)
    print(f"{len(track)} fixes -> {args.output}")
    return 0


def cmd_simulate(args) -> int:
    s = _settings(args, RIG + SCENE + MOTION + NOISE)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scene = _scene(s)
    motion = _motion(s)
    cloud = generate_cloud(scene, s["seed"], path=motion)
    noise = NoiseSpec(s["sigma"], s["quantize"], s["seed"])
    baselines = BASELINES if args.baseline_sweep else (s["baseline"],)
    meta = []
    for b in baselines:
        rig = replace(_rig(s), B=b)
        tracks, gt = simulate(rig, motion, cloud, noise)
        suffix = f"_B{b:g}" if args.baseline_sweep else ""
        io.write_tracks_csv(out / f"tracks{suffix}.csv", tracks)
        io.write_trajectory_csv(out / f"gt{suffix}.csv", gt)
        n_sub = subpixel_count(rig, cloud)
        meta.append(f"baseline={b:g} tracks={len(tracks)} frames={tracks.n_frames} "
                    f"sub_pixel_disparity_points={n_sub}/{len(cloud)} ({100.0 * n_sub / len(cloud):.1f}%)")
    (out / "simulate_meta.txt").write_text("\n".join(meta) + "\n", encoding="utf-8")
    print("\n".join(meta))
    return 0


def cmd_run_vo(args) -> int:
    s = _settings(args, RIG + VO)
    tracks = io.read_tracks_csv(args.tracks_csv, s["frame_interval"])
    traj, motions, keys = run_vo_detailed(_rig(s), tracks, ClampPolicy(s["epsilon"], s["clamp_mode"]),
                                          s["stride"], ransac=args.ransac, seed=args.seed or 0)
    io.write_trajectory_csv(args.output, traj)
    if args.diagnostics:
        io.write_diagnostics_csv(args.diagnostics, keys, motions)
    print(f"{len(keys)} key-images -> {args.output}")
    return 0


def cmd_register(args) -> int:
    s = _settings(args, REG)
    vo = _read_vo(args.vo_csv, args.pose_interval)
    gps = _read_gps(args.gps_csv)
    reg = register(vo, gps, window=(s["window_min"], s["window_max"]),
                   coarse_step=s["coarse_step"], n=s["n_align"])
    io.write_registration_csv(args.report, reg)
    if args.aligned:
        io.write_trajectory_csv(args.aligned, reg.aligned)
    print(f"t0={reg.offset.t0:+.4f} s residual={reg.offset.residual:.6g} m^2 "
          f"rotation residual={reg.alignment.residual:.6g} deg^2 dropped={reg.offset.n_dropped}")
    return 0


def _reports(gps, vo) -> dict:
    return {"filtered": evaluate(gps, vo), "strict": evaluate(gps, vo, strict=True)}


def cmd_evaluate(args) -> int:
    gps = _read_gps(args.gps_csv)
    vo = io.read_trajectory_csv(args.vo_aligned_csv)
    reports = _reports(gps, vo)
    io.write_report_csv(args.report, reports)
    if args.plots:
        from .plots import plot_all
        plot_all(gps, vo, args.plots)
    for name, r in reports.items():
        print(f"{name}: MSE_trans={r.mse_trans:.3f} m^2 MAE_trans={r.mae_trans:.3f} m "
              f"MSE_rot={r.mse_rot:.3f} deg^2 MAE_rot={r.mae_rot:.3f} deg "
              f"(n={r.n_samples}, skipped rot={r.n_degenerate_rot})")
    return 0


def cmd_e2e(args) -> int:
    base = E2EConfig()
    defaults = dict(DEFAULTS, n_points=base.scene.n_points, z_max=base.scene.z_range[1],
                    fraction_infinite=base.scene.fraction_infinite, n_frames=base.n_frames,
                    speed=base.speed, speed_amplitude=base.speed_amplitude,
                    turn_deg=base.turn_deg, turn_width=base.turn_width, quantize=base.quantize)
    s = _settings(args, RIG + SCENE + MOTION + NOISE + VO + REG
                  + ("injected_offset", "gps_heading"), defaults)
    cfg = E2EConfig(rig=_rig(s), scene=_scene(s), n_frames=s["n_frames"],
                    frame_interval=s["frame_interval"], speed=s["speed"],
                    speed_amplitude=s["speed_amplitude"], speed_period=s["speed_period"],
                    turn_deg=s["turn_deg"], turn_at=s["turn_at"], turn_width=s["turn_width"],
                    sigma=s["sigma"], quantize=s["quantize"], seed=s["seed"], stride=s["stride"],
                    mode=s["clamp_mode"], injected_offset=s["injected_offset"],
                    gps_heading=s["gps_heading"], window=(s["window_min"], s["window_max"]),
                    n_align=s["n_align"])
    if s["yaw_rate"]:
        raise io.InputError("e2e drives use turn_deg; a constant yaw_rate is not supported here")
    res = run_e2e(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_gps_csv(out / "gps.csv", res.gps_fixes)
    io.write_tracks_csv(out / "tracks.csv", res.tracks)
    io.write_trajectory_csv(out / "gt.csv", res.gt)
    for e, run in res.runs.items():
        tag = f"eps{e:g}"
        io.write_trajectory_csv(out / f"vo_{tag}.csv", run["vo"])
        io.write_diagnostics_csv(out / f"vo_{tag}_diagnostics.csv", run["keys"], run["motions"])
        io.write_registration_csv(out / f"registration_{tag}.csv", run["registration"])
        io.write_trajectory_csv(out / f"aligned_{tag}.csv", run["registration"].aligned)
        io.write_report_csv(out / f"report_{tag}.csv", {"filtered": run["filtered"],
                                                        "strict": run["strict"]})
        if args.plots:
            from .plots import plot_all
            plot_all(res.gps, run["registration"].aligned, out, prefix=f"{tag}_")
    rows = res.table()
    (out / "table.csv").write_text("\n".join(",".join(r) for r in rows) + "\n", encoding="utf-8")
    width = max(len(c) for r in rows for c in r) + 2
    for r in rows:
        print("".join(c.ljust(width) for c in r))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="georefvo", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convert", help="WGS84 GPS CSV to a local east-north-up track")
    c.add_argument("gps_csv", help="CSV with header t,lat,lon[,alt]")
    c.add_argument("-o", "--output", required=True, help="output CSV t,x,y,z in meters")
    c.set_defaults(func=cmd_convert)

    c = sub.add_parser("simulate", help="synthetic stereo feature tracks and ground truth")
    c.add_argument("--config", help=CONFIG_HELP)
    c.add_argument("--out-dir", required=True, help="directory for the output files")
    c.add_argument("--baseline-sweep", action="store_true",
                   help="emit one track file per baseline in " + ", ".join(f"{b:g}" for b in BASELINES))
    _add(c, RIG + SCENE + MOTION + NOISE)
    c.set_defaults(func=cmd_simulate)

    c = sub.add_parser("run-vo", help="stereo VO over a track CSV")
    c.add_argument("tracks_csv", help="CSV feature_id,frame,uL,vL,uR")
    c.add_argument("--config", help=CONFIG_HELP)
    c.add_argument("-o", "--output", required=True, help="trajectory CSV t,x,y,z")
    c.add_argument("--diagnostics", help="per key-image CSV frame,inliers,rms_reproj,iters")
    c.add_argument("--ransac", action="store_true", help="3-point RANSAC with a 2 px inlier threshold")
    c.add_argument("--seed", type=int, default=None, help="RANSAC seed")
    _add(c, RIG + VO)
    c.set_defaults(func=cmd_run_vo)

    c = sub.add_parser("register", help="time offset, rotation and translation of VO to GPS")
    c.add_argument("vo_csv", help="VO trajectory CSV t,x,y,z on the camera clock, or a motion "
                   "file with one row-major 3x4 [R|t] per line (key-image k+1 in key-image k)")
    c.add_argument("--pose-interval", type=float, default=0.12,
                   help="seconds between key-images when reading a motion file (default 0.12)")
    c.add_argument("gps_csv", help="GPS CSV, WGS84 (t,lat,lon) or local (t,x,y,z)")
    c.add_argument("--config", help=CONFIG_HELP)
    c.add_argument("--report", required=True, help="registration report CSV")
    c.add_argument("--aligned", help="aligned VO trajectory CSV on the GPS clock and frame")
    _add(c, REG)
    c.set_defaults(func=cmd_register)

    c = sub.add_parser("evaluate", help="travelled-distance and turning-angle errors")
    c.add_argument("gps_csv", help="GPS CSV, WGS84 (t,lat,lon) or local (t,x,y,z)")
    c.add_argument("vo_aligned_csv", help="registered VO trajectory CSV t,x,y,z")
    c.add_argument("--report", required=True, help="metric report CSV")
    c.add_argument("--plots", help="directory for SVG plots")
    c.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("e2e", help="simulate, VO with both clamp values, register, evaluate")
    c.add_argument("--config", help=CONFIG_HELP)
    c.add_argument("--out-dir", required=True, help="directory for the output files")
    c.add_argument("--plots", action="store_true", help="also write SVG plots")
    _add(c, RIG + SCENE + MOTION + NOISE + VO + REG + ("injected_offset", "gps_heading"))
    c.set_defaults(func=cmd_e2e)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MotionEstimationError, RegistrationError, DegenerateIncrementError) as e:
        print(f"georefvo: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as e:
        print(f"georefvo: bad input: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
