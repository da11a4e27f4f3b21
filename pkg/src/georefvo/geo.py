"""WGS84 fixes to a local east-north-up track in meters.

Uses a spherical (equirectangular) model about the anchor fix, which is
accurate to well under 0.1% over the few-kilometre extent of a drive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .trajectory import Trajectory

EARTH_RADIUS = 6371000.0  # m, mean radius


@dataclass(frozen=True)
class GpsFix:
    t: float
    lat: float
    lon: float
    alt: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.t, self.lat, self.lon, self.alt)):
            raise ValueError(f"non-finite value in fix {self}")
        if abs(self.lat) > 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if abs(self.lon) > 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class LocalTrack(Trajectory):
    """GPS track in the anchor's tangent frame (x east, y north, z up)."""

    anchor: GpsFix | None = None


def _check_times(fixes: Sequence[GpsFix]) -> None:
    for i in range(1, len(fixes)):
        if not fixes[i].t > fixes[i - 1].t:
            raise ValueError(f"fix {i} time {fixes[i].t} does not increase "
                             f"(previous {fixes[i - 1].t})")


def wgs84_to_local(fixes: Sequence[GpsFix], anchor: GpsFix | None = None) -> LocalTrack:
    if not fixes:
        raise ValueError("no GPS fixes")
    _check_times(fixes)
    if anchor is None:
        anchor = fixes[0]
    lat = np.array([f.lat for f in fixes])
    lon = np.array([f.lon for f in fixes])
    alt = np.array([f.alt for f in fixes])
    k = EARTH_RADIUS * math.pi / 180.0
    east = k * (lon - anchor.lon) * math.cos(math.radians(anchor.lat))
    north = k * (lat - anchor.lat)
    up = alt - anchor.alt
    return LocalTrack([f.t for f in fixes], np.column_stack([east, north, up]), anchor=anchor)



def local_to_wgs84(track: Trajectory, anchor: GpsFix) -> list[GpsFix]:
    """Inverse of ``wgs84_to_local`` about ``anchor``."""
    k = EARTH_RADIUS * math.pi / 180.0
    p = track.positions
    lat = anchor.lat + p[:, 1] / k
    lon = anchor.lon + p[:, 0] / (k * math.cos(math.radians(anchor.lat)))
    alt = anchor.alt + p[:, 2]
    return [GpsFix(float(t), float(a), float(o), float(h))
            for t, a, o, h in zip(track.times, lat, lon, alt)]
