"""Radar-to-lidar information propagation and point-cloud fusion.

Each in-scope radar point owns a polar uncertainty ellipse sized by the
resolution and accuracy of the sensor mode covering it. Lidar points
inside the ellipse inherit the radar point's Doppler vector and RCS and
leave the remaining pool (first radar point in input order claims them);
the radar point's intensity becomes the mean lidar intensity of its
claims. Radar points covered by no mode are excluded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (FusedPoint, LidarPoint, OutOfScopeError, Provenance, RadarPoint,
                   SensorSpec)

ACCURACY_WEIGHT = 2.0  # ellipse axes: resolution + this factor times accuracy


@dataclass(frozen=True)
class PolarPoint6:
    """Six-field point record in polar coordinates (azimuth deg, range m)."""

    alpha: float
    r: float
    intensity: float
    vx: float
    vy: float
    rcs: float

    def __post_init__(self) -> None:
        if self.r < 0:
            raise ValueError(f"range must be >= 0, got {self.r}")


@dataclass(frozen=True)
class UncertaintyEllipse:
    """Polar-coordinate membership region around a radar detection.

    d_alpha and d_r enter the membership test as plain (un-squared)
    denominators, so they act as squared semi-axes.
    """

    center: tuple[float, float]
    d_alpha: float
    d_r: float

    def __post_init__(self) -> None:
        if not (self.d_alpha > 0 and self.d_r > 0):
            raise ValueError("ellipse axes must be positive")


def to_polar(points: np.ndarray, sensor_origin: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Polar projection of six-field rows: columns 0..1 become
    (azimuth deg from boresight, range m); the rest pass through.

    The azimuth is atan2(x - ox, y - oy), zero on the +y axis. Points at
    the sensor origin have no direction and raise ValueError.
    """
    arr = np.atleast_2d(np.asarray(points, dtype=np.float64)).copy()
    dx = arr[:, 0] - sensor_origin[0]
    dy = arr[:, 1] - sensor_origin[1]
    r = np.hypot(dx, dy)
    if (r == 0).any():
        raise ValueError("point coincides with the sensor origin")
    arr[:, 0] = np.degrees(np.arctan2(dx, dy))
    arr[:, 1] = r
    return arr


def to_cartesian(points: np.ndarray, sensor_origin: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Inverse of to_polar; round-trips within 1e-9 m."""
    arr = np.atleast_2d(np.asarray(points, dtype=np.float64)).copy()
    a = np.radians(arr[:, 0])
    r = arr[:, 1]
    arr[:, 0] = r * np.sin(a) + sensor_origin[0]
    arr[:, 1] = r * np.cos(a) + sensor_origin[1]
    return arr


def uncertainty_of(spec: SensorSpec, alpha_deg: float, r_m: float,
                   acc_weight: float = ACCURACY_WEIGHT) -> UncertaintyEllipse:
    """Ellipse parameters for a detection at (alpha, r).

    Among the modes covering the point, the one with the smallest azimuth
    accuracy (the most precise) wins. The azimuth axis is the azimuth
    resolution plus acc_weight times the azimuth accuracy; the range axis
    interpolates the mode's (near, far) range resolution linearly across
    its distance span and adds acc_weight times the range accuracy.
    Raises OutOfScopeError when no mode covers the point.
    """
    covering = [m for m in spec.modes if m.covers(alpha_deg, r_m)]
    if not covering:
        raise OutOfScopeError(f"({alpha_deg:.2f} deg, {r_m:.2f} m) is covered by no sensor mode")
    mode = min(covering, key=lambda m: m.azimuth_acc_deg)
    frac = (r_m - mode.range_min_m) / (mode.range_max_m - mode.range_min_m)
    res_r = mode.range_res_m[0] + frac * (mode.range_res_m[1] - mode.range_res_m[0])
    return UncertaintyEllipse(
        center=(alpha_deg, r_m),
        d_alpha=mode.azimuth_res_deg + acc_weight * mode.azimuth_acc_deg,
        d_r=res_r + acc_weight * mode.range_acc_m,
    )


def ellipse_contains(e: UncertaintyEllipse, alpha_deg: float, r_m: float,
                     scale: float = 1.0) -> bool:
    """Membership test (alpha - ca)^2 / d_alpha + (r - cr)^2 / d_r <= scale^2."""
    da = alpha_deg - e.center[0]
    dr = r_m - e.center[1]
    return da * da / e.d_alpha + dr * dr / e.d_r <= scale * scale


def propagate_fuse(radar: Sequence[RadarPoint], lidar: Sequence[LidarPoint],
                   spec: SensorSpec,
                   placeholders: tuple[float, float, float] = (0.0, 0.0, 0.0),
                   scale: float = 1.0,
                   acc_weight: float = ACCURACY_WEIGHT,
                   sensor_origin: tuple[float, float] = (0.0, 0.0)) -> list[FusedPoint]:
    """Fuse a radar and a lidar cloud recorded in the same sensor frame.

    placeholders = (sigma_cst, vx_cst, vy_cst) fill the fields either
    sensor does not measure. Radar points are processed in input order;
    each in-scope one claims the lidar points still in the pool that fall
    inside its ellipse (claims are permanent, so overlapping ellipses are
    resolved first-come). The result concatenates the in-scope radar rows,
    the enriched lidar rows in claim order, and the untouched lidar rows;
    output coordinates are the original Cartesian inputs, so unclaimed
    rows are preserved bit-exactly.
    """
    sigma_cst, vx_cst, vy_cst = placeholders
    n = len(lidar)
    lidar_xy = np.array([[p.x, p.y] for p in lidar], dtype=np.float64).reshape(n, 2)
    lidar_int = np.array([p.intensity for p in lidar], dtype=np.float64)
    if n:
        lp = to_polar(np.hstack([lidar_xy, np.zeros((n, 4))]), sensor_origin)
        l_alpha, l_r = lp[:, 0], lp[:, 1]
    else:
        l_alpha = l_r = np.zeros(0)

    radar_rows: list[FusedPoint] = []
    enriched: list[FusedPoint] = []
    pool = np.ones(n, dtype=bool)
    for rp in radar:
        pr = to_polar(np.array([[rp.x, rp.y, 0, 0, 0, 0]]), sensor_origin)[0]
        try:
            e = uncertainty_of(spec, pr[0], pr[1], acc_weight)
        except OutOfScopeError:
            continue
        da = l_alpha - pr[0]
        dr = l_r - pr[1]
        inside = pool & (da * da / e.d_alpha + dr * dr / e.d_r <= scale * scale)
        idx = np.nonzero(inside)[0]
        intensity = sigma_cst
        if idx.size:
            intensity = float(np.mean(lidar_int[idx]))
            pool[idx] = False
            for j in idx:
                enriched.append(FusedPoint(
                    x=lidar[j].x, y=lidar[j].y, intensity=lidar[j].intensity,
                    vx=rp.vx, vy=rp.vy, rcs=rp.rcs,
                    provenance=Provenance.LIDAR_ENRICHED))
        radar_rows.append(FusedPoint(
            x=rp.x, y=rp.y, intensity=intensity, vx=rp.vx, vy=rp.vy, rcs=rp.rcs,
            provenance=Provenance.RADAR))

    remaining = [FusedPoint(x=lidar[j].x, y=lidar[j].y, intensity=lidar[j].intensity,
                            vx=vx_cst, vy=vy_cst, rcs=sigma_cst,
                            provenance=Provenance.LIDAR_PLAIN)
                 for j in range(n) if pool[j]]
    return radar_rows + enriched + remaining
