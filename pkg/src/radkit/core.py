"""Shared domain types: axis geometry, tensor/view containers, point records.

All containers are immutable after construction (arrays are marked
read-only), so instances can be shared freely across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

AXIS_NAMES = ("range", "angle", "doppler")
VIEW_KINDS = ("RD", "RA", "AD")


class ToolkitError(Exception):
    """Base class for domain errors raised by this package."""


class FormatError(ToolkitError):
    """Malformed file or serialized payload."""


class OutOfScopeError(ToolkitError):
    """Point not covered by any sensor mode."""


def _f32(x: float) -> float:
    # Quantize to float32 precision so 9-significant-digit text round-trips
    # bit-exactly (see the CSV writers).
    return float(np.float32(x))


@dataclass(frozen=True)
class AxisSpec:
    """Uniformly sampled physical axis: value of bin k is origin + k*step."""

    name: str
    bins: int
    origin: float
    step: float

    def __post_init__(self) -> None:
        if self.name not in AXIS_NAMES:
            raise ValueError(f"axis name must be one of {AXIS_NAMES}, got {self.name!r}")
        if self.bins < 1:
            raise ValueError(f"axis needs at least one bin, got {self.bins}")
        if not (self.step > 0):
            raise ValueError(f"axis step must be positive, got {self.step}")

    @property
    def values(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.bins)

    @property
    def span(self) -> float:
        """Full physical extent covered by the axis (bins * step)."""
        return self.bins * self.step


def axis_value(axis: AxisSpec, bin: int) -> float:
    """Physical value of a bin center.

    Raises IndexError for bins outside [0, axis.bins).
    """
    if not 0 <= bin < axis.bins:
        raise IndexError(f"bin {bin} outside [0, {axis.bins})")
    return axis.origin + bin * axis.step


def bin_of(axis: AxisSpec, value: float) -> int:
    """Nearest bin of a physical value, clamped to [0, axis.bins).

    Accepts values in [origin, origin + bins*step], i.e. the full physical
    span of the axis; the top half-step rounds up past the last bin center
    and is clamped back. Values outside the span raise ValueError.
    """
    lo = axis.origin
    hi = axis.origin + axis.bins * axis.step
    if not lo <= value <= hi:
        raise ValueError(f"value {value} outside axis span [{lo}, {hi}]")
    k = int(math.floor((value - lo) / axis.step + 0.5))
    return min(max(k, 0), axis.bins - 1)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RadTensor:
    """Complex range x angle x Doppler cube with per-axis metadata.

    Data is held as little-endian complex64 (interleaved float32 re/im
    pairs), the exchange format, so serialization is bit-exact.
    """

    axes: tuple[AxisSpec, AxisSpec, AxisSpec]
    data: np.ndarray

    def __post_init__(self) -> None:
        names = tuple(a.name for a in self.axes)
        if names != AXIS_NAMES:
            raise ValueError(f"tensor axes must be {AXIS_NAMES} in order, got {names}")
        arr = np.ascontiguousarray(self.data, dtype=np.complex64)
        shape = tuple(a.bins for a in self.axes)
        if arr.shape != shape:
            raise ValueError(f"data shape {arr.shape} does not match axis bins {shape}")
        if not np.all(np.isfinite(arr.view(np.float32))):
            raise ValueError("tensor data contains non-finite values")
        object.__setattr__(self, "data", _readonly(arr))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class RadarView:
    """Real 2-axis log-intensity map (dB), one of the RD / RA / AD views."""

    kind: str
    axes: tuple[AxisSpec, AxisSpec]
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.kind not in VIEW_KINDS:
            raise ValueError(f"view kind must be one of {VIEW_KINDS}, got {self.kind!r}")
        expected = {"RD": ("range", "doppler"), "RA": ("range", "angle"), "AD": ("angle", "doppler")}
        names = tuple(a.name for a in self.axes)
        if names != expected[self.kind]:
            raise ValueError(f"{self.kind} view requires axes {expected[self.kind]}, got {names}")
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        shape = tuple(a.bins for a in self.axes)
        if arr.shape != shape:
            raise ValueError(f"data shape {arr.shape} does not match axis bins {shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("view data contains non-finite values")
        object.__setattr__(self, "data", _readonly(arr))


@dataclass(frozen=True)
class RadarPoint:
    """Radar detection: position, ego-compensated Doppler vector, RCS (dBsm)."""

    x: float
    y: float
    vx: float
    vy: float
    rcs: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "vx", "vy", "rcs"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"RadarPoint.{name} must be finite, got {v}")
            object.__setattr__(self, name, _f32(v))


@dataclass(frozen=True)
class LidarPoint:
    """Lidar return: position plus optical reflectance (>= 0)."""

    x: float
    y: float
    intensity: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "intensity"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"LidarPoint.{name} must be finite, got {v}")
            object.__setattr__(self, name, _f32(v))
        if self.intensity < 0:
            raise ValueError(f"lidar intensity must be >= 0, got {self.intensity}")


class Provenance(Enum):
    RADAR = "Radar"
    LIDAR_ENRICHED = "LidarEnriched"
    LIDAR_PLAIN = "LidarPlain"


@dataclass(frozen=True)
class FusedPoint:
    """Row of a fused radar+lidar cloud; provenance tells which fields are native."""

    x: float
    y: float
    intensity: float
    vx: float
    vy: float
    rcs: float
    provenance: Provenance

    def __post_init__(self) -> None:
        for name in ("x", "y", "intensity", "vx", "vy", "rcs"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"FusedPoint.{name} must be finite, got {v}")
            object.__setattr__(self, name, _f32(v))
        if not isinstance(self.provenance, Provenance):
            object.__setattr__(self, "provenance", Provenance(self.provenance))


@dataclass(frozen=True)
class SensorMode:
    """One radar transmission mode: field of view and measurement precision.

    range_res_m is a (near, far) pair: the range resolution ramps linearly
    from the first value at range_min_m to the second at range_max_m.
    """

    name: str
    azimuth_fov_deg: float
    azimuth_res_deg: float
    azimuth_acc_deg: float
    range_min_m: float
    range_max_m: float
    range_res_m: tuple[float, float]
    range_acc_m: float

    def __post_init__(self) -> None:
        if not self.range_min_m < self.range_max_m:
            raise ValueError(f"mode {self.name!r}: range_min must be < range_max")
        for nm, v in (
            ("azimuth_fov_deg", self.azimuth_fov_deg),
            ("azimuth_res_deg", self.azimuth_res_deg),
            ("azimuth_acc_deg", self.azimuth_acc_deg),
            ("range_acc_m", self.range_acc_m),
        ):
            if not v > 0:
                raise ValueError(f"mode {self.name!r}: {nm} must be positive, got {v}")
        if len(self.range_res_m) != 2 or any(r < 0 for r in self.range_res_m):
            raise ValueError(f"mode {self.name!r}: range_res_m must be a non-negative (near, far) pair")

    def covers(self, alpha_deg: float, r_m: float) -> bool:
        return abs(alpha_deg) <= self.azimuth_fov_deg and self.range_min_m <= r_m <= self.range_max_m


@dataclass(frozen=True)
class SensorSpec:
    """Collection of sensor modes; coverage regions may overlap."""

    modes: tuple[SensorMode, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise ValueError("sensor spec needs at least one mode")


def nuscenes_sensor_spec() -> SensorSpec:
    """Spec of the automotive radar used by the nuScenes vehicles.

    One far-range mode and two near-range modes with 45 and 60 degree
    half-FoV; range resolution ramps linearly across the covered span.
    """
    return SensorSpec(modes=(
        SensorMode("far", 9.0, 1.6, 0.1, 0.2, 250.0, (0.0, 1.79), 0.40),
        SensorMode("near45", 45.0, 4.5, 1.0, 0.2, 100.0, (0.0, 0.39), 0.10),
        SensorMode("near60", 60.0, 12.3, 5.0, 0.2, 20.0, (0.0, 0.39), 0.10),
    ))


def check_seg_mask(mask: np.ndarray, num_classes: int) -> np.ndarray:
    """Validate a 2D integer class mask with labels in [0, num_classes)."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"segmentation mask must be 2D, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValueError("segmentation mask must hold integer labels")
        arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes})")
    return arr


def check_soft_mask(p: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Validate an (H, W, K) probability stack summing to 1 over classes."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"soft mask must be 3D (H, W, K), got shape {arr.shape}")
    if arr.min() < -tol or arr.max() > 1 + tol:
        raise ValueError("soft mask values must lie in [0, 1]")
    sums = arr.sum(axis=2)
    if not np.allclose(sums, 1.0, atol=tol):
        worst = float(np.abs(sums - 1.0).max())
        raise ValueError(f"soft mask must sum to 1 over classes (max deviation {worst:.2e})")
    return arr


def points_to_array(points: Sequence, fields: Sequence[str]) -> np.ndarray:
    """Stack dataclass point records into an (n, len(fields)) float array."""
    if not points:
        return np.zeros((0, len(fields)))
    return np.array([[getattr(p, f) for f in fields] for p in points], dtype=np.float64)
