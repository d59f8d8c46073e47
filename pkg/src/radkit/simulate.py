"""Range-Doppler sequence generator for parameterized moving objects.

A scene is one object of a given category crossing a bounded space in
front of a static radar. Every frame is a 220x100 log-intensity map built
from a Gaussian background (speckle plus reflectivity), Bernoulli false
alarms, zero-Doppler clutter, and the object's edge reflections spread by
a 2-D sinc taper.

Randomness comes from numpy's seeded PCG64 generator. A scene seed is
split with SeedSequence.spawn into one child stream per frame (child 0 is
reserved for scene-level draws such as the object size), so frames are
reproducible and independent of each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import AxisSpec, RadarView, bin_of

RD_RANGE_AXIS = AxisSpec("range", 220, 0.0, 0.25)
RD_DOPPLER_AXIS = AxisSpec("doppler", 100, -5.0, 0.1)


@dataclass(frozen=True)
class ObjectClass:
    """Category of simulated object with its size / speed / intensity ranges."""

    id: int
    name: str
    size_range: tuple[float, float]
    speed_range: tuple[float, float]
    intensity_range: tuple[float, float]

    def __post_init__(self) -> None:
        if not 0 <= self.id <= 3:
            raise ValueError(f"class id must be in [0, 3], got {self.id}")
        for nm in ("size_range", "speed_range", "intensity_range"):
            lo, hi = getattr(self, nm)
            if not lo <= hi:
                raise ValueError(f"{nm} must be ordered, got ({lo}, {hi})")


#: The four default categories (pedestrian, two-wheeler, car, truck/bus).
OBJECT_CLASSES: tuple[ObjectClass, ...] = (
    ObjectClass(0, "pedestrian", (0.1, 0.5), (1.0, 3.0), (50.0, 65.5)),
    ObjectClass(1, "two_wheeler", (0.5, 2.0), (3.0, 11.0), (50.0, 80.0)),
    ObjectClass(2, "car", (2.0, 4.0), (4.0, 14.0), (65.5, 80.0)),
    ObjectClass(3, "truck_bus", (4.0, 10.0), (4.0, 14.0), (65.5, 80.0)),
)


@dataclass(frozen=True)
class NoiseModel:
    """Background and noise statistics of the simulated log-intensity maps.

    The background (reflectivity plus multi-looked speckle after the log
    transform) is approximated by a Gaussian. False alarms fire per cell
    with probability false_alarm_p and add false_alarm_db. Zero-Doppler
    clutter fires on the v=0 column with probability
    max(0, 1 - zero_doppler_decay * range_bin) and adds zero_doppler_db.
    """

    background_mean: float = 35.473
    background_var: float = 0.244
    false_alarm_p: float = 0.01
    zero_doppler_decay: float = 0.005
    looks: int = 1
    false_alarm_db: float = 15.0
    zero_doppler_db: float = 15.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.false_alarm_p <= 1.0:
            raise ValueError("false_alarm_p must be a probability")
        if not self.background_var > 0:
            raise ValueError("background_var must be positive")
        if self.zero_doppler_decay < 0:
            raise ValueError("zero_doppler_decay must be >= 0")
        if self.looks < 1:
            raise ValueError("looks must be >= 1")


def sample_background(nm: NoiseModel, rng: np.random.Generator,
                      range_bin: int = 0, zero_doppler: bool = False) -> float:
    """Draw one background cell value in dB.

    Draw order: Gaussian background, false-alarm uniform, then (only for
    zero-Doppler cells) the clutter uniform.
    """
    v = rng.normal(nm.background_mean, math.sqrt(nm.background_var))
    if rng.random() < nm.false_alarm_p:
        v += nm.false_alarm_db
    if zero_doppler:
        p = max(0.0, 1.0 - nm.zero_doppler_decay * range_bin)
        if rng.random() < p:
            v += nm.zero_doppler_db
    return float(v)


def background_frame(nm: NoiseModel, range_axis: AxisSpec, doppler_axis: AxisSpec,
                     rng: np.random.Generator) -> np.ndarray:
    """Fill a (range, doppler) map with background, false alarms and the
    zero-Doppler column. Draw order: normals, false-alarm uniforms, then
    one clutter uniform per range bin."""
    shape = (range_axis.bins, doppler_axis.bins)
    frame = rng.normal(nm.background_mean, math.sqrt(nm.background_var), size=shape)
    frame += (rng.random(shape) < nm.false_alarm_p) * nm.false_alarm_db
    zd_bin = bin_of(doppler_axis, 0.0)
    p = np.clip(1.0 - nm.zero_doppler_decay * np.arange(range_axis.bins), 0.0, 1.0)
    frame[:, zd_bin] += (rng.random(range_axis.bins) < p) * nm.zero_doppler_db
    return frame


def speckle_samples(looks: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Multi-looked speckle draws: gamma with shape L and scale 1/L, so the
    mean is 1 and the variance 1/L."""
    if looks < 1:
        raise ValueError("looks must be >= 1")
    return rng.gamma(shape=looks, scale=1.0 / looks, size=n)


def multilook_speckle(looks: int, rng: np.random.Generator, n_samples: int) -> tuple[float, float]:
    """Sample mean and unbiased variance of n_samples multi-looked speckle draws."""
    s = speckle_samples(looks, n_samples, rng)
    return float(s.mean()), float(s.var(ddof=1))


@dataclass(frozen=True)
class SimScene:
    """One simulated trajectory: object class, start point, heading, speed.

    heading is the direction of motion in radians within [0, 2 pi); the
    radar sits at radar_pos. Construction fails if the object (taking the
    largest size of its class) could leave the observable range span
    during the sequence.
    """

    seed: int
    object_class: ObjectClass
    start: tuple[float, float]
    heading: float
    speed: float
    frames: int = 20
    dt: float = 0.1
    range_axis: AxisSpec = RD_RANGE_AXIS
    doppler_axis: AxisSpec = RD_DOPPLER_AXIS
    radar_pos: tuple[float, float] = (0.0, 0.0)
    noise: NoiseModel = field(default_factory=NoiseModel)
    sinc_extent: int = 2
    points_per_frame: tuple[int, int] = (3, 8)

    def __post_init__(self) -> None:
        if self.frames < 1 or self.dt <= 0 or self.speed < 0:
            raise ValueError("frames must be >= 1, dt > 0, speed >= 0")
        if not 0.0 <= self.heading < 2.0 * math.pi:
            raise ValueError(f"heading must lie in [0, 2*pi), got {self.heading}")
        if self.sinc_extent < 0:
            raise ValueError("sinc_extent must be >= 0")
        lo, hi = self.points_per_frame
        if not 1 <= lo <= hi:
            raise ValueError("points_per_frame must be an ordered pair of ints >= 1")
        half_diag = self.object_class.size_range[1] * math.sqrt(2.0) / 2.0
        r_max = self.range_axis.origin + self.range_axis.span
        for t in range(self.frames):
            c = self._center(t)
            r = math.hypot(c[0] - self.radar_pos[0], c[1] - self.radar_pos[1])
            if r + half_diag > r_max:
                raise ValueError(
                    f"object leaves the {r_max} m range span at frame {t} (r = {r:.2f})")
            if r - half_diag < 0.5:
                raise ValueError(f"object overlaps the radar position at frame {t}")

    def _center(self, t: int) -> tuple[float, float]:
        d = self.speed * self.dt * t
        return (self.start[0] + d * math.cos(self.heading),
                self.start[1] + d * math.sin(self.heading))


@dataclass(frozen=True)
class GroundTruth:
    """Per-sequence truth: class id, per-frame (range, radial velocity)
    reflection list, and per-frame masks of the bins touched by reflections
    before noise."""

    class_id: int
    size: float
    points: tuple[tuple[tuple[float, float], ...], ...]
    masks: tuple[np.ndarray, ...]


def _edge_points(center: tuple[float, float], size: float, radar: tuple[float, float],
                 k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples on the two edges of the axis-aligned square that
    face the radar."""
    half = size / 2.0
    sx = 1.0 if radar[0] >= center[0] else -1.0
    sy = 1.0 if radar[1] >= center[1] else -1.0
    pts = np.empty((k, 2))
    on_x_edge = rng.random(k) < 0.5
    offs = rng.uniform(-half, half, size=k)
    for i in range(k):
        if on_x_edge[i]:
            pts[i] = (center[0] + sx * half, center[1] + offs[i])
        else:
            pts[i] = (center[0] + offs[i], center[1] + sy * half)
    return pts


def _fold(value: float, axis: AxisSpec) -> float:
    """Alias a Doppler value into the unambiguous axis span."""
    lo = axis.origin
    span = axis.span
    if lo <= value <= lo + span:
        return value
    return (value - lo) % span + lo


def simulate_sequence(scene: SimScene) -> tuple[list[RadarView], GroundTruth]:
    """Generate the RD frame sequence and its ground truth for one scene.

    Per frame: fill the map with background noise, sample K points on the
    visible object edges, add each reflection (drawn intensity, range and
    radial-velocity bin) as a sinc-tapered blob superposed in linear
    power, then advance the object. Identical seeds give bit-identical
    sequences.
    """
    cls = scene.object_class
    streams = np.random.SeedSequence(scene.seed).spawn(scene.frames + 1)
    scene_rng = np.random.default_rng(streams[0])
    size = float(scene_rng.uniform(*cls.size_range))

    e = scene.sinc_extent
    taper_1d = np.sinc(np.arange(-e, e + 1) / (e + 1.0))
    taper = np.outer(taper_1d, taper_1d)

    vel = (scene.speed * math.cos(scene.heading), scene.speed * math.sin(scene.heading))
    views: list[RadarView] = []
    gt_points: list[tuple[tuple[float, float], ...]] = []
    gt_masks: list[np.ndarray] = []
    b_r, b_d = scene.range_axis.bins, scene.doppler_axis.bins

    for t in range(scene.frames):
        rng = np.random.default_rng(streams[t + 1])
        frame = background_frame(scene.noise, scene.range_axis, scene.doppler_axis, rng)
        k = int(rng.integers(scene.points_per_frame[0], scene.points_per_frame[1] + 1))
        pts = _edge_points(scene._center(t), size, scene.radar_pos, k, rng)

        signal = np.zeros((b_r, b_d))
        frame_points = []
        for px, py in pts:
            intensity = float(rng.uniform(*cls.intensity_range))
            dx, dy = px - scene.radar_pos[0], py - scene.radar_pos[1]
            r = math.hypot(dx, dy)
            # approaching-positive convention: v_r = -d(range)/dt
            v_r = -(vel[0] * dx + vel[1] * dy) / r
            frame_points.append((r, v_r))
            br = bin_of(scene.range_axis, r)
            bd = bin_of(scene.doppler_axis, _fold(v_r, scene.doppler_axis))
            p_lin = 10.0 ** (intensity / 10.0)
            r0, r1 = max(0, br - e), min(b_r, br + e + 1)
            d0, d1 = max(0, bd - e), min(b_d, bd + e + 1)
            signal[r0:r1, d0:d1] += p_lin * taper[r0 - br + e: r1 - br + e,
                                                  d0 - bd + e: d1 - bd + e]
        touched = signal > 0.0
        frame[touched] = 10.0 * np.log10(10.0 ** (frame[touched] / 10.0) + signal[touched])

        views.append(RadarView("RD", (scene.range_axis, scene.doppler_axis), frame))
        gt_points.append(tuple(frame_points))
        gt_masks.append(touched)

    gt = GroundTruth(class_id=cls.id, size=size, points=tuple(gt_points),
                     masks=tuple(gt_masks))
    return views, gt


def sample_scene(object_class: ObjectClass, seed: int, *,
                 frames: int = 20, dt: float = 0.1,
                 limit_doppler: bool = False,
                 max_tries: int = 1000, **scene_kwargs) -> SimScene:
    """Draw a random valid scene for a class: uniform start region, heading
    in [0, 2 pi), speed from the class range. Rejection-samples until the
    trajectory stays inside the range span (and, with limit_doppler, until
    every corner's radial velocity fits the Doppler axis)."""
    rng = np.random.default_rng(seed)
    d_axis = scene_kwargs.get("doppler_axis", RD_DOPPLER_AXIS)
    v_lim = min(abs(d_axis.origin), abs(d_axis.origin + d_axis.span)) - 2 * d_axis.step
    for trial in range(max_tries):
        start = (float(rng.uniform(-25.0, 25.0)), float(rng.uniform(5.0, 45.0)))
        heading = float(rng.uniform(0.0, 2.0 * math.pi))
        speed = float(rng.uniform(*object_class.speed_range))
        try:
            scene = SimScene(seed=seed + trial, object_class=object_class, start=start,
                             heading=heading, speed=speed, frames=frames, dt=dt,
                             **scene_kwargs)
        except ValueError:
            continue
        if limit_doppler and _max_radial_speed(scene) > v_lim:
            continue
        return scene
    raise RuntimeError(f"no valid scene found in {max_tries} tries")


def _max_radial_speed(scene: SimScene) -> float:
    half = scene.object_class.size_range[1] / 2.0
    vel = (scene.speed * math.cos(scene.heading), scene.speed * math.sin(scene.heading))
    worst = 0.0
    for t in range(scene.frames):
        cx, cy = scene._center(t)
        for ox in (-half, half):
            for oy in (-half, half):
                dx, dy = cx + ox - scene.radar_pos[0], cy + oy - scene.radar_pos[1]
                r = math.hypot(dx, dy)
                if r > 0:
                    worst = max(worst, abs(vel[0] * dx + vel[1] * dy) / r)
    return worst


def majority_vote(labels, num_classes: int = 4) -> int:
    """Most frequent label; ties resolve toward the smaller id."""
    arr = np.asarray(labels, dtype=np.int64)
    if arr.size == 0:
        raise ValueError("majority_vote needs at least one label")
    if arr.min() < 0 or arr.max() >= num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes})")
    return int(np.bincount(arr, minlength=num_classes).argmax())
