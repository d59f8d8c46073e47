"""Chirp-level physics and the DFT chain from frequency-domain frames to
range-angle-Doppler tensors, plus view aggregation, MIMO de-interleaving,
CFAR detection and DoA point extraction.

All functions here are pure; independent frames can be processed in
parallel by the caller.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import AxisSpec, RadTensor, RadarPoint, RadarView, axis_value

# The toolkit treats the propagation speed as exactly 3e8 m/s; closed-form
# resolutions and test vectors are derived with this constant.
SPEED_OF_LIGHT = 3.0e8

DB_FLOOR = -120.0


@dataclass(frozen=True)
class ChirpConfig:
    """FMCW waveform and antenna-array description.

    fc is the carrier frequency (Hz), bandwidth the sweep bandwidth (Hz),
    sweep the single-chirp duration (s), frame_time the whole-frame
    duration (s) that fixes the Doppler resolution. rx_spacing is the
    distance between adjacent virtual receive antennas (m).
    """

    fc: float
    bandwidth: float
    sweep: float
    frame_time: float
    n_chirps: int
    n_samples: int
    n_tx: int
    n_rx: int
    rx_spacing: float

    def __post_init__(self) -> None:
        for name in ("fc", "bandwidth", "sweep", "frame_time", "rx_spacing"):
            if not getattr(self, name) > 0:
                raise ValueError(f"ChirpConfig.{name} must be positive")
        for name in ("n_chirps", "n_samples", "n_tx", "n_rx"):
            if getattr(self, name) < 1:
                raise ValueError(f"ChirpConfig.{name} must be >= 1")

    @property
    def n_antennas(self) -> int:
        return self.n_tx * self.n_rx

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.fc


@dataclass(frozen=True)
class Reflector:
    """Ideal point reflector: range (m), radial velocity (m/s, approaching
    positive), azimuth (deg from boresight) and linear amplitude."""

    range: float
    radial_velocity: float
    azimuth: float
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.range < 0:
            raise ValueError(f"reflector range must be >= 0, got {self.range}")


@dataclass(frozen=True)
class FrequencyFrame:
    """Mixed IF frame buffer: chirp index x chirp sample x antenna pair."""

    cfg: ChirpConfig
    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.complex128)
        expected = (self.cfg.n_chirps, self.cfg.n_samples, self.cfg.n_antennas)
        if arr.shape != expected:
            raise ValueError(f"frame shape {arr.shape} does not match config {expected}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)


def phase_shift(cfg: ChirpConfig, r: float) -> float:
    """Round-trip phase (rad) of a return from range r, at the sweep start
    frequency."""
    if r < 0:
        raise ValueError(f"range must be >= 0, got {r}")
    return 2.0 * math.pi * cfg.fc * 2.0 * r / SPEED_OF_LIGHT


def doppler_frequency(cfg: ChirpConfig, v_r: float) -> float:
    """Doppler shift (Hz) induced by radial velocity v_r."""
    return 2.0 * v_r * cfg.fc / SPEED_OF_LIGHT


def radial_velocity_from_doppler(cfg: ChirpConfig, f_d: float) -> float:
    """Inverse of doppler_frequency: v_r = c * f_d / (2 fc)."""
    return SPEED_OF_LIGHT * f_d / (2.0 * cfg.fc)


class Resolutions(NamedTuple):
    range_m: float
    doppler_ms: float
    angle_deg: float


def resolutions(cfg: ChirpConfig, alpha_deg: float = 0.0) -> Resolutions:
    """Closed-form range / Doppler / angle resolutions.

    range: c / (2 B); Doppler: c / (2 fc T); angle (deg) at azimuth alpha:
    c / (fc N_rx h cos(alpha)), converted from radians. The angle formula
    is singular at +-90 degrees.
    """
    cos_a = math.cos(math.radians(alpha_deg))
    if abs(cos_a) < 1e-12:
        raise ValueError("angle resolution is singular at +-90 degrees")
    d_r = SPEED_OF_LIGHT / (2.0 * cfg.bandwidth)
    d_d = SPEED_OF_LIGHT / (2.0 * cfg.fc * cfg.frame_time)
    d_a = math.degrees(SPEED_OF_LIGHT / (cfg.fc * cfg.n_rx * cfg.rx_spacing * cos_a))
    return Resolutions(d_r, d_d, d_a)


def max_azimuth_deg(cfg: ChirpConfig) -> float:
    """Unambiguous azimuth half-span of the virtual array.

    The per-antenna phase ramp wraps when 2 h sin(alpha) / lambda exceeds
    1/2; half-wavelength spacing gives +-30 degrees.
    """
    s = min(1.0, cfg.wavelength / (4.0 * cfg.rx_spacing))
    return math.degrees(math.asin(s))


def tensor_axes(cfg: ChirpConfig) -> tuple[AxisSpec, AxisSpec, AxisSpec]:
    """Axis metadata of the tensor produced by rad_from_frame.

    Range starts at zero; Doppler and angle are centered. The angle axis is
    uniform in degrees across the unambiguous FoV; the underlying array
    response is uniform in sin(alpha), which stays well under one bin of
    the linear axis for moderate FoVs.
    """
    d_r = SPEED_OF_LIGHT / (2.0 * cfg.bandwidth)
    d_d = SPEED_OF_LIGHT / (2.0 * cfg.fc * cfg.frame_time)
    n_a = cfg.n_antennas
    a_max = max_azimuth_deg(cfg)
    a_step = 2.0 * a_max / n_a
    return (
        AxisSpec("range", cfg.n_chirps, 0.0, d_r),
        AxisSpec("angle", n_a, -(n_a // 2) * a_step, a_step),
        AxisSpec("doppler", cfg.n_samples, -(cfg.n_samples // 2) * d_d, d_d),
    )


def synthesize_frame(cfg: ChirpConfig, reflectors: Sequence[Reflector]) -> FrequencyFrame:
    """Build the mixed IF cube for a set of ideal reflectors.

    Each reflector contributes a complex exponential whose chirp-index
    frequency encodes range, chirp-sample phase ramp encodes Doppler and
    antenna-pair phase ramp encodes azimuth through the adjacent-receiver
    shift 2 pi fc (2 h sin alpha) / c. Deterministic and linear in the
    reflector amplitude; no reflectors yields an all-zero frame.
    """
    n_r, n_d, n_a = cfg.n_chirps, cfg.n_samples, cfg.n_antennas
    axes = tensor_axes(cfg)
    frame = np.zeros((n_r, n_d, n_a), dtype=np.complex128)
    i = np.arange(n_r)[:, None, None]
    nu = np.arange(n_d)[None, :, None]
    p = np.arange(n_a)[None, None, :]
    for refl in reflectors:
        u_r = refl.range / axes[0].step
        u_d = refl.radial_velocity / axes[2].step
        u_a = n_a * 2.0 * cfg.rx_spacing * math.sin(math.radians(refl.azimuth)) / cfg.wavelength
        phase = i * (u_r / n_r) + nu * (u_d / n_d) + p * (u_a / n_a)
        frame += refl.amplitude * np.exp(-2j * np.pi * phase)
    return FrequencyFrame(cfg=cfg, data=frame)


def inverse_dft3(cube: np.ndarray) -> np.ndarray:
    """Inverse DFT along all three axes, each scaled by 1/N.

    The forward transform is the unnormalized DFT, so applying this to
    numpy's fftn output recovers the input. Any axis length is accepted;
    non-power-of-two sizes fall back to a direct O(n^2)-equivalent plan
    inside the FFT library.
    """
    out = np.asarray(cube, dtype=np.complex128)
    for ax in range(3):
        out = np.fft.ifft(out, axis=ax)
    return out


def rad_from_frame(frame: FrequencyFrame) -> RadTensor:
    """Transform a frequency-domain frame into the range-angle-Doppler cube.

    Applies the inverse DFT along the chirp-index (range), chirp-sample
    (Doppler) and antenna-pair (angle) axes in that order, centers the
    signed Doppler and angle axes, and reorders the cube to
    (range, angle, Doppler).
    """
    cube = inverse_dft3(frame.data)
    cube = np.fft.fftshift(cube, axes=(1, 2))
    cube = np.transpose(cube, (0, 2, 1))
    return RadTensor(axes=tensor_axes(frame.cfg), data=cube)


_VIEW_LAYOUT = {
    # kind -> (axis index aggregated away, indices of the kept axes)
    "RD": (1, (0, 2)),
    "RA": (2, (0, 1)),
    "AD": (0, (1, 2)),
}


def aggregate(tensor: RadTensor, target: str, method: str = "mean") -> RadarView:
    """Compress the tensor over the axis missing from the target view.

    method="mean" averages the squared modulus over the absent axis before
    the decibel transform; method="max" takes the per-cell maximum instead
    (used for display-friendly RA maps). Power is accumulated sequentially
    in float64 so the result is bit-identical to a scalar loop. Cells with
    zero power are floored at DB_FLOOR instead of -inf.
    """
    if target not in _VIEW_LAYOUT:
        raise ValueError(f"view target must be one of {tuple(_VIEW_LAYOUT)}, got {target!r}")
    if method not in ("mean", "max"):
        raise ValueError(f"aggregation method must be 'mean' or 'max', got {method!r}")
    agg_ax, keep = _VIEW_LAYOUT[target]
    data = np.moveaxis(tensor.data, agg_ax, -1)
    re = data.real.astype(np.float64)
    im = data.imag.astype(np.float64)
    n = data.shape[-1]
    if method == "mean":
        acc = np.zeros(data.shape[:2], dtype=np.float64)
        for d in range(n):
            acc += re[..., d] * re[..., d] + im[..., d] * im[..., d]
        power = acc / n
    else:
        power = (re * re + im * im).max(axis=-1)
    # scalar log10 keeps the result bit-identical to a per-cell reference loop
    db = np.empty(power.shape, dtype=np.float64)
    flat_p = power.ravel()
    flat_db = db.ravel()
    for i, v in enumerate(flat_p):
        flat_db[i] = 10.0 * math.log10(v) if v > 0.0 else DB_FLOOR
    return RadarView(kind=target, axes=(tensor.axes[keep[0]], tensor.axes[keep[1]]), data=db)


def mimo_deinterleave(rd_per_rx: np.ndarray, delta_bins: int, n_tx: int) -> np.ndarray:
    """Gather the transmitter-replicated Doppler signatures into channels.

    A target appears once per transmitter, offset by delta_bins along the
    Doppler axis of every receiver channel. Output channel k*n_rx + j at
    Doppler bin d holds input channel j at bin d + k*delta_bins, so the
    replicas align at the true Doppler bin. The output Doppler axis keeps
    B_D - delta_bins*(n_tx - 1) bins; when n_tx * delta_bins == B_D the
    gather is a bijection of the Doppler x channel cells and a replicated
    signature collapses to a single peak in every channel.
    """
    cube = np.asarray(rd_per_rx)
    if cube.ndim != 3:
        raise ValueError(f"expected a (range, doppler, rx) cube, got shape {cube.shape}")
    if delta_bins <= 0:
        raise ValueError(f"delta_bins must be positive, got {delta_bins}")
    if n_tx < 1:
        raise ValueError(f"n_tx must be >= 1, got {n_tx}")
    b_d = cube.shape[1]
    if delta_bins * (n_tx - 1) >= b_d:
        raise ValueError(
            f"delta_bins * (n_tx - 1) = {delta_bins * (n_tx - 1)} must be < {b_d} Doppler bins")
    b_out = b_d - delta_bins * (n_tx - 1)
    taps = [cube[:, k * delta_bins: k * delta_bins + b_out, :] for k in range(n_tx)]
    stacked = np.stack(taps, axis=2)  # (range, doppler', tx, rx)
    return stacked.reshape(cube.shape[0], b_out, n_tx * cube.shape[2])


def cfar_detect(view: RadarView, guard: int, train: int, scale: float) -> list[tuple[int, int]]:
    """Cell-averaging CFAR on a decibel view.

    A cell is flagged when its linear power exceeds scale times the mean
    power of the surrounding training ring (a square annulus of width
    `train` outside a guard ring of width `guard`). Rings are truncated at
    the borders: only in-bounds cells enter the mean. Detections are
    returned in row-major scan order.
    """
    if guard < 1 or train < 1:
        raise ValueError("guard and train must be >= 1")
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    w = guard + train
    rows, cols = view.data.shape
    if rows < 2 * w + 1 or cols < 2 * w + 1:
        raise ValueError(
            f"view {rows}x{cols} is smaller than the {2 * w + 1}-cell CFAR window in some axis")
    power = np.power(10.0, view.data.astype(np.float64) / 10.0)
    outer_sum, outer_cnt = _box_sums(power, w)
    inner_sum, inner_cnt = _box_sums(power, guard)
    ring_mean = (outer_sum - inner_sum) / (outer_cnt - inner_cnt)
    detected = power > scale * ring_mean
    return [(int(r), int(c)) for r, c in np.argwhere(detected)]


def _box_sums(a: np.ndarray, half: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell sum and in-bounds count of the (2*half+1)^2 box, truncated
    at the borders, via an integral image."""
    rows, cols = a.shape
    cum = np.zeros((rows + 1, cols + 1))
    cum[1:, 1:] = a.cumsum(axis=0).cumsum(axis=1)
    i = np.arange(rows)[:, None]
    j = np.arange(cols)[None, :]
    r0 = np.clip(i - half, 0, rows)
    r1 = np.clip(i + half + 1, 0, rows)
    c0 = np.clip(j - half, 0, cols)
    c1 = np.clip(j + half + 1, 0, cols)
    total = cum[r1, c1] - cum[r0, c1] - cum[r1, c0] + cum[r0, c0]
    count = (r1 - r0) * (c1 - c0)
    return total, count


def doa_points(detections: Sequence[tuple[int, int]], ra_view: RadarView,
               rd_view: RadarView) -> list[RadarPoint]:
    """Convert range-angle detections into a sparse Cartesian point cloud.

    Each (range bin, angle bin) detection becomes a point at
    (x, y) = r (sin a, cos a); its Doppler is read from the strongest
    Doppler bin of the matching range row of the RD view and mapped to the
    radial direction; the RA cell power is kept as the RCS.
    """
    if ra_view.kind != "RA" or rd_view.kind != "RD":
        raise ValueError("doa_points needs an RA view and an RD view")
    range_axis, angle_axis = ra_view.axes
    dop_axis = rd_view.axes[1]
    if rd_view.axes[0].bins != range_axis.bins:
        raise ValueError("RA and RD views disagree on the range axis")
    points = []
    for br, ba in detections:
        if not (0 <= br < range_axis.bins and 0 <= ba < angle_axis.bins):
            raise IndexError(f"detection ({br}, {ba}) outside the view")
        r = axis_value(range_axis, br)
        alpha = math.radians(axis_value(angle_axis, ba))
        row = rd_view.data[br, :]
        v = axis_value(dop_axis, int(np.argmax(row)))
        points.append(RadarPoint(
            x=r * math.sin(alpha), y=r * math.cos(alpha),
            vx=v * math.sin(alpha), vy=v * math.cos(alpha),
            rcs=float(ra_view.data[br, ba]),
        ))
    return points
