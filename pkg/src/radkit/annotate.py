"""Semi-automatic annotation pipeline: radial-velocity seeds, mean-shift
clustering of DoA-Doppler point clouds with automatic bandwidth selection,
centroid tracking across frames, and sparse-to-dense mask generation.

Mean-shift iterations for distinct starting points are independent; the
tracker is sequential over frames by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import AxisSpec, bin_of

MERGE_FACTOR = 0.5        # modes closer than this fraction of sigma join one cluster
DEFAULT_TOL_FACTOR = 1e-5  # convergence: step norm below tol_factor * sigma
MAX_ITER = 300
MISS_FACTOR = 3.0          # miss when no point lies within this many sigmas of the seed
MIN_STABLE_POINTS = 4      # clusters smaller than this are skipped by det/js criteria


@dataclass(frozen=True)
class DoaPoint:
    """One DoA-Doppler sample: Cartesian position plus Doppler value."""

    x: float
    y: float
    doppler: float

    def __post_init__(self) -> None:
        for nm in ("x", "y", "doppler"):
            v = getattr(self, nm)
            if not math.isfinite(v):
                raise ValueError(f"DoaPoint.{nm} must be finite")
            object.__setattr__(self, nm, float(np.float32(v)))


@dataclass(frozen=True)
class SeedPoint:
    """Tracker seed: position and radial velocity of the target."""

    x: float
    y: float
    v_r: float

    def __post_init__(self) -> None:
        for nm in ("x", "y", "v_r"):
            if not math.isfinite(getattr(self, nm)):
                raise ValueError(f"SeedPoint.{nm} must be finite")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.v_r], dtype=np.float64)


@dataclass(frozen=True)
class Cluster:
    """Converged mean-shift cluster.

    centroid is the mean of the member points; mode is the shared
    convergence location of their iterates.
    """

    members: np.ndarray
    indices: np.ndarray
    centroid: np.ndarray
    mode: np.ndarray
    bandwidth: float

    def __post_init__(self) -> None:
        if len(self.members) == 0:
            raise ValueError("cluster cannot be empty")

    @property
    def size(self) -> int:
        return len(self.members)


def radial_velocity(prev: tuple[float, float], curr: tuple[float, float],
                    dt: float, radar: tuple[float, float] = (0.0, 0.0)) -> float:
    """Radial velocity from two positions: the velocity vector projected on
    the radar-object line, positive when approaching."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    dx, dy = curr[0] - radar[0], curr[1] - radar[1]
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        raise ValueError("object at the radar position: radial direction undefined")
    vx, vy = (curr[0] - prev[0]) / dt, (curr[1] - prev[1]) / dt
    return -(vx * dx + vy * dy) / dist


def mean_shift(points: np.ndarray, sigma: float, tol: float | None = None,
               max_iter: int = MAX_ITER) -> list[Cluster]:
    """Gaussian-kernel mean shift over a point cloud.

    Every point is iterated to the kernel-weighted local mean until the
    step norm drops below tol (default 1e-5 * sigma) or max_iter is hit.
    Converged modes closer than 0.5 sigma collapse into one cluster; each
    point joins its mode's cluster. Cluster order follows the first member
    in input order.
    """
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if x.size == 0:
        raise ValueError("mean_shift needs at least one point")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if tol is None:
        tol = DEFAULT_TOL_FACTOR * sigma
    y = x.copy()
    inv_two_s2 = 1.0 / (2.0 * sigma * sigma)
    active = np.ones(len(x), dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        ya = y[active]
        d2 = ((ya[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
        w = np.exp(-d2 * inv_two_s2)
        new = w @ x / w.sum(axis=1, keepdims=True)
        step = np.linalg.norm(new - ya, axis=1)
        y[active] = new
        still = step >= tol
        active[np.nonzero(active)[0][~still]] = False

    merge_r = MERGE_FACTOR * sigma
    modes: list[np.ndarray] = []
    labels = np.empty(len(x), dtype=np.int64)
    for i, m in enumerate(y):
        for c, ref in enumerate(modes):
            if np.linalg.norm(m - ref) <= merge_r:
                labels[i] = c
                break
        else:
            labels[i] = len(modes)
            modes.append(m)
    clusters = []
    for c, mode in enumerate(modes):
        idx = np.nonzero(labels == c)[0]
        members = x[idx]
        clusters.append(Cluster(members=members, indices=idx,
                                centroid=members.mean(axis=0), mode=mode,
                                bandwidth=float(sigma)))
    return clusters


def fit_gaussian(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased covariance of a point set (n >= 2)."""
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if len(x) < 2:
        raise ValueError(f"need at least 2 points to fit a Gaussian, got {len(x)}")
    mu = x.mean(axis=0)
    d = x - mu
    cov = d.T @ d / (len(x) - 1)
    return mu, cov


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon distance between two discrete distributions.

    Square root of the symmetrized KL divergence to the mixture
    (p + q) / 2, natural log, with 0 log 0 taken as 0. Finite even for
    disjoint supports (upper bound sqrt(ln 2)) and a proper metric.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"distributions must share a support: {p.shape} vs {q.shape}")
    if (p < 0).any() or (q < 0).any():
        raise ValueError("probability masses must be non-negative")
    for nm, d in (("p", p), ("q", q)):
        s = d.sum()
        if abs(s - 1.0) > 1e-9:
            raise ValueError(f"{nm} must sum to 1 (got {s!r})")
    m = 0.5 * (p + q)
    kl_pm = float(np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0) / np.where(m > 0, m, 1.0)), 0.0)))
    kl_qm = float(np.sum(np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0) / np.where(m > 0, m, 1.0)), 0.0)))
    js2 = 0.5 * (kl_pm + kl_qm)
    return math.sqrt(max(js2, 0.0))


def _gaussian_pdf(x: np.ndarray, mu: np.ndarray, cov: np.ndarray) -> np.ndarray:
    d = cov.shape[0]
    # ridge for rank-deficient clusters (coplanar points)
    jitter = 1e-10 * max(float(np.trace(cov)) / d, 1.0)
    for _ in range(8):
        try:
            chol = np.linalg.cholesky(cov + jitter * np.eye(d))
            break
        except np.linalg.LinAlgError:
            jitter *= 100.0
    else:
        raise ValueError("cluster covariance is not usable as a density")
    diff = x - mu
    z = np.linalg.solve(chol, diff.T)
    log_det = 2.0 * np.log(np.diag(chol)).sum()
    expo = -0.5 * (z * z).sum(axis=0)
    return np.exp(expo - 0.5 * (d * math.log(2.0 * math.pi) + log_det))


def cluster_js(a: Cluster, b: Cluster) -> float:
    """JS distance between the Gaussians fitted to two clusters.

    Both densities are evaluated on the union of the two member sets and
    normalized into discrete distributions so the discrete JS definition
    applies directly.
    """
    support = np.vstack([a.members, b.members])
    pa = _gaussian_pdf(support, *fit_gaussian(a.members))
    pb = _gaussian_pdf(support, *fit_gaussian(b.members))
    if pa.sum() <= 0 or pb.sum() <= 0:
        raise ValueError("degenerate cluster density")
    return js_divergence(pa / pa.sum(), pb / pb.sum())


def log_ratio_bandwidth(d_max: float, d_prev: float) -> float:
    """Distance-driven bandwidth: (1 + log(1 + d_max)) / (1 + log(1 + d_prev)).

    Equals 1 when the tracked centroid sits at the maximum detection
    distance and grows as the object gets closer. The value is returned
    unclipped.
    """
    if d_max < 0 or d_prev < 0:
        raise ValueError("distances must be >= 0")
    return (1.0 + math.log1p(d_max)) / (1.0 + math.log1p(d_prev))


def select_bandwidth(clusters_per_sigma: Sequence[Cluster], method: str) -> int:
    """Pick the most stable bandwidth index from a sweep.

    clusters_per_sigma holds, for each bandwidth of an ordered sweep, the
    cluster associated with the tracked seed. The score of an interior
    index b is the two-sided variation of a cluster signature: the
    covariance determinant ("det"), the member count ("count"), or the JS
    distance between fitted Gaussians ("js"). The argmin wins; ties break
    toward the smaller index. For det/js, indices touching a cluster with
    fewer than 4 points are skipped; if every index is skipped the count
    criterion decides instead.
    """
    if method not in ("det", "count", "js"):
        raise ValueError(f"unknown stability criterion {method!r}")
    n = len(clusters_per_sigma)
    if n < 3:
        raise ValueError(f"need at least 3 bandwidths for a stability sweep, got {n}")

    def count_score(b: int) -> float:
        return float(clusters_per_sigma[b + 1].size - clusters_per_sigma[b - 1].size)

    scores: list[tuple[int, float]] = []
    if method == "count":
        scores = [(b, count_score(b)) for b in range(1, n - 1)]
    else:
        dets = [None] * n
        for b in range(1, n - 1):
            window = clusters_per_sigma[b - 1: b + 2]
            if any(c.size < MIN_STABLE_POINTS for c in window):
                continue
            if method == "det":
                for i in (b - 1, b, b + 1):
                    if dets[i] is None:
                        dets[i] = float(np.linalg.det(fit_gaussian(clusters_per_sigma[i].members)[1]))
                scores.append((b, dets[b + 1] - dets[b - 1]))
            else:
                scores.append((b, cluster_js(clusters_per_sigma[b], clusters_per_sigma[b - 1])
                               + cluster_js(clusters_per_sigma[b], clusters_per_sigma[b + 1])))
        if not scores:
            scores = [(b, count_score(b)) for b in range(1, n - 1)]
    best = min(scores, key=lambda t: t[1])
    return best[0]


def nearest_cluster(clusters: Sequence[Cluster], target: np.ndarray) -> Cluster:
    """Cluster whose centroid is nearest to the target point; ties keep the
    first in scan order."""
    if not clusters:
        raise ValueError("no clusters to choose from")
    dists = [float(np.linalg.norm(c.centroid - target)) for c in clusters]
    return clusters[int(np.argmin(dists))]


def track_sequence(frames: Sequence[np.ndarray], seed: SeedPoint, seed_frame: int,
                   sigmas: Sequence[float], method: str = "js", *,
                   d_max: float = 50.0, radar: tuple[float, float] = (0.0, 0.0),
                   miss_factor: float = MISS_FACTOR) -> list[Cluster | None]:
    """Track the seeded cluster across a sequence of DoA-Doppler clouds.

    At the seed frame the seed is associated with its nearest cluster
    under the selected bandwidth; the cluster centroid becomes the seed of
    the next (and previous) frame, walking to both ends of the sequence.
    A frame yields a miss marker (None) when it is empty or no point lies
    within miss_factor * sigma of the carried seed; misses keep the seed
    unchanged. method is one of js/det/count (sweep over sigmas) or
    logratio (bandwidth from the carried seed's distance to the radar).
    """
    if not 0 <= seed_frame < len(frames):
        raise IndexError(f"seed_frame {seed_frame} outside [0, {len(frames)})")
    if method != "logratio" and len(sigmas) < 3:
        raise ValueError("stability methods need a sweep of at least 3 bandwidths")

    def step(points: np.ndarray, carried: np.ndarray) -> Cluster | None:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.size == 0:
            return None
        if method == "logratio":
            d_prev = math.hypot(carried[0] - radar[0], carried[1] - radar[1])
            sigma = log_ratio_bandwidth(d_max, d_prev)
            chosen = nearest_cluster(mean_shift(pts, sigma), carried)
        else:
            per_sigma = [nearest_cluster(mean_shift(pts, s), carried) for s in sigmas]
            b_star = select_bandwidth(per_sigma, method)
            sigma = sigmas[b_star]
            chosen = per_sigma[b_star]
        nearest = float(np.linalg.norm(pts - carried, axis=1).min())
        if nearest > miss_factor * sigma:
            return None
        return chosen

    out: list[Cluster | None] = [None] * len(frames)
    carried = seed.vector
    for t in range(seed_frame, len(frames)):
        got = step(frames[t], carried)
        out[t] = got
        if got is not None:
            carried = got.centroid
    carried = out[seed_frame].centroid if out[seed_frame] is not None else seed.vector
    for t in range(seed_frame - 1, -1, -1):
        got = step(frames[t], carried)
        out[t] = got
        if got is not None:
            carried = got.centroid
    return out


class Projection(NamedTuple):
    points: set[tuple[int, int]]
    dropped: int


def project(cluster: Cluster, target: str, axes: tuple[AxisSpec, AxisSpec]) -> Projection:
    """Map cluster members into view bins.

    RD uses (range, doppler) = (hypot(x, y), doppler); RA uses
    (range, azimuth) with the azimuth measured from boresight,
    atan2(x, y) in degrees. Duplicate bins collapse; members falling
    outside an axis are dropped and counted.
    """
    if target not in ("RD", "RA"):
        raise ValueError(f"projection target must be RD or RA, got {target!r}")
    bins: set[tuple[int, int]] = set()
    dropped = 0
    for x, y, dop in cluster.members:
        r = math.hypot(x, y)
        second = dop if target == "RD" else math.degrees(math.atan2(x, y))
        try:
            bins.add((bin_of(axes[0], r), bin_of(axes[1], second)))
        except ValueError:
            dropped += 1
    return Projection(bins, dropped)


# -- binary morphology on integer point sets ---------------------------------

CROSS_3x3 = frozenset({(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)})
SQUARE_3x3 = frozenset({(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)})


def disk_element(radius: float) -> frozenset[tuple[int, int]]:
    """Integer offsets within Euclidean distance radius of the origin."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    r = int(math.floor(radius))
    return frozenset((i, j) for i in range(-r, r + 1) for j in range(-r, r + 1)
                     if i * i + j * j <= radius * radius)


def dilate(points: set[tuple[int, int]], element: frozenset[tuple[int, int]]) -> set[tuple[int, int]]:
    """Minkowski dilation: union of the translates of the set."""
    return {(p[0] + e[0], p[1] + e[1]) for p in points for e in element}


def erode(points: set[tuple[int, int]], element: frozenset[tuple[int, int]]) -> set[tuple[int, int]]:
    """Erosion: cells whose whole translated element stays inside the set."""
    if not element:
        raise ValueError("structuring element cannot be empty")
    if not points:
        return set()
    e0 = next(iter(element))
    candidates = {(p[0] - e0[0], p[1] - e0[1]) for p in points}
    return {p for p in candidates
            if all((p[0] + e[0], p[1] + e[1]) in points for e in element)}


def close(points: set[tuple[int, int]], element: frozenset[tuple[int, int]]) -> set[tuple[int, int]]:
    """Closing: erosion of the dilation by the same element."""
    return erode(dilate(points, element), element)


MORPH_VARIANTS = ("circle", "cross", "circle_close", "circle_close_erode")


def dense_points(sparse: set[tuple[int, int]], variant: str = "circle",
                 radius: float = 2.0) -> set[tuple[int, int]]:
    """Expand a sparse annotation with one of the four morphology recipes."""
    if variant not in MORPH_VARIANTS:
        raise ValueError(f"variant must be one of {MORPH_VARIANTS}, got {variant!r}")
    if variant == "cross":
        return dilate(sparse, CROSS_3x3)
    out = dilate(sparse, disk_element(radius))
    if variant in ("circle_close", "circle_close_erode"):
        out = close(out, SQUARE_3x3)
    if variant == "circle_close_erode":
        out = erode(out, SQUARE_3x3)
    return out


def to_mask(points: set[tuple[int, int]], shape: tuple[int, int]) -> np.ndarray:
    """Rasterize a point set onto a grid, dropping out-of-grid cells."""
    mask = np.zeros(shape, dtype=bool)
    for r, c in points:
        if 0 <= r < shape[0] and 0 <= c < shape[1]:
            mask[r, c] = True
    return mask


@dataclass(frozen=True)
class Annotation:
    """Sparse points, their tight bounding box, and the dense mask."""

    sparse: frozenset[tuple[int, int]]
    box: tuple[int, int, int, int]
    dense: np.ndarray

    def __post_init__(self) -> None:
        if not self.sparse:
            raise ValueError("annotation needs at least one sparse point")
        rows = [p[0] for p in self.sparse]
        cols = [p[1] for p in self.sparse]
        box = (min(rows), min(cols), max(rows), max(cols))
        if tuple(self.box) != box:
            raise ValueError(f"box {self.box} is not the tight bound {box}")
        for r, c in self.sparse:
            if not self.dense[r, c]:
                raise ValueError("sparse annotation must be contained in the dense mask")


def build_annotation(sparse: set[tuple[int, int]], grid_shape: tuple[int, int],
                     variant: str = "circle", radius: float = 2.0) -> Annotation:
    """Assemble the sparse/box/dense annotation triple for one frame."""
    rows = [p[0] for p in sparse]
    cols = [p[1] for p in sparse]
    box = (min(rows), min(cols), max(rows), max(cols))
    dense = to_mask(dense_points(sparse, variant, radius), grid_shape)
    return Annotation(sparse=frozenset(sparse), box=box, dense=dense)
