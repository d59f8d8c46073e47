"""Serialization: RTF tensor files, point-cloud CSV, and run manifests.

An RTF file is a JSON header describing dtype / shape / axis metadata
paired with a raw little-endian binary payload at the same path with a
.bin extension. CSV point clouds carry a mandatory header row; reals are
rendered with 9 significant digits, which round-trips the float32-valued
point fields exactly.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .annotate import DoaPoint
from .core import (AxisSpec, FormatError, FusedPoint, LidarPoint, Provenance,
                   RadTensor, RadarPoint, RadarView)

_DTYPES = {"c64": np.dtype("<c8"), "f32": np.dtype("<f4")}

_VIEW_BY_AXES = {("range", "doppler"): "RD", ("range", "angle"): "RA",
                 ("angle", "doppler"): "AD"}


def payload_path(header_path: str | Path) -> Path:
    return Path(header_path).with_suffix(".bin")


def write_rtf(path: str | Path, obj: RadTensor | RadarView) -> None:
    """Write a tensor or view as an RTF header plus .bin payload."""
    path = Path(path)
    if isinstance(obj, RadTensor):
        dtype = "c64"
    elif isinstance(obj, RadarView):
        dtype = "f32"
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} as RTF")
    header = {
        "dtype": dtype,
        "shape": list(obj.data.shape),
        "order": "row-major",
        "endian": "little",
        "axes": [{"name": a.name, "origin": a.origin, "step": a.step} for a in obj.axes],
    }
    path.write_text(json.dumps(header, sort_keys=True) + "\n")
    payload_path(path).write_bytes(np.ascontiguousarray(obj.data).astype(_DTYPES[dtype]).tobytes())


def read_rtf(path: str | Path) -> RadTensor | RadarView:
    """Read an RTF pair back into a tensor (c64) or view (f32).

    Raises FormatError naming the offending field on any inconsistency;
    nothing is returned partially.
    """
    path = Path(path)
    try:
        header = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid RTF header {path}: {exc}") from exc
    for key in ("dtype", "shape", "order", "endian", "axes"):
        if key not in header:
            raise FormatError(f"RTF header {path} is missing field {key!r}")
    if header["dtype"] not in _DTYPES:
        raise FormatError(f"unsupported dtype {header['dtype']!r} in {path}")
    if header["order"] != "row-major":
        raise FormatError(f"unsupported order {header['order']!r} in {path}")
    if header["endian"] != "little":
        raise FormatError(f"unsupported endian {header['endian']!r} in {path}")
    shape = tuple(int(s) for s in header["shape"])
    if len(header["axes"]) != len(shape):
        raise FormatError(f"axes count {len(header['axes'])} does not match shape in {path}")
    try:
        axes = tuple(AxisSpec(a["name"], shape[i], float(a["origin"]), float(a["step"]))
                     for i, a in enumerate(header["axes"]))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"invalid axes in {path}: {exc}") from exc
    dt = _DTYPES[header["dtype"]]
    raw = payload_path(path).read_bytes()
    expected = int(np.prod(shape)) * dt.itemsize
    if len(raw) != expected:
        raise FormatError(
            f"payload {payload_path(path)} holds {len(raw)} bytes, shape needs {expected}")
    data = np.frombuffer(raw, dtype=dt).reshape(shape)
    if header["dtype"] == "c64":
        if len(shape) != 3:
            raise FormatError(f"complex tensor in {path} must have 3 axes, got {len(shape)}")
        return RadTensor(axes=axes, data=data)  # type: ignore[arg-type]
    if len(shape) != 2:
        raise FormatError(f"view in {path} must have 2 axes, got {len(shape)}")
    names = tuple(a.name for a in axes)
    if names not in _VIEW_BY_AXES:
        raise FormatError(f"axes {names} in {path} form no known view")
    return RadarView(kind=_VIEW_BY_AXES[names], axes=axes, data=data)  # type: ignore[arg-type]


# -- point-cloud CSV ----------------------------------------------------------

_LAYOUTS = {
    "radar": (("x", "y", "vx", "vy", "rcs"), RadarPoint),
    "lidar": (("x", "y", "intensity"), LidarPoint),
    "doa": (("x", "y", "doppler"), DoaPoint),
    "fused": (("x", "y", "intensity", "vx", "vy", "rcs", "provenance"), FusedPoint),
}

_LAYOUT_OF_TYPE = {cls: name for name, (_, cls) in _LAYOUTS.items()}


def _fmt(v: float) -> str:
    return format(float(v), ".9g")


def write_pointcloud_csv(path: str | Path, points: Sequence, layout: str | None = None) -> None:
    """Write a homogeneous point list with its mandatory header row.

    The layout is inferred from the first point; an explicit layout is
    required for empty lists.
    """
    if layout is None:
        if not points:
            raise ValueError("layout is required to write an empty point cloud")
        layout = _LAYOUT_OF_TYPE.get(type(points[0]))
        if layout is None:
            raise TypeError(f"cannot serialize {type(points[0]).__name__} rows")
    if layout not in _LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    cols, _ = _LAYOUTS[layout]
    lines = [",".join(cols)]
    for p in points:
        cells = []
        for c in cols:
            v = getattr(p, c)
            cells.append(v.value if isinstance(v, Provenance) else _fmt(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_pointcloud_csv(path: str | Path) -> list:
    """Read a point-cloud CSV; the header decides the record type.

    Unknown extra columns are ignored with a warning; a header matching no
    known layout raises FormatError.
    """
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path} has no header row")
    header = [h.strip() for h in lines[0].split(",")]
    layout = None
    for name, (cols, _) in sorted(_LAYOUTS.items(), key=lambda kv: -len(kv[1][0])):
        if set(cols) <= set(header):
            layout = name
            break
    if layout is None:
        raise FormatError(f"{path} header {header} matches no point-cloud layout")
    cols, cls = _LAYOUTS[layout]
    extra = [h for h in header if h not in cols]
    if extra:
        warnings.warn(f"{path}: ignoring unknown columns {extra}")
    idx = {c: header.index(c) for c in cols}
    points = []
    for ln_no, ln in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) < len(header):
            raise FormatError(f"{path}:{ln_no} has {len(cells)} cells, header names {len(header)}")
        kwargs = {}
        for c in cols:
            raw = cells[idx[c]]
            kwargs[c] = Provenance(raw) if c == "provenance" else float(raw)
        points.append(cls(**kwargs))
    return points


# -- run manifests -------------------------------------------------------------

def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class RunManifest:
    """Reproducibility record: re-running `command` must reproduce outputs
    with the recorded checksums byte for byte."""

    command: list[str]
    version: str
    seed: int | None = None
    config_hash: str | None = None
    outputs: dict[str, str] = field(default_factory=dict)

    def add_output(self, out_dir: str | Path, path: str | Path) -> None:
        rel = str(Path(path).relative_to(out_dir))
        self.outputs[rel] = sha256_file(path)


def write_manifest(out_dir: str | Path, manifest: RunManifest) -> Path:
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(asdict(manifest), sort_keys=True, indent=2) + "\n")
    return path


def read_manifest(path: str | Path) -> RunManifest:
    raw = json.loads(Path(path).read_text())
    return RunManifest(**raw)
