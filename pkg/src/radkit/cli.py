"""Subcommand front end.

Every command reads JSON/RTF/CSV inputs, writes its outputs, and finishes
with a RunManifest recording the command line, config hash, seed and
per-output checksums; re-running the recorded command reproduces the
outputs byte for byte. Exit codes: 0 success, 1 domain error, 2 usage.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, annotate, fusion, metrics, simulate
from .core import AxisSpec, RadarView, SensorMode, SensorSpec, ToolkitError
from .io import (RunManifest, read_manifest, read_pointcloud_csv, read_rtf,
                 sha256_file, write_manifest, write_pointcloud_csv, write_rtf)
from .signal import (ChirpConfig, Reflector, aggregate, cfar_detect, doa_points,
                     rad_from_frame, synthesize_frame)


def _load_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input file not found: {p}")
    return json.loads(p.read_text())


def _axis_from_json(name: str, d: dict) -> AxisSpec:
    return AxisSpec(name, int(d["bins"]), float(d["origin"]), float(d["step"]))


def scene_from_json(d: dict) -> simulate.SimScene:
    cls = simulate.OBJECT_CLASSES[int(d["class_id"])]
    kwargs = {}
    if "noise" in d:
        kwargs["noise"] = simulate.NoiseModel(**d["noise"])
    if "range_axis" in d:
        kwargs["range_axis"] = _axis_from_json("range", d["range_axis"])
    if "doppler_axis" in d:
        kwargs["doppler_axis"] = _axis_from_json("doppler", d["doppler_axis"])
    for opt in ("frames", "dt", "sinc_extent"):
        if opt in d:
            kwargs[opt] = d[opt]
    if "points_per_frame" in d:
        kwargs["points_per_frame"] = tuple(d["points_per_frame"])
    if "radar_pos" in d:
        kwargs["radar_pos"] = tuple(d["radar_pos"])
    return simulate.SimScene(
        seed=int(d["seed"]), object_class=cls, start=tuple(d["start"]),
        heading=float(d["heading"]), speed=float(d["speed"]), **kwargs)


def sensor_spec_from_json(d: dict) -> SensorSpec:
    modes = []
    for m in d["modes"]:
        m = dict(m)
        m["range_res_m"] = tuple(m["range_res_m"])
        modes.append(SensorMode(**m))
    return SensorSpec(modes=tuple(modes))


def _manifest_for(args, argv: list[str], seed: int | None = None,
                  config_path: str | None = None) -> RunManifest:
    m = RunManifest(command=list(argv), version=__version__, seed=seed)
    if config_path:
        m.config_hash = "sha256:" + sha256_file(config_path)
    return m


def _finish_dir(out_dir: Path, manifest: RunManifest, files: list[Path]) -> None:
    for f in files:
        manifest.add_output(out_dir, f)
    write_manifest(out_dir, manifest)


def _finish_file(out_file: Path, manifest: RunManifest, files: list[Path]) -> None:
    for f in files:
        manifest.add_output(out_file.parent, f)
    mpath = out_file.parent / (out_file.stem + ".manifest.json")
    mpath.write_text(json.dumps(
        {"command": manifest.command, "version": manifest.version,
         "seed": manifest.seed, "config_hash": manifest.config_hash,
         "outputs": manifest.outputs}, sort_keys=True, indent=2) + "\n")


def cmd_simulate(args, argv) -> int:
    cfg = _load_json(args.config)
    scene = scene_from_json(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    views, gt = simulate.simulate_sequence(scene)
    files = []
    frames_meta = []
    for t, view in enumerate(views):
        fp = out / f"frame_{t:03d}.rtf"
        write_rtf(fp, view)
        files += [fp, fp.with_suffix(".bin")]
        mp = out / f"mask_{t:03d}.rtf"
        write_rtf(mp, RadarView("RD", (scene.range_axis, scene.doppler_axis),
                                gt.masks[t].astype(np.float32)))
        files += [mp, mp.with_suffix(".bin")]
        frames_meta.append({"points": [[r, v] for r, v in gt.points[t]],
                            "mask": mp.name, "view": fp.name})
    gt_path = out / "ground_truth.json"
    gt_path.write_text(json.dumps(
        {"class_id": gt.class_id, "size": gt.size, "frames": frames_meta},
        sort_keys=True, indent=2) + "\n")
    files.append(gt_path)
    manifest = _manifest_for(args, argv, seed=scene.seed, config_path=args.config)
    _finish_dir(out, manifest, files)
    return 0


def cmd_process(args, argv) -> int:
    chirp = ChirpConfig(**_load_json(args.chirp))
    reflectors = [Reflector(**r) for r in _load_json(args.reflectors)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tensor = rad_from_frame(synthesize_frame(chirp, reflectors))
    fp = out / "tensor.rtf"
    write_rtf(fp, tensor)
    manifest = _manifest_for(args, argv, config_path=args.chirp)
    _finish_dir(out, manifest, [fp, fp.with_suffix(".bin")])
    return 0


def cmd_aggregate(args, argv) -> int:
    tensor = read_rtf(args.tensor)
    view = aggregate(tensor, args.kind, args.method)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_rtf(out, view)
    manifest = _manifest_for(args, argv)
    _finish_file(out, manifest, [out, out.with_suffix(".bin")])
    return 0


def cmd_cfar(args, argv) -> int:
    view = read_rtf(args.view)
    detections = cfar_detect(view, args.guard, args.train, args.scale)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"detections": [list(d) for d in detections]},
                              sort_keys=True) + "\n")
    files = [out]
    if args.points:
        if not args.rd_view:
            raise ToolkitError("--points needs --rd-view to attach Doppler values")
        rd_view = read_rtf(args.rd_view)
        pts = doa_points(detections, view, rd_view)
        write_pointcloud_csv(args.points, pts, layout="radar")
        files.append(Path(args.points))
    manifest = _manifest_for(args, argv)
    _finish_file(out, manifest, files)
    return 0


def _parse_seed(text: str) -> tuple[annotate.SeedPoint, int]:
    try:
        xyz, frame = text.split("@")
        x, y, vr = (float(v) for v in xyz.split(","))
        return annotate.SeedPoint(x, y, vr), int(frame)
    except ValueError as exc:
        raise ToolkitError(f"seed must look like x,y,vr@frame, got {text!r}") from exc


def _parse_sigmas(text: str) -> list[float]:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ToolkitError(f"sigmas must look like lo:hi:step, got {text!r}") from exc
    if step <= 0 or hi < lo:
        raise ToolkitError(f"bad bandwidth sweep {text!r}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


def cmd_annotate(args, argv) -> int:
    frames_dir = Path(args.frames)
    if not frames_dir.is_dir():
        raise FileNotFoundError(f"input file not found: {frames_dir}")
    frame_files = sorted(frames_dir.glob("*.csv"))
    if not frame_files:
        raise ToolkitError(f"no DoA CSV frames in {frames_dir}")
    frames = []
    for f in frame_files:
        pts = read_pointcloud_csv(f)
        frames.append(np.array([[p.x, p.y, p.doppler] for p in pts])
                      if pts else np.zeros((0, 3)))
    seed, seed_frame = _parse_seed(args.seed)
    sigmas = _parse_sigmas(args.sigmas)

    if args.axes:
        ax = _load_json(args.axes)
        range_axis = _axis_from_json("range", ax["range"])
        doppler_axis = _axis_from_json("doppler", ax["doppler"])
        angle_axis = (_axis_from_json("angle", ax["angle"])
                      if "angle" in ax else AxisSpec("angle", 180, -90.0, 1.0))
    else:
        range_axis = simulate.RD_RANGE_AXIS
        doppler_axis = simulate.RD_DOPPLER_AXIS
        angle_axis = AxisSpec("angle", 180, -90.0, 1.0)
    view_axes = ((range_axis, doppler_axis) if args.target == "RD"
                 else (range_axis, angle_axis))

    track = annotate.track_sequence(frames, seed, seed_frame, sigmas, args.method,
                                    d_max=args.d_max)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    summary = {}
    for t, cluster in enumerate(track):
        if cluster is None:
            summary[f"{t:03d}"] = {"miss": True}
            continue
        proj = annotate.project(cluster, args.target, view_axes)
        summary[f"{t:03d}"] = {
            "centroid": [float(v) for v in cluster.centroid],
            "n_points": cluster.size, "sigma": cluster.bandwidth,
            "dropped": proj.dropped,
        }
        if not proj.points:
            summary[f"{t:03d}"]["empty_projection"] = True
            continue
        ann = annotate.build_annotation(proj.points, (view_axes[0].bins, view_axes[1].bins),
                                        variant=args.variant, radius=args.dense_radius)
        sp = out / f"sparse_{t:03d}.csv"
        sp.write_text("row,col\n" + "\n".join(
            f"{r},{c}" for r, c in sorted(ann.sparse)) + "\n")
        bp = out / f"box_{t:03d}.json"
        bp.write_text(json.dumps({"min_r": ann.box[0], "min_c": ann.box[1],
                                  "max_r": ann.box[2], "max_c": ann.box[3]},
                                 sort_keys=True) + "\n")
        dp = out / f"dense_{t:03d}.rtf"
        write_rtf(dp, RadarView(args.target, view_axes, ann.dense.astype(np.float32)))
        files += [sp, bp, dp, dp.with_suffix(".bin")]
    tp = out / "track.json"
    tp.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    files.append(tp)
    manifest = _manifest_for(args, argv)
    _finish_dir(out, manifest, files)
    return 0


def cmd_fuse(args, argv) -> int:
    radar = read_pointcloud_csv(args.radar)
    lidar = read_pointcloud_csv(args.lidar)
    spec = sensor_spec_from_json(_load_json(args.spec))
    placeholders = tuple(float(v) for v in args.placeholders.split(","))
    if len(placeholders) != 3:
        raise ToolkitError("placeholders must be sigma,vx,vy")
    fused = fusion.propagate_fuse(radar, lidar, spec, placeholders=placeholders,
                                  scale=args.scale)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_pointcloud_csv(out, fused, layout="fused")
    manifest = _manifest_for(args, argv, config_path=args.spec)
    _finish_file(out, manifest, [out])
    return 0


def _mask_from_rtf(path: Path) -> np.ndarray:
    obj = read_rtf(path)
    return np.asarray(obj.data).astype(np.int64)


def cmd_eval(args, argv) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    names = sorted(p.name for p in pred_dir.glob("*.rtf"))
    if not names:
        raise ToolkitError(f"no prediction masks in {pred_dir}")
    missing = [n for n in names if not (gt_dir / n).exists()]
    if missing:
        raise FileNotFoundError(f"input file not found: {gt_dir / missing[0]}")
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    known = {"iou", "dice", "pp", "pr", "ap"}
    unknown = set(wanted) - known
    if unknown:
        raise ToolkitError(f"unknown metrics {sorted(unknown)}; choose from {sorted(known)}")
    classes = [k for k in range(args.classes) if k not in set(args.exclude_class or [])]

    def one(name: str) -> dict:
        pred = _mask_from_rtf(pred_dir / name)
        gt = _mask_from_rtf(gt_dir / name)
        row: dict = {}
        for k in classes:
            r = {}
            if "iou" in wanted:
                r["iou"] = metrics.iou(pred, gt, k)
            if "dice" in wanted:
                r["dice"] = metrics.dice(pred, gt, k)
            if "pp" in wanted or "pr" in wanted:
                pr = metrics.pixel_precision_recall(pred, gt, k)
                if "pp" in wanted:
                    r["pp"] = pr.precision
                if "pr" in wanted:
                    r["pr"] = pr.recall
            if "ap" in wanted:
                pb = _class_box(pred, k)
                gb = _class_box(gt, k)
                ap, ar = metrics.detection_ap_ar(pb, gb, args.iou_thr)
                r["ap"], r["ar"] = ap, ar
            row[k] = r
        return row

    workers = args.threads or None
    with ThreadPoolExecutor(max_workers=workers) as ex:
        rows = list(ex.map(one, names))

    metric_names = sorted({m for row in rows for r in row.values() for m in r})
    per_class = {}
    for k in classes:
        per_class[str(k)] = {m: float(np.mean([row[k][m] for row in rows]))
                             for m in metric_names}
    aggregate_scores = {}
    for m in metric_names:
        vals = [per_class[str(k)][m] for k in classes]
        aggregate_scores["m_" + m] = metrics.mean_aggregate(vals, "arithmetic")
        aggregate_scores["h_" + m] = metrics.mean_aggregate(vals, "harmonic")
    report = {"files": len(names), "classes": classes, "per_class": per_class,
              "aggregate": aggregate_scores}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    manifest = _manifest_for(args, argv)
    _finish_file(out, manifest, [out])
    return 0


def _class_box(mask: np.ndarray, k: int) -> list[tuple[float, float, float, float]]:
    rows, cols = np.nonzero(mask == k)
    if rows.size == 0:
        return []
    return [(float(rows.min()), float(cols.min()),
             float(rows.max() + 1), float(cols.max() + 1))]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radkit", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a range-Doppler sequence with ground truth")
    p.add_argument("--config", required=True, help="scene JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("process", help="synthesize a frame and run the DFT chain")
    p.add_argument("--chirp", required=True, help="chirp config JSON")
    p.add_argument("--reflectors", required=True, help="reflector list JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("aggregate", help="compress a tensor into a 2D view")
    p.add_argument("--tensor", required=True)
    p.add_argument("--kind", required=True, choices=["RD", "RA", "AD"])
    p.add_argument("--method", default="mean", choices=["mean", "max"])
    p.add_argument("--out", required=True, help="output view .rtf path")
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("cfar", help="cell-averaging CFAR detection on a view")
    p.add_argument("--view", required=True)
    p.add_argument("--guard", type=int, default=2)
    p.add_argument("--train", type=int, default=4)
    p.add_argument("--scale", type=float, default=5.0)
    p.add_argument("--out", required=True, help="detections JSON path")
    p.add_argument("--rd-view", help="RD view used to attach Doppler to points")
    p.add_argument("--points", help="optional radar point-cloud CSV output")
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_cfar)

    p = sub.add_parser("annotate", help="track a seeded cluster and emit annotations")
    p.add_argument("--frames", required=True, help="directory of DoA CSV frames")
    p.add_argument("--seed", required=True, help="x,y,vr@frame")
    p.add_argument("--sigmas", required=True, help="lo:hi:step bandwidth sweep")
    p.add_argument("--method", default="js", choices=["js", "det", "count", "logratio"])
    p.add_argument("--dense-radius", type=float, default=2.0)
    p.add_argument("--variant", default="circle", choices=list(annotate.MORPH_VARIANTS))
    p.add_argument("--target", default="RD", choices=["RD", "RA"])
    p.add_argument("--axes", help="optional axes JSON")
    p.add_argument("--d-max", type=float, default=50.0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("fuse", help="propagate radar info into a lidar cloud and fuse")
    p.add_argument("--radar", required=True)
    p.add_argument("--lidar", required=True)
    p.add_argument("--spec", required=True, help="sensor spec JSON")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--placeholders", default="0,0,0", help="sigma,vx,vy constants")
    p.add_argument("--out", required=True, help="fused CSV path")
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--metrics", default="iou,dice,pp,pr")
    p.add_argument("--iou-thr", type=float, default=0.5)
    p.add_argument("--exclude-class", type=int, action="append")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_eval)
    return parser


def dispatch(argv: list[str]) -> int:
    """Route one command line; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except (ToolkitError, ValueError, IndexError, OSError, KeyError) as exc:
        print(f"radkit: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
