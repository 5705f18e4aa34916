"""Command-line entry point.

Subcommands: run, render, eval, simulate, serve, label-convert.
Exit codes: 0 ok, 1 usage, 2 IO/format, 3 config.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .config import PipelineConfig, apply_overrides, load_config
from .egomotion import read_tum, relative_to_world, world_to_relative, write_tum
from .errors import ConfigError, DynoscanError, FormatError
from .evaluation import evaluate_labels, DEFAULT_MAX_DT
from .frames import FrameFile, project, write_frames
from .labels import (LABEL_MAGIC, read_labels_binary, read_labels_jsonl,
                     write_labels_binary, write_labels_jsonl)
from .pipeline import Pipeline
from .render import render_frame
from .simulator import DriftParams, inject_drift, load_scene, simulate


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    return apply_overrides(cfg, args.set or [])


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; defaults used when omitted")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override one config entry (repeatable; wins over the file)")


def _read_labels_any(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
    return read_labels_binary(path) if magic == LABEL_MAGIC else read_labels_jsonl(path)


def _write_labels_by_ext(labels, path):
    if str(path).endswith((".dynl", ".bin")):
        write_labels_binary(labels, path)
    else:
        write_labels_jsonl(labels, path)


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    source = FrameFile(args.frames)
    odometry_in = None
    if args.odometry_in:
        _, world = read_tum(args.odometry_in)
        odometry_in = world_to_relative(world)

    pipe = Pipeline(cfg, odometry_in)
    labels, worlds, timestamps, totals = [], [], [], []
    verdicts_fh = open(args.verdicts_out, "w") if args.verdicts_out else None
    timings_fh = open(args.timings_out, "w") if args.timings_out else None
    if timings_fh:
        timings_fh.write("frame,project,foreground,odometry,clustering,"
                         "association,dynamics,segmentation,total\n")
    flagged = 0
    try:
        for frame in source:
            r = pipe.process(frame)
            labels.append(r.label)
            worlds.append(r.world)
            timestamps.append(r.timestamp)
            totals.append(r.timings.get("total", 0.0))
            flagged += bool(r.flags)
            if verdicts_fh:
                for v in r.verdicts:
                    verdicts_fh.write(json.dumps(v.record()) + "\n")
            if timings_fh:
                t = r.timings
                timings_fh.write(
                    f"{r.index}," + ",".join(
                        f"{t.get(k, 0.0):.3f}" for k in
                        ("project", "foreground", "odometry", "clustering",
                         "association", "dynamics", "segmentation", "total")) + "\n")
    finally:
        if verdicts_fh:
            verdicts_fh.close()
        if timings_fh:
            timings_fh.close()

    _write_labels_by_ext(labels, args.labels_out)
    if args.odometry_out:
        write_tum(args.odometry_out, timestamps, worlds)
    dynamic_frames = sum(1 for lb in labels if len(lb))
    mean_ms = float(np.mean(totals)) if totals else 0.0
    p99_ms = float(np.percentile(totals, 99)) if totals else 0.0
    print(f"processed {len(labels)} frames: {dynamic_frames} with dynamic points, "
          f"{flagged} flagged; mean {mean_ms:.1f} ms/frame, p99 {p99_ms:.1f} ms")
    return 0


def _cmd_render(args) -> int:
    cfg = _config_from_args(args)
    sensor = cfg.sensor()
    source = FrameFile(args.frames)
    labels = _read_labels_any(args.labels) if args.labels else []
    by_time = {lb.timestamp: lb for lb in labels}
    os.makedirs(args.out, exist_ok=True)
    period = 1.0 / cfg.rate_hz
    count = args.count if args.count >= 0 else len(source)
    rendered = 0
    for i in range(args.start, min(len(source), args.start + count)):
        frame = source.frame(i)
        image = project(frame, sensor)
        label = by_time.get(frame.timestamp)
        if label is None:
            from .labels import DynamicLabel
            near = [lb for lb in labels if abs(lb.timestamp - frame.timestamp) <= period / 2]
            label = near[0] if near else DynamicLabel(frame.timestamp)
        render_frame(args.out, i, image, label, sensor)
        rendered += 1
    print(f"rendered {rendered} frames into {args.out}")
    return 0


def _cmd_eval(args) -> int:
    pred = _read_labels_any(args.pred)
    gt = _read_labels_any(args.gt)
    report = evaluate_labels(pred, gt, args.max_dt)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    if args.series:
        with open(args.series, "w", encoding="utf-8") as fh:
            fh.write("frame,t,precision,recall,iou,f1\n")
            for i, fs in enumerate(report.frames):
                m = fs.metrics
                fh.write(f"{i},{fs.timestamp:.6f},{m.precision:.6f},"
                         f"{m.recall:.6f},{m.iou:.6f},{m.f1:.6f}\n")
    m = report.micro
    print(f"precision {m.precision:.3f}  iou {m.iou:.3f}  recall {m.recall:.3f}  "
          f"f1 {m.f1:.3f}  ({report.matched} matched frames)")
    return 0


def _cmd_simulate(args) -> int:
    scene = load_scene(args.scene)
    result = simulate(scene)
    if args.frames_out:
        write_frames(result.frames, args.frames_out)
    if args.labels_out:
        _write_labels_by_ext(result.labels, args.labels_out)
    if args.poses_out:
        timestamps = [f.timestamp for f in result.frames]
        write_tum(args.poses_out, timestamps, result.world)
    if args.drifted_poses_out:
        params = DriftParams(args.drift_sigma_t, math.radians(args.drift_sigma_r_deg),
                             args.drift_seed)
        drifted = inject_drift(result.relative, params)
        timestamps = [f.timestamp for f in result.frames]
        write_tum(args.drifted_poses_out, timestamps, relative_to_world(drifted))
    print(f"simulated {len(result.frames)} frames of scene '{scene.name}'")
    return 0


def _cmd_serve(args) -> int:
    from .server import AnnotationServer
    cfg = _config_from_args(args)
    source = FrameFile(args.frames)
    labels_path = args.labels or (args.frames + ".labels.jsonl")
    server = AnnotationServer(source, cfg, labels_path, args.host, args.port)
    print(f"serving {len(source)} frames on http://{args.host}:{server.port} "
          f"(labels: {labels_path})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def _cmd_label_convert(args) -> int:
    labels = _read_labels_any(args.input)
    if args.to == "jsonl":
        write_labels_jsonl(labels, args.output)
    else:
        write_labels_binary(labels, args.output)
    print(f"wrote {len(labels)} frame labels to {args.output}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="dynoscan",
                     description="Dynamic-object detection on spinning-LiDAR scans")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run the detection pipeline over a frame file")
    p.add_argument("--frames", required=True, help="input DYNF frame file")
    p.add_argument("--labels-out", required=True, help="predicted labels (.jsonl or .dynl)")
    p.add_argument("--odometry-in", help="TUM poses to use instead of built-in odometry")
    p.add_argument("--odometry-out", help="write accumulated world poses (TUM)")
    p.add_argument("--verdicts-out", help="write per-track verdicts (JSONL)")
    p.add_argument("--timings-out", help="write per-frame stage timings (CSV)")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("render", help="render intensity/overlay images and 3D dumps")
    p.add_argument("--frames", required=True)
    p.add_argument("--labels", help="label file to overlay (.jsonl or .dynl)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--count", type=int, default=-1, help="-1 renders to the end")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("eval", help="score predicted labels against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", help="write aggregate metrics (JSON)")
    p.add_argument("--series", help="write per-frame metric series (CSV)")
    p.add_argument("--max-dt", type=float, default=DEFAULT_MAX_DT,
                   help="timestamp matching tolerance, seconds")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("simulate", help="generate frames/labels/poses from a scene")
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--frames-out", help="write DYNF frames")
    p.add_argument("--labels-out", help="write ground-truth labels (.jsonl or .dynl)")
    p.add_argument("--poses-out", help="write exact world poses (TUM)")
    p.add_argument("--drifted-poses-out", help="write drift-injected poses (TUM)")
    p.add_argument("--drift-sigma-t", type=float, default=0.0, help="m per frame")
    p.add_argument("--drift-sigma-r-deg", type=float, default=0.0, help="deg per frame")
    p.add_argument("--drift-seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("serve", help="serve frames and labels for the annotator UI")
    p.add_argument("--frames", required=True)
    p.add_argument("--labels", help="label JSONL path (default <frames>.labels.jsonl)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("label-convert", help="convert labels between JSONL and binary")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--to", choices=["jsonl", "binary"], required=True)
    p.set_defaults(func=_cmd_label_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except (FormatError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except DynoscanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
