"""Command line interface.

Subcommands: synth, run, eval, ablate, export-ply, dump-graph. All accept
repeated --set key=value overrides on top of a JSON config. Exit codes:
0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PipelineConfig
from .errors import ConfigError, DataError, NumericalError
from . import io as _io
from .metrics import evaluate
from .pipeline import ablate, ablation_table, dump_chunk_graph, run
from .synthetic import SceneSpec, generate_scene, write_scene


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"override must look like key=value: {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _load_config(args) -> PipelineConfig:
    config = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    return config.with_overrides(_parse_overrides(args.set))


def _cmd_synth(args) -> int:
    spec = SceneSpec(seed=args.seed, n_objects=args.objects)
    if args.pair_gap is not None:
        spec.pair_gap = args.pair_gap
    for key, value in _parse_overrides(args.set).items():
        name = key.replace(".", "_")
        if not hasattr(spec, name):
            raise ConfigError(f"unknown scene key {key!r}")
        current = getattr(spec, name)
        if isinstance(current, tuple):
            parts = [float(v) for v in value.split(",")]
            setattr(spec, name, tuple(parts))
        elif isinstance(current, int) and not isinstance(current, bool):
            setattr(spec, name, int(value))
        elif isinstance(current, float) or current is None:
            setattr(spec, name, float(value))
        else:
            setattr(spec, name, value)
    scene = generate_scene(spec)
    outdir = Path(args.out)
    paths = write_scene(scene, outdir)
    config = PipelineConfig(
        scans_dir=paths["scans_dir"], poses_path=paths["poses_path"],
        features_dir=paths["features_dir"], cameras_path=paths["cameras_path"],
        grids_dir=paths["grids_dir"], gt_labels_path=paths["gt_labels_path"],
        output_dir=str(outdir / "out"))
    config.to_json(outdir / "config.json")
    print(json.dumps({"scene": str(outdir), "config": str(outdir / "config.json"),
                      "n_map_points": scene.map.cloud.n,
                      "n_instances": int(scene.gt_labels.max(initial=0))}))
    return 0


def _cmd_run(args) -> int:
    config = _load_config(args)
    result = run(config)
    summary = {"n_instances": result.segmentation.n_instances,
               "n_chunks": len(result.chunks),
               "wall_time": round(result.wall_time, 3)}
    summary.update(result.outputs)
    if result.report is not None:
        summary["f1"] = result.report.f1
        summary["s_assoc"] = result.report.s_assoc
    print(json.dumps(summary))
    return 0


def _cmd_eval(args) -> int:
    pred = _io.read_label_file(args.pred)
    gt = _io.read_label_file(args.gt)
    confidences = None
    if args.confidences:
        raw = json.loads(Path(args.confidences).read_text())
        confidences = {int(k): float(v) for k, v in raw.items()}
    report = evaluate(pred, gt, confidences)
    text = json.dumps(report.as_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_ablate(args) -> int:
    config = _load_config(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("no ablation values given")
    rows = ablate(config, args.param.replace(".", "_"), values)
    table = ablation_table(rows)
    if args.out:
        Path(args.out).write_text(table)
    print(table, end="")
    return 0


def _cmd_export_ply(args) -> int:
    points, _ = _io.read_scan_file(args.map)
    labels = _io.read_label_file(args.labels)
    if len(labels) != len(points):
        raise DataError(f"{len(labels)} labels for {len(points)} points")
    _io.write_ply(args.out, points, labels)
    print(json.dumps({"ply": args.out, "n_points": len(points)}))
    return 0


def _cmd_dump_graph(args) -> int:
    config = _load_config(args)
    dump_chunk_graph(config, args.chunk, args.out)
    print(json.dumps({"edges": args.out, "chunk": args.chunk}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncutseg",
                                     description="Label-free LiDAR instance segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objects", type=int, default=10)
    p.add_argument("--pair-gap", type=float, default=None,
                   help="touching-pair mode with this gap in meters")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a scene spec field")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("run", help="run the segmentation pipeline")
    p.add_argument("--config", required=True, help="JSON pipeline config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="evaluate a label file against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--confidences", default=None, help="JSON id->confidence map")
    p.add_argument("--out", default=None, help="write the report JSON here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="sweep one config parameter")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma separated numbers")
    p.add_argument("--out", default=None, help="write the TSV table here")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("export-ply", help="color a map by instance labels")
    p.add_argument("--map", required=True, help="map points file from a run")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_ply)

    p = sub.add_parser("dump-graph", help="write one chunk's edge list")
    p.add_argument("--config", required=True)
    p.add_argument("--chunk", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_dump_graph)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
