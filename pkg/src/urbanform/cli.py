"""Command-line interface.

Subcommands run the pipeline up to (and including) the named stage,
reusing cached stage outputs; ``pipeline`` runs everything and ``synth``
writes a planted synthetic dataset plus a ready-to-run config file.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 stage
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError, DataError, StageError
from .pipeline import PipelineConfig, config_from_mapping, parse_config, run_pipeline
from .synthetic import generate_synthetic

_STAGE_OF_COMMAND = {
    "ingest": "ingest",
    "features": "features",
    "graph": "graphs",
    "train": "train_evaluate",
    "evaluate": "train_evaluate",
    "explain": "explain",
    "symbolize": "symbolize",
    "analyze": "analyze",
    "pipeline": "analyze",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="global seed override")
    parser.add_argument("--out", help="output directory override")
    parser.add_argument(
        "--deterministic",
        action="store_true",
        help="omit timings from the manifest so reruns are byte-identical",
    )
    parser.add_argument(
        "--resume", action="store_true", help="reuse cached stage outputs"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urbanform",
        description="building morphometrics, block graphs, an explainable "
        "graph classifier of urban function, and efficiency regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command in _STAGE_OF_COMMAND:
        p = sub.add_parser(command, help=f"run the pipeline through '{command}'")
        _add_common(p)
    synth = sub.add_parser("synth", help="generate a synthetic planted dataset")
    synth.add_argument("--out", required=True, help="dataset output directory")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--blocks-per-class", type=int, default=50)
    synth.add_argument(
        "--classes",
        default="commercial,residential,institutional",
        help="comma-separated function labels (2 or 3)",
    )
    return parser


def _load_config(args) -> PipelineConfig:
    if args.config:
        cfg = parse_config(args.config)
    else:
        cfg = config_from_mapping({})
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.model.seed = args.seed
    if args.out:
        cfg.out = args.out
    if args.deterministic:
        cfg.deterministic = True
    if args.resume:
        cfg.resume = True
    return cfg


def _print_metrics(out_dir: str) -> None:
    path = os.path.join(out_dir, "train_evaluate", "metrics_report.json")
    with open(path) as fh:
        report = json.load(fh)
    for name, value in sorted(report["metrics"].items()):
        print(f"{name}: {value:.4f}")
    for label, value in sorted(report["per_class_recall"].items()):
        print(f"recall[{label}]: {value:.4f}")


def _run_synth(args) -> int:
    labels = tuple(c.strip() for c in args.classes.split(",") if c.strip())
    paths = generate_synthetic(
        args.out, blocks_per_class=args.blocks_per_class, seed=args.seed,
        class_labels=labels,
    )
    with open(paths.metadata) as fh:
        center = json.load(fh)["city_center"]
    config_path = os.path.join(args.out, "pipeline.cfg")
    with open(config_path, "w") as fh:
        fh.write(
            "\n".join(
                [
                    "buildings = buildings.geojson",
                    "blocks = blocks.geojson",
                    "neighborhoods = neighborhoods.geojson",
                    f"city_center_x = {center[0]}",
                    f"city_center_y = {center[1]}",
                    f"seed = {args.seed}",
                    "out = run",
                    "",
                ]
            )
        )
    print(f"dataset written under {args.out} (config: {config_path})")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return _run_synth(args)
        cfg = _load_config(args)
        manifest = run_pipeline(cfg, through=_STAGE_OF_COMMAND[args.command])
        for stage in manifest.stages:
            print(f"stage {stage.name}: {stage.status}")
        if args.command == "evaluate":
            _print_metrics(cfg.out)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except StageError as exc:
        print(f"{exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
