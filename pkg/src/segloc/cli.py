"""Command-line interface: simulate, track, segment.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import load_scenario
from .errors import ConfigError, SeglocError
from .harness import load_track_frames, run_experiment, run_segment, run_track
from .metrics import TargetTruth

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segloc",
        description="Localise distant static targets in 3D from segmentation masks and camera poses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run seeded synthetic experiments")
    sim.add_argument("--config", required=True, help="scenario JSON file or bundled preset name")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seeds", type=int, default=None, help="override n_seeds")
    sim.add_argument("--base-seed", type=int, default=None, help="override base_seed")
    sim.add_argument("--dump-frames", action="store_true", help="dump masks and frame metadata")
    sim.add_argument("--dump-stride", type=int, default=None, help="dump every k-th mask")
    sim.add_argument("--workers", type=int, default=1, help="parallel seed workers")

    trk = sub.add_parser("track", help="run the tracker on pre-segmented frames")
    trk.add_argument("--masks", required=True, help="directory of PGM masks named by frame index")
    trk.add_argument("--poses", required=True, help="frames.jsonl dump or pose-log CSV")
    trk.add_argument("--config", required=True, help="scenario JSON file or bundled preset name")
    trk.add_argument("--out", required=True, help="output directory")
    trk.add_argument("--base-seed", type=int, default=0)
    trk.add_argument("--step-m", type=float, default=None, help="subsample frames by translation")
    trk.add_argument("--truth", default=None, help="JSON file of ground-truth targets")

    seg = sub.add_parser("segment", help="convert grayscale PGM frames to masks")
    seg.add_argument("--images", required=True, help="directory of grayscale PGM frames")
    seg.add_argument("--out", required=True, help="output directory")
    seg.add_argument("--threshold", type=int, default=64)
    seg.add_argument("--erode", type=int, default=1)
    seg.add_argument("--dilate", type=int, default=2)
    return parser


def _load_truths(path) -> list[TargetTruth]:
    data = json.loads(Path(path).read_text())
    return [
        TargetTruth(int(t["target_id"]), np.asarray(t["centre"], dtype=float)) for t in data
    ]


def _cmd_simulate(args) -> int:
    cfg = load_scenario(args.config)
    if args.seeds is not None:
        cfg.n_seeds = args.seeds
    if args.base_seed is not None:
        cfg.base_seed = args.base_seed
    if args.dump_frames:
        cfg.output.dump_frames = True
    if args.dump_stride is not None:
        cfg.output.dump_stride = args.dump_stride
    if cfg.n_seeds < 1:
        raise ConfigError("n_seeds", "must be >= 1")
    run_experiment(cfg, args.out, workers=max(1, args.workers))
    return EXIT_OK


def _cmd_track(args) -> int:
    cfg = load_scenario(args.config)
    frames = load_track_frames(args.masks, args.poses, step_m=args.step_m)
    truths = _load_truths(args.truth) if args.truth else None
    run_track(
        cfg.camera,
        cfg.filter_params,
        cfg.tracker_params,
        frames,
        args.base_seed,
        args.out,
        truths,
    )
    return EXIT_OK


def _cmd_segment(args) -> int:
    run_segment(
        args.images,
        args.out,
        sobel_threshold=args.threshold,
        erode_iterations=args.erode,
        dilate_iterations=args.dilate,
    )
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"simulate": _cmd_simulate, "track": _cmd_track, "segment": _cmd_segment}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SeglocError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
