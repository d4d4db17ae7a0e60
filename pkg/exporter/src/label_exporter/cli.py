"""CLI: export frame sequences to SEKP/SEMT files."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .classical import ClassicalConfig
from .export import ExportConfig, export_sequence

__all__ = ["main"]


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="label-exporter",
        description="Run a frame-based keypoint detector and matcher over "
        "grayscale frames and export SEKP/SEMT files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    export = sub.add_parser("export", help="export one frame sequence")
    export.add_argument("--frames", required=True, help="directory of grayscale frames")
    export.add_argument("--out", required=True, help="output directory")
    export.add_argument("--pairs", default=None,
                        help="JSON file with [[ref, tgt], ...] frame-index pairs "
                             "(default: consecutive)")
    export.add_argument("--backend", choices=("classical", "superpoint"),
                        default="classical")
    export.add_argument("--weights", default=None,
                        help="superpoint checkpoint path (required for that backend)")
    export.add_argument("--weights-sha256", default=None,
                        help="pin the checkpoint to this digest")
    export.add_argument("--max-keypoints", type=int, default=512)
    export.add_argument("--min-similarity", type=float, default=0.2,
                        help="match acceptance threshold")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        pairs = None
        if args.pairs:
            pairs = [tuple(p) for p in json.loads(Path(args.pairs).read_text())]
        cfg = ExportConfig(
            backend=args.backend,
            min_similarity=args.min_similarity,
            classical=ClassicalConfig(max_keypoints=args.max_keypoints),
        )
        detector = None
        if args.backend == "superpoint":
            from .superpoint import SuperPointBackend, SuperPointConfig

            detector = SuperPointBackend(SuperPointConfig(
                weights=args.weights,
                weights_sha256=args.weights_sha256,
                max_keypoints=args.max_keypoints,
            ))
        manifest = export_sequence(args.frames, args.out, cfg, pairs, detector)
        print(f"exported {len(manifest['frames'])} frame(s), "
              f"{len(manifest['matches'])} match file(s) to {args.out}")
        return 0
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
