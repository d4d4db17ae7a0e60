"""Command-line interface: batch workflows over the library modules.

Subcommands: `mcts build`, `labels generate`, `match`, `bench pose`, and
`selftest`. All randomness is seeded through the TOML config, so repeated
runs over the same inputs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import labelgen as lg
from .config import ConfigError, RunConfig, load_config
from .events import FormatError, read_events, read_intrinsics, read_trajectory
from .matching import match_mutual_nn, read_keypoints, write_matches
from .posebench import (
    run_benchmark,
    write_cumulative_curve_csv,
    write_report_csv,
    write_report_json,
)
from .providers import RefNetProvider, SekpDirectoryProvider
from .refnet import RefNet
from .representation import build_mcts, write_mcts
from .selftest import run_selftest

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="superevent",
        description="Event-stream keypoint pipeline: representations, matching, "
        "pseudo-labels, and the pose-estimation benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    mcts = sub.add_parser("mcts", help="time-surface tensors")
    mcts_sub = mcts.add_subparsers(dest="subcommand", required=True)
    build = mcts_sub.add_parser("build", help="materialize MCTS containers at timestamps")
    build.add_argument("--events", required=True, help="EVT1 or CSV event file")
    build.add_argument("--at", required=True,
                       help="comma-separated evaluation timestamps in µs")
    build.add_argument("--out", required=True, help="output directory")
    build.add_argument("--config", default=None, help="TOML run configuration")

    labels = sub.add_parser("labels", help="training-pair generation")
    labels_sub = labels.add_subparsers(dest="subcommand", required=True)
    gen = labels_sub.add_parser("generate", help="emit label pairs from SEKP frames")
    gen.add_argument("--frames", required=True,
                     help="directory of SEKP files, or of per-sequence subdirectories")
    gen.add_argument("--config", default=None, help="TOML run configuration")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--exclude", default=None, help="sequence exclusion list file")

    match = sub.add_parser("match", help="match two SEKP files")
    match.add_argument("--a", required=True)
    match.add_argument("--b", required=True)
    match.add_argument("--min-sim", type=float, default=None,
                       help="similarity acceptance threshold (default from config)")
    match.add_argument("--out", default=None, help="SEMT output path")
    match.add_argument("--config", default=None)

    bench = sub.add_parser("bench", help="evaluation benchmarks")
    bench_sub = bench.add_subparsers(dest="subcommand", required=True)
    pose = bench_sub.add_parser("pose", help="rotation-change pose estimation")
    pose.add_argument("--trajectory", required=True, help="TUM ground-truth trajectory")
    pose.add_argument("--predictions", default=None, help="directory of SEKP predictions")
    pose.add_argument("--refnet", action="store_true",
                      help="predict with the seeded reference network instead of files")
    pose.add_argument("--events", default=None,
                      help="event file (EVT1/CSV), required with --refnet")
    pose.add_argument("--intrinsics", required=True, help="intrinsics JSON")
    pose.add_argument("--config", default=None)
    pose.add_argument("--out", required=True, help="report output directory")
    pose.add_argument("--curves", action="store_true",
                      help="also write per-threshold cumulative-curve CSVs")
    pose.add_argument("--threads", type=int, default=None)
    pose.add_argument("--pred-tolerance-us", type=int, default=0,
                      help="timestamp slack when looking up prediction files")

    selftest = sub.add_parser("selftest", help="run the built-in oracle suites")
    selftest.add_argument("--bench", action="store_true",
                          help="also measure ingestion/materialization throughput")
    selftest.add_argument("--full", action="store_true", help="larger case counts")
    return parser


def _cmd_mcts_build(args) -> int:
    cfg = load_config(args.config)
    stream = read_events(args.events)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        taus = [int(v) for v in args.at.split(",") if v.strip()]
    except ValueError:
        raise FormatError(f"--at expects comma-separated integers, got {args.at!r}")
    for tau in taus:
        mcts = build_mcts(stream, tau, cfg.windows)
        write_mcts(mcts, out / f"mcts_{tau:012d}.mcts")
    print(f"wrote {len(taus)} MCTS container(s) to {out}")
    return 0


def _sequence_dirs(frames_dir: Path) -> list[tuple[str, Path]]:
    if list(frames_dir.glob("*.sekp")):
        return [(frames_dir.name, frames_dir)]
    seqs = [(p.name, p) for p in sorted(frames_dir.iterdir())
            if p.is_dir() and list(p.glob("*.sekp"))]
    if not seqs:
        raise FormatError(f"{frames_dir}: no SEKP files found")
    return seqs


def _cmd_labels_generate(args) -> int:
    cfg = load_config(args.config)
    frames_dir = Path(args.frames)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    excluded = lg.read_exclusions(args.exclude) if args.exclude else set()
    records = []
    for seq_name, seq_dir in _sequence_dirs(frames_dir):
        if seq_name in excluded:
            continue
        paths = sorted(seq_dir.glob("*.sekp"))
        frames = [read_keypoints(p) for p in paths]
        order = np.argsort([f.tau_us for f in frames], kind="stable")
        frames = [frames[i] for i in order]
        paths = [paths[i] for i in order]

        def matcher(i: int, j: int):
            return match_mutual_nn(frames[i], frames[j],
                                   cfg.matcher.min_similarity, cfg.matcher.mutual)

        pairs = lg.generate_pairs(frames, matcher, cfg.labelgen)
        max_v = max((float(f.v.max()) for f in frames if len(f)), default=0.0)
        max_u = max((float(f.u.max()) for f in frames if len(f)), default=0.0)
        cell_rows = max(1, int(max_v) // 8 + 1)
        cell_cols = max(1, int(max_u) // 8 + 1)
        seq_out = out / seq_name
        seq_out.mkdir(exist_ok=True)
        for n, pair in enumerate(pairs):
            seed = int(np.random.SeedSequence(
                [cfg.labelgen.seed, pair.tau_ref_us, pair.tau_tgt_us]
            ).generate_state(1)[0])
            det_ref, det_tgt, desc = lg.rasterize_targets(pair, cell_rows, cell_cols, seed)
            semt_path = seq_out / f"pair_{n:05d}.semt"
            npz_path = seq_out / f"pair_{n:05d}_targets.npz"
            write_matches(pair.matches, semt_path)
            np.savez(
                npz_path,
                classes_ref=det_ref.classes,
                classes_tgt=det_tgt.classes,
                pairs=desc.pairs,
                labeled_ref=desc.labeled0,
                labeled_tgt=desc.labeled1,
            )
            records.append(
                {
                    "sequence": seq_name,
                    "frame_ref": pair.frame_ref,
                    "frame_tgt": pair.frame_tgt,
                    "tau_ref_us": pair.tau_ref_us,
                    "tau_tgt_us": pair.tau_tgt_us,
                    "sekp_ref": str(paths[pair.frame_ref]),
                    "sekp_tgt": str(paths[pair.frame_tgt]),
                    "matches": str(semt_path),
                    "targets": str(npz_path),
                }
            )
    lg.write_manifest(records, out / "manifest.jsonl")
    print(f"wrote {len(records)} label pair(s) to {out / 'manifest.jsonl'}")
    return 0


def _cmd_match(args) -> int:
    cfg = load_config(args.config)
    kps_a = read_keypoints(args.a)
    kps_b = read_keypoints(args.b)
    min_sim = args.min_sim if args.min_sim is not None else cfg.matcher.min_similarity
    matches = match_mutual_nn(kps_a, kps_b, min_sim, cfg.matcher.mutual)
    out = Path(args.out) if args.out else Path(f"{Path(args.a).stem}__{Path(args.b).stem}.semt")
    write_matches(matches, out)
    mean_sim = float(matches.similarity.mean()) if len(matches) else 0.0
    print(f"{len(matches)} match(es) between τ={kps_a.tau_us} and τ={kps_b.tau_us} "
          f"(mean similarity {mean_sim:.4f}) -> {out}")
    return 0


def _cmd_bench_pose(args) -> int:
    cfg = load_config(args.config)
    trajectory = read_trajectory(args.trajectory)
    intrinsics = read_intrinsics(args.intrinsics)
    if args.refnet:
        if not args.events:
            raise FormatError("--refnet requires --events")
        stream = read_events(args.events)
        provider = RefNetProvider(
            stream,
            RefNet.create(in_channels=2 * len(cfg.windows)),
            cfg.windows,
            cfg.detection.radius,
            cfg.detection.min_score,
            cfg.detection.top_k,
        )
    elif args.predictions:
        provider = SekpDirectoryProvider(args.predictions, args.pred_tolerance_us)
    else:
        raise FormatError("one of --predictions or --refnet is required")
    threads = args.threads if args.threads else (cfg.threads or None)
    report = run_benchmark(trajectory, provider, intrinsics, cfg.bench, threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(report, out / "report.csv")
    write_report_json(report, out / "summary.json")
    if args.curves:
        for threshold in cfg.bench.auc_thresholds:
            write_cumulative_curve_csv(
                report, threshold, out / f"curve_{threshold:g}deg.csv"
            )
    auc_str = " ".join(f"auc@{t:g}°={v:.4f}" for t, v in report.auc.items())
    print(f"{report.num_samples} sample(s), {report.num_failures} failure(s), "
          f"{report.num_skipped} skipped | {auc_str}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "mcts":
            return _cmd_mcts_build(args)
        if args.command == "labels":
            return _cmd_labels_generate(args)
        if args.command == "match":
            return _cmd_match(args)
        if args.command == "bench":
            return _cmd_bench_pose(args)
        if args.command == "selftest":
            return run_selftest(bench=args.bench, fast=not args.full)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except (FormatError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: input: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: invalid: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
