"""Sequence export: one SEKP per frame, SEMT per requested frame pair."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .classical import ClassicalConfig, detect_and_describe
from .formats import FrameKeypoints, read_sekp, write_sekp, write_semt
from .frames import discover_frames, load_gray
from .matching import match_mutual

__all__ = ["ExportConfig", "export_sequence", "match_frames"]

Detector = Callable[[np.ndarray], tuple]


@dataclass(frozen=True)
class ExportConfig:
    backend: str = "classical"
    min_similarity: float = 0.2
    classical: ClassicalConfig = field(default_factory=ClassicalConfig)
    detector_id: str = "harris-patch16"


def _build_detector(cfg: ExportConfig) -> Detector:
    if cfg.backend == "classical":
        return lambda image: detect_and_describe(image, cfg.classical)
    if cfg.backend == "superpoint":
        from .superpoint import SuperPointBackend, SuperPointConfig

        return SuperPointBackend(SuperPointConfig(**getattr(cfg, "superpoint_kwargs", {})))
    raise ValueError(f"unknown backend {cfg.backend!r}")


def export_sequence(
    frames_dir: Path | str,
    out_dir: Path | str,
    cfg: ExportConfig = ExportConfig(),
    pairs: Sequence[tuple[int, int]] | None = None,
    detector: Detector | None = None,
) -> dict:
    """Detect, describe, match, and write the manifest; returns it as a dict.

    `pairs` lists the (ref, target) frame indices to match; by default every
    consecutive pair. Blank frames export with zero keypoints rather than
    failing, so downstream filtering sees the full sequence.
    """
    frames_dir = Path(frames_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = discover_frames(frames_dir)
    detector = detector if detector is not None else _build_detector(cfg)

    sekp_paths: list[Path] = []
    for frame in frames:
        us, vs, scores, descriptors = detector(load_gray(frame.path))
        path = out_dir / f"{frame.tau_us:012d}.sekp"
        write_sekp(FrameKeypoints(frame.tau_us, us, vs, scores, descriptors), path)
        sekp_paths.append(path)

    if pairs is None:
        pairs = [(i, i + 1) for i in range(len(frames) - 1)]
    match_records = []
    for i, j in pairs:
        semt_path = match_frames(sekp_paths[i], sekp_paths[j],
                                 out_dir / f"match_{i:05d}_{j:05d}.semt",
                                 cfg.min_similarity)
        match_records.append({"ref": i, "tgt": j, "semt": semt_path.name})

    manifest = {
        "sequence": frames_dir.name,
        "detector": cfg.detector_id if cfg.backend == "classical" else cfg.backend,
        "min_similarity": cfg.min_similarity,
        "frames": [
            {"tau_us": f.tau_us, "image": f.path.name, "sekp": p.name}
            for f, p in zip(frames, sekp_paths)
        ],
        "matches": match_records,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def match_frames(sekp_a: Path | str, sekp_b: Path | str, out_path: Path | str,
                 min_similarity: float = 0.2) -> Path:
    """Match two exported frames and write the SEMT next to them."""
    for path in (sekp_a, sekp_b):
        if not Path(path).exists():
            raise FileNotFoundError(f"missing SEKP file: {path}")
    matches = match_mutual(read_sekp(sekp_a), read_sekp(sekp_b), min_similarity)
    out_path = Path(out_path)
    write_semt(matches, out_path)
    return out_path
