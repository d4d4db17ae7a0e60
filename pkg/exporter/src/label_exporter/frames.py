"""Frame discovery: grayscale images with timestamps in their filenames."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

__all__ = ["Frame", "discover_frames", "load_gray"]

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".pgm", ".bmp", ".tif", ".tiff")
_TIMESTAMP = re.compile(r"(\d+)")


@dataclass(frozen=True)
class Frame:
    tau_us: int
    path: Path


def parse_timestamp_us(path: Path) -> int:
    """Last digit run of the stem, read as microseconds."""
    hits = _TIMESTAMP.findall(path.stem)
    if not hits:
        raise ValueError(f"{path}: no timestamp digits in filename")
    return int(hits[-1])


def discover_frames(directory: Path | str) -> list[Frame]:
    directory = Path(directory)
    frames = [
        Frame(parse_timestamp_us(p), p)
        for p in sorted(directory.iterdir())
        if p.suffix.lower() in IMAGE_SUFFIXES
    ]
    if not frames:
        raise ValueError(f"{directory}: no frame images found")
    frames.sort(key=lambda f: f.tau_us)
    taus = [f.tau_us for f in frames]
    if len(set(taus)) != len(taus):
        raise ValueError(f"{directory}: duplicate frame timestamps")
    return frames


def load_gray(path: Path | str) -> np.ndarray:
    """Image as float32 grayscale in [0, 1]."""
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise ValueError(f"{path}: unreadable image")
    return img.astype(np.float32) / 255.0
