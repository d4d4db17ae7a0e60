"""Prediction providers for the benchmark harness.

A provider maps a timestamp (µs) to a KeypointSet or None when it has no
prediction there. File-backed providers serve pre-computed SEKP sets;
the reference-network provider runs the whole event pipeline on demand.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Optional

import numpy as np

from . import detection
from .events import EventStream, FormatError
from .matching import KeypointSet, normalize_grid, read_keypoints, sample_descriptors
from .refnet import RefNet
from .representation import DEFAULT_WINDOWS, WindowsLike, build_mcts

__all__ = ["SekpDirectoryProvider", "RefNetProvider"]

_SEKP_PREFIX = struct.Struct("<4sHQ")


def _peek_tau(path: Path) -> int:
    with open(path, "rb") as fh:
        head = fh.read(_SEKP_PREFIX.size)
    if len(head) < _SEKP_PREFIX.size:
        raise FormatError(f"{path}: truncated SEKP header")
    magic, version, tau_us = _SEKP_PREFIX.unpack(head)
    if magic != b"SEKP" or version != 1:
        raise FormatError(f"{path}: not a readable SEKP file")
    return tau_us


class SekpDirectoryProvider:
    """Serves keypoint sets from a directory of SEKP files, keyed by their
    header timestamp. Lookups farther than `tolerance_us` from any file
    return None."""

    def __init__(self, directory: Path | str, tolerance_us: int = 0):
        self.directory = Path(directory)
        self._paths: dict[int, Path] = {}
        for path in sorted(self.directory.glob("*.sekp")):
            self._paths[_peek_tau(path)] = path
        self._taus = np.array(sorted(self._paths), dtype=np.int64)
        self.tolerance_us = tolerance_us

    def __len__(self) -> int:
        return len(self._paths)

    def timestamps(self) -> list[int]:
        return [int(t) for t in self._taus]

    def __call__(self, tau_us: int) -> Optional[KeypointSet]:
        if len(self._taus) == 0:
            return None
        pos = int(np.searchsorted(self._taus, tau_us))
        best, dist = None, None
        for cand in (pos - 1, pos):
            if 0 <= cand < len(self._taus):
                d = abs(int(self._taus[cand]) - tau_us)
                if dist is None or d < dist:
                    best, dist = int(self._taus[cand]), d
        if best is None or dist > self.tolerance_us:
            return None
        return read_keypoints(self._paths[best])


class RefNetProvider:
    """Runs MCTS construction, the reference network, decoding, NMS, and
    descriptor sampling at any requested timestamp of an event stream."""

    def __init__(
        self,
        stream: EventStream,
        net: RefNet | None = None,
        windows: WindowsLike = DEFAULT_WINDOWS,
        radius: int = detection.DEFAULT_NMS_RADIUS,
        min_score: float = detection.DEFAULT_MIN_SCORE,
        top_k: int | None = None,
    ):
        self.stream = stream
        self.windows = windows
        self.net = net if net is not None else RefNet.create(in_channels=2 * len(windows))
        self.radius = radius
        self.min_score = min_score
        self.top_k = top_k

    def __call__(self, tau_us: int) -> Optional[KeypointSet]:
        mcts = build_mcts(self.stream, tau_us, self.windows)
        h8, w8 = (mcts.height // 8) * 8, (mcts.width // 8) * 8
        prediction = self.net.forward(mcts.data[:, :h8, :w8])
        heatmap = detection.decode_cells(prediction.cells)
        kps = detection.detect(heatmap, self.radius, self.min_score, self.top_k)
        if not kps:
            return KeypointSet.empty(tau_us, prediction.descriptors.shape[2])
        u = np.array([k.u for k in kps], dtype=np.float32)
        v = np.array([k.v for k in kps], dtype=np.float32)
        s = np.array([k.s for k in kps], dtype=np.float32)
        grid = normalize_grid(prediction.descriptors)
        return KeypointSet(tau_us, u, v, s, sample_descriptors(grid, u, v))
