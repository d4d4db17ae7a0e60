"""SEKP / SEMT interchange containers.

Independent implementation of the binary keypoint and match formats this
exporter targets; the consuming pipeline ships its own reader, and the
golden fixtures in its test suite hold both sides to the same bytes.

SEKP: magic `SEKP`, u16 version=1, u64 tau_us, u32 K, u32 D,
      K x {f32 u, f32 v, f32 s}, then K x D f32 descriptors (LE).
SEMT: magic `SEMT`, u16 version=1, u64 tau_a, u64 tau_b, u32 M,
      M x {u32 i, u32 j, f32 sim} (LE).
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["FrameKeypoints", "FrameMatches", "write_sekp", "read_sekp",
           "write_semt", "read_semt"]

_SEKP_HEADER = struct.Struct("<4sHQII")
_SEMT_HEADER = struct.Struct("<4sHQQI")
_POINT_DTYPE = np.dtype([("u", "<f4"), ("v", "<f4"), ("s", "<f4")])
_MATCH_DTYPE = np.dtype([("i", "<u4"), ("j", "<u4"), ("sim", "<f4")])


@dataclass(frozen=True)
class FrameKeypoints:
    tau_us: int
    u: np.ndarray
    v: np.ndarray
    score: np.ndarray
    descriptors: np.ndarray  # (K, D), unit rows

    def __len__(self) -> int:
        return len(self.u)


@dataclass(frozen=True)
class FrameMatches:
    tau_a_us: int
    tau_b_us: int
    index_a: np.ndarray
    index_b: np.ndarray
    similarity: np.ndarray

    def __len__(self) -> int:
        return len(self.index_a)


def _atomic_write(path: Path, payload: bytes) -> None:
    # temp + rename so a crash never leaves a torn file behind
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_sekp(kps: FrameKeypoints, path: Path | str) -> None:
    path = Path(path)
    k, dim = kps.descriptors.shape
    points = np.empty(k, dtype=_POINT_DTYPE)
    points["u"] = kps.u
    points["v"] = kps.v
    points["s"] = kps.score
    payload = (
        _SEKP_HEADER.pack(b"SEKP", 1, kps.tau_us, k, dim)
        + points.tobytes()
        + np.ascontiguousarray(kps.descriptors, dtype="<f4").tobytes()
    )
    _atomic_write(path, payload)


def read_sekp(path: Path | str) -> FrameKeypoints:
    raw = Path(path).read_bytes()
    magic, version, tau_us, k, dim = _SEKP_HEADER.unpack_from(raw)
    if magic != b"SEKP" or version != 1:
        raise ValueError(f"{path}: not a version-1 SEKP file")
    offset = _SEKP_HEADER.size
    points = np.frombuffer(raw, dtype=_POINT_DTYPE, count=k, offset=offset)
    offset += k * _POINT_DTYPE.itemsize
    desc = np.frombuffer(raw, dtype="<f4", count=k * dim, offset=offset)
    return FrameKeypoints(tau_us, points["u"].copy(), points["v"].copy(),
                          points["s"].copy(), desc.reshape(k, dim).copy())


def write_semt(matches: FrameMatches, path: Path | str) -> None:
    path = Path(path)
    rec = np.empty(len(matches), dtype=_MATCH_DTYPE)
    rec["i"] = matches.index_a
    rec["j"] = matches.index_b
    rec["sim"] = matches.similarity
    payload = _SEMT_HEADER.pack(b"SEMT", 1, matches.tau_a_us, matches.tau_b_us,
                                len(matches)) + rec.tobytes()
    _atomic_write(path, payload)


def read_semt(path: Path | str) -> FrameMatches:
    raw = Path(path).read_bytes()
    magic, version, tau_a, tau_b, m = _SEMT_HEADER.unpack_from(raw)
    if magic != b"SEMT" or version != 1:
        raise ValueError(f"{path}: not a version-1 SEMT file")
    rec = np.frombuffer(raw, dtype=_MATCH_DTYPE, count=m, offset=_SEMT_HEADER.size)
    return FrameMatches(tau_a, tau_b, rec["i"].copy(), rec["j"].copy(), rec["sim"].copy())
