"""Descriptor interpolation, mutual-nearest-neighbor matching, and the
SEKP/SEMT binary interchange formats.

Descriptors live on an 8-px grid (one 256-d vector per cell, unit norm
after normalization). Keypoint descriptors are bilinearly interpolated
from the four surrounding cell centers and renormalized. Matching is
brute force over dot-product similarity with a mutual-consistency check.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .detection import CELL, Keypoint
from .events import FormatError

__all__ = [
    "KeypointSet",
    "MatchSet",
    "DEFAULT_MIN_SIMILARITY",
    "normalize_grid",
    "sample_descriptor",
    "sample_descriptors",
    "match_mutual_nn",
    "write_keypoints",
    "read_keypoints",
    "write_matches",
    "read_matches",
]

# Matcher acceptance threshold; equals the negative-pair saturation margin
# of the training loss so "matchable" and "trained to be similar" agree.
DEFAULT_MIN_SIMILARITY = 0.2

_CENTER_OFFSET = (CELL - 1) / 2.0  # cell (h, w) is centered at (8w+3.5, 8h+3.5)


@dataclass(frozen=True)
class KeypointSet:
    """Keypoints at one timestamp with unit-norm descriptors (rows)."""

    tau_us: int
    u: np.ndarray
    v: np.ndarray
    s: np.ndarray
    descriptors: np.ndarray

    def __post_init__(self) -> None:
        u = np.ascontiguousarray(self.u, dtype=np.float32)
        v = np.ascontiguousarray(self.v, dtype=np.float32)
        s = np.ascontiguousarray(self.s, dtype=np.float32)
        desc = np.ascontiguousarray(self.descriptors, dtype=np.float32)
        if desc.ndim != 2:
            raise ValueError(f"descriptors must be (K, D), got {desc.shape}")
        k = len(u)
        if not (len(v) == len(s) == desc.shape[0] == k):
            raise ValueError("keypoint arrays disagree on K")
        if k:
            norms = np.linalg.norm(desc.astype(np.float64), axis=1)
            bad = (np.abs(norms - 1.0) > 1e-6) & (norms > 0)
            if bad.any():
                raise ValueError(f"descriptor row {int(np.argmax(bad))} is not unit norm")
        for name, arr in (("u", u), ("v", v), ("s", s), ("descriptors", desc)):
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.u)

    @property
    def dim(self) -> int:
        return self.descriptors.shape[1]

    def keypoints(self) -> list[Keypoint]:
        return [Keypoint(int(u), int(v), float(s)) for u, v, s in zip(self.u, self.v, self.s)]

    @classmethod
    def empty(cls, tau_us: int, dim: int = 256) -> "KeypointSet":
        z = np.zeros(0, dtype=np.float32)
        return cls(tau_us, z, z.copy(), z.copy(), np.zeros((0, dim), dtype=np.float32))


@dataclass(frozen=True)
class MatchSet:
    """Index pairs between two keypoint sets with their similarity."""

    tau_a_us: int
    tau_b_us: int
    index_a: np.ndarray
    index_b: np.ndarray
    similarity: np.ndarray

    def __post_init__(self) -> None:
        ia = np.ascontiguousarray(self.index_a, dtype=np.uint32)
        ib = np.ascontiguousarray(self.index_b, dtype=np.uint32)
        sim = np.ascontiguousarray(self.similarity, dtype=np.float32)
        if not (len(ia) == len(ib) == len(sim)):
            raise ValueError("match arrays disagree on M")
        if len(np.unique(ia)) != len(ia) or len(np.unique(ib)) != len(ib):
            raise ValueError("match indices must be unique per side")
        if len(sim) and np.abs(sim).max() > 1.0 + 1e-3:  # fp slack over unit dots
            raise ValueError("similarity outside [-1, 1]")
        object.__setattr__(self, "index_a", ia)
        object.__setattr__(self, "index_b", ib)
        object.__setattr__(self, "similarity", sim)

    def __len__(self) -> int:
        return len(self.index_a)


def normalize_grid(grid: np.ndarray) -> np.ndarray:
    """L2-normalize each cell descriptor; all-zero cells stay zero."""
    grid = np.asarray(grid, dtype=np.float32)
    norms = np.linalg.norm(grid.astype(np.float64), axis=-1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return (grid / safe).astype(np.float32)


def _bilinear_weights(coord: np.ndarray, cells: int):
    """Clamped cell-space coordinate -> (low index, high index, high weight)."""
    g = np.clip((coord - _CENTER_OFFSET) / CELL, 0.0, cells - 1.0)
    lo = np.floor(g).astype(np.int64)
    lo = np.minimum(lo, cells - 1)
    hi = np.minimum(lo + 1, cells - 1)
    return lo, hi, g - lo


def sample_descriptors(grid: np.ndarray, u, v, extent: tuple[int, int] | None = None):
    """Bilinear descriptor lookup at pixel coordinates, renormalized.

    `grid` is (H_c, W_c, D), already cell-normalized. Coordinates outside
    the heatmap extent (H_c*8, W_c*8 by default) raise; coordinates between
    the border cell centers and the image edge clamp to the border cells.
    """
    grid = np.asarray(grid, dtype=np.float32)
    if grid.ndim != 3:
        raise ValueError(f"grid must be (H_c, W_c, D), got {grid.shape}")
    hc, wc, _ = grid.shape
    height, width = extent if extent is not None else (hc * CELL, wc * CELL)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if ((u < 0) | (u >= width) | (v < 0) | (v >= height)).any():
        bad = int(np.argmax((u < 0) | (u >= width) | (v < 0) | (v >= height)))
        raise ValueError(f"keypoint ({u[bad]},{v[bad]}) outside {width}x{height} heatmap")
    x0, x1, wx = _bilinear_weights(u, wc)
    y0, y1, wy = _bilinear_weights(v, hc)
    wx = wx[:, None]
    wy = wy[:, None]
    mixed = (
        grid[y0, x0] * (1 - wy) * (1 - wx)
        + grid[y0, x1] * (1 - wy) * wx
        + grid[y1, x0] * wy * (1 - wx)
        + grid[y1, x1] * wy * wx
    ).astype(np.float64)
    norms = np.linalg.norm(mixed, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return (mixed / safe).astype(np.float32)


def sample_descriptor(grid: np.ndarray, u: float, v: float, extent=None) -> np.ndarray:
    return sample_descriptors(grid, [u], [v], extent)[0]


def match_mutual_nn(
    a: KeypointSet,
    b: KeypointSet,
    min_similarity: float = DEFAULT_MIN_SIMILARITY,
    mutual: bool = True,
) -> MatchSet:
    """Brute-force descriptor matching over dot-product similarity.

    A pair (i, j) is kept when j is i's best match, i is j's best match
    (unless `mutual` is disabled for one-way matching), and the similarity
    clears `min_similarity`. Argmax ties resolve to the lower index.
    """
    if a.dim != b.dim:
        raise ValueError(f"descriptor dims differ: {a.dim} vs {b.dim}")
    if len(a) == 0 or len(b) == 0:
        return MatchSet(a.tau_us, b.tau_us, np.zeros(0), np.zeros(0), np.zeros(0))
    sim = a.descriptors.astype(np.float64) @ b.descriptors.astype(np.float64).T
    fwd = sim.argmax(axis=1)
    ia = np.arange(len(a))
    if mutual:
        back = sim.argmax(axis=0)
        keep = back[fwd] == ia
    else:
        keep = np.ones(len(a), dtype=bool)
    scores = sim[ia, fwd]
    keep &= scores >= min_similarity
    ia, ib = ia[keep], fwd[keep]
    if not mutual and len(ib) != len(np.unique(ib)):
        # one-way mode may hand several queries the same target; keep the
        # most similar query per target so MatchSet invariants still hold
        order = np.lexsort((ia, -scores[keep]))
        seen = {}
        for pos in order:
            seen.setdefault(int(ib[pos]), pos)
        sel = np.sort(np.fromiter(seen.values(), dtype=np.int64))
        ia, ib = ia[sel], ib[sel]
    return MatchSet(a.tau_us, b.tau_us, ia, ib, sim[ia, ib])


SEKP_MAGIC = b"SEKP"
SEMT_MAGIC = b"SEMT"
_SEKP_HEADER = struct.Struct("<4sHQII")
_SEMT_HEADER = struct.Struct("<4sHQQI")
_POINT_DTYPE = np.dtype([("u", "<f4"), ("v", "<f4"), ("s", "<f4")])
_MATCH_DTYPE = np.dtype([("i", "<u4"), ("j", "<u4"), ("sim", "<f4")])


def write_keypoints(kps: KeypointSet, path: Union[str, Path]) -> None:
    pts = np.empty(len(kps), dtype=_POINT_DTYPE)
    pts["u"], pts["v"], pts["s"] = kps.u, kps.v, kps.s
    with open(path, "wb") as fh:
        fh.write(_SEKP_HEADER.pack(SEKP_MAGIC, 1, kps.tau_us, len(kps), kps.dim))
        fh.write(pts.tobytes())
        fh.write(np.ascontiguousarray(kps.descriptors, dtype="<f4").tobytes())


def read_keypoints(path: Union[str, Path]) -> KeypointSet:
    raw = Path(path).read_bytes()
    if len(raw) < _SEKP_HEADER.size:
        raise FormatError(f"{path}: truncated SEKP header")
    magic, version, tau_us, k, dim = _SEKP_HEADER.unpack_from(raw)
    if magic != SEKP_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != 1:
        raise FormatError(f"{path}: unsupported SEKP version {version}")
    offset = _SEKP_HEADER.size
    need = k * _POINT_DTYPE.itemsize + k * dim * 4
    if len(raw) - offset != need:
        raise FormatError(f"{path}: payload {len(raw) - offset} bytes, expected {need}")
    pts = np.frombuffer(raw, dtype=_POINT_DTYPE, count=k, offset=offset)
    offset += k * _POINT_DTYPE.itemsize
    desc = np.frombuffer(raw, dtype="<f4", count=k * dim, offset=offset)
    return KeypointSet(tau_us, pts["u"].copy(), pts["v"].copy(), pts["s"].copy(),
                       desc.reshape(k, dim).copy())


def write_matches(matches: MatchSet, path: Union[str, Path]) -> None:
    rec = np.empty(len(matches), dtype=_MATCH_DTYPE)
    rec["i"], rec["j"], rec["sim"] = matches.index_a, matches.index_b, matches.similarity
    with open(path, "wb") as fh:
        fh.write(_SEMT_HEADER.pack(SEMT_MAGIC, 1, matches.tau_a_us, matches.tau_b_us,
                                   len(matches)))
        fh.write(rec.tobytes())


def read_matches(path: Union[str, Path]) -> MatchSet:
    raw = Path(path).read_bytes()
    if len(raw) < _SEMT_HEADER.size:
        raise FormatError(f"{path}: truncated SEMT header")
    magic, version, tau_a, tau_b, m = _SEMT_HEADER.unpack_from(raw)
    if magic != SEMT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != 1:
        raise FormatError(f"{path}: unsupported SEMT version {version}")
    offset = _SEMT_HEADER.size
    if len(raw) - offset != m * _MATCH_DTYPE.itemsize:
        raise FormatError(f"{path}: payload {len(raw) - offset} bytes, "
                          f"expected {m * _MATCH_DTYPE.itemsize}")
    rec = np.frombuffer(raw, dtype=_MATCH_DTYPE, count=m, offset=offset)
    return MatchSet(tau_a, tau_b, rec["i"].copy(), rec["j"].copy(), rec["sim"].copy())
