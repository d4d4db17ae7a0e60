"""Training-pair generation from per-frame keypoints and matches.

Frame-based detections drive the labeling: a reference frame qualifies
when the median pixel displacement of its matches to the next frame shows
actual motion, then pairs with increasing temporal baseline are emitted by
repeatedly advancing a random step drawn from {1..j_max} until the match
count collapses. Keypoints and matches rasterize onto the 8-px cell grid
as detector / descriptor targets, with multi-keypoint cells resolved by a
seeded lottery.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .detection import CELL, DUSTBIN
from .losses import DescriptorTarget, DetectorTarget
from .matching import KeypointSet, MatchSet

__all__ = [
    "LabelGenConfig",
    "LabelPair",
    "median_displacement",
    "generate_pairs",
    "rasterize_targets",
    "write_manifest",
    "read_exclusions",
]


@dataclass(frozen=True)
class LabelGenConfig:
    c_median: float = 1.0   # px; median displacement below this means "static"
    c_matches: int = 50     # minimum surviving matches per emitted pair
    j_max: int = 10         # maximum single step of the baseline growth
    seed: int = 0

    def __post_init__(self) -> None:
        if self.c_median <= 0:
            raise ValueError(f"c_median must be positive, got {self.c_median}")
        if self.c_matches < 1 or self.j_max < 1:
            raise ValueError("c_matches and j_max must be >= 1")


@dataclass(frozen=True)
class LabelPair:
    """One training pair: two frames plus the matches linking them."""

    frame_ref: int
    frame_tgt: int
    kps_ref: KeypointSet
    kps_tgt: KeypointSet
    matches: MatchSet

    def __post_init__(self) -> None:
        if self.tau_ref_us >= self.tau_tgt_us:
            raise ValueError("pair must move forward in time")
        if len(self.matches) and (
            self.matches.index_a.max() >= len(self.kps_ref)
            or self.matches.index_b.max() >= len(self.kps_tgt)
        ):
            raise ValueError("match indices exceed the keypoint sets")

    @property
    def tau_ref_us(self) -> int:
        return self.kps_ref.tau_us

    @property
    def tau_tgt_us(self) -> int:
        return self.kps_tgt.tau_us


def median_displacement(matches: MatchSet, kps_a: KeypointSet, kps_b: KeypointSet) -> float:
    """Median Euclidean pixel displacement over the matched keypoints."""
    if len(matches) == 0:
        raise ValueError("median displacement of an empty match set")
    ia, ib = matches.index_a, matches.index_b
    du = kps_a.u[ia].astype(np.float64) - kps_b.u[ib].astype(np.float64)
    dv = kps_a.v[ia].astype(np.float64) - kps_b.v[ib].astype(np.float64)
    return float(np.median(np.hypot(du, dv)))


def generate_pairs(
    frames: Sequence[KeypointSet],
    matcher: Callable[[int, int], MatchSet],
    cfg: LabelGenConfig = LabelGenConfig(),
) -> list[LabelPair]:
    """Emit training pairs for every reference frame that passes the filters.

    For each frame i: the static filter matches i against i+1 and requires
    the median displacement to exceed c_median. Then the baseline j grows
    from 0 by uniform random steps from {1..j_max}; each (i, i+j) pair is
    emitted while its match count stays at or above c_matches, and the run
    ends (moving on to reference i+1) at the first failing pair or at the
    end of the sequence. Fully deterministic for a fixed seed.
    """
    rng = np.random.default_rng(cfg.seed)
    out: list[LabelPair] = []
    for i in range(len(frames) - 1):
        probe = matcher(i, i + 1)
        if len(probe) == 0:
            continue
        if median_displacement(probe, frames[i], frames[i + 1]) <= cfg.c_median:
            continue
        j = 0
        while True:
            j += int(rng.integers(1, cfg.j_max + 1))
            if i + j >= len(frames):
                break
            matches = matcher(i, i + j)
            if len(matches) < cfg.c_matches:
                break
            out.append(LabelPair(i, i + j, frames[i], frames[i + j], matches))
    return out


def _claim_cells(kps: KeypointSet, cell_rows: int, cell_cols: int, rng):
    """Per cell, pick the surviving keypoint (seeded) and its pixel bin."""
    classes = np.full((cell_rows, cell_cols), DUSTBIN, dtype=np.int64)
    winner = np.full((cell_rows, cell_cols), -1, dtype=np.int64)
    u = np.floor(kps.u).astype(np.int64)
    v = np.floor(kps.v).astype(np.int64)
    ch, cw = v // CELL, u // CELL
    candidates: dict[tuple[int, int], list[int]] = {}
    for k in range(len(kps)):
        if 0 <= ch[k] < cell_rows and 0 <= cw[k] < cell_cols:
            candidates.setdefault((int(ch[k]), int(cw[k])), []).append(k)
    for cell in sorted(candidates):
        picks = candidates[cell]
        k = picks[int(rng.integers(len(picks)))] if len(picks) > 1 else picks[0]
        winner[cell] = k
        classes[cell] = (v[k] % CELL) * CELL + (u[k] % CELL)
    return classes, winner


def rasterize_targets(
    pair: LabelPair, cell_rows: int, cell_cols: int, seed: int = 0
) -> tuple[DetectorTarget, DetectorTarget, DescriptorTarget]:
    """Project a pair's keypoints and matches onto the cell grid.

    Each keypoint claims its cell and pixel bin; crowded cells keep one
    seeded-random keypoint, the rest (and their matches) drop out. Matches
    whose both endpoints survived their cell lotteries become matching
    descriptor-cell pairs; all other labeled cross pairs are non-matches.
    """
    rng = np.random.default_rng(seed)
    classes0, winner0 = _claim_cells(pair.kps_ref, cell_rows, cell_cols, rng)
    classes1, winner1 = _claim_cells(pair.kps_tgt, cell_rows, cell_cols, rng)

    cell_of0 = {int(winner0[h, w]): (h, w)
                for h, w in zip(*np.nonzero(winner0 >= 0))}
    cell_of1 = {int(winner1[h, w]): (h, w)
                for h, w in zip(*np.nonzero(winner1 >= 0))}
    pairs = [
        (*cell_of0[int(ia)], *cell_of1[int(ib)])
        for ia, ib in zip(pair.matches.index_a, pair.matches.index_b)
        if int(ia) in cell_of0 and int(ib) in cell_of1
    ]
    desc_target = DescriptorTarget(
        np.asarray(pairs, dtype=np.int64).reshape(-1, 4),
        classes0 != DUSTBIN,
        classes1 != DUSTBIN,
    )
    return DetectorTarget(classes0), DetectorTarget(classes1), desc_target


def write_manifest(records: Sequence[dict], path: Path | str) -> None:
    """One JSON object per line; keys sorted for reproducible bytes."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_exclusions(path: Path | str) -> set[str]:
    """Sequence names to skip: one per line, `#` comments allowed."""
    names = set()
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            names.add(line)
    return names
