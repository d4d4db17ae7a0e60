"""Keypoint decoding and non-maximum suppression.

The detector head predicts 65 logits per 8x8 cell (64 pixel bins plus a
no-keypoint dustbin). Decoding softmaxes each cell, drops the dustbin, and
scatters the 64 bin probabilities back to pixel resolution. Keypoints are
the strict local maxima of that heatmap, filtered either by a minimum
score or by keeping the top-k.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.ndimage import maximum_filter

__all__ = [
    "CELL", "DUSTBIN", "Keypoint",
    "decode_cells", "nms_local_maxima", "detect",
    "DEFAULT_MIN_SCORE", "DEFAULT_NMS_RADIUS",
]

CELL = 8            # cell edge in pixels
DUSTBIN = 64        # index of the no-keypoint class
DEFAULT_MIN_SCORE = 0.01
DEFAULT_NMS_RADIUS = 2


class Keypoint(NamedTuple):
    u: int
    v: int
    s: float


def decode_cells(cells: np.ndarray) -> np.ndarray:
    """Turn (H_c, W_c, 65) logits into a full-resolution score heatmap.

    Per-cell softmax over the 65 classes; the dustbin probability is
    discarded and the remaining 64 values fill the cell's 8x8 pixel block.
    """
    cells = np.asarray(cells, dtype=np.float64)
    if cells.ndim != 3 or cells.shape[2] != CELL * CELL + 1:
        raise ValueError(f"expected (H_c, W_c, 65) logits, got {cells.shape}")
    hc, wc, _ = cells.shape
    shifted = cells - cells.max(axis=2, keepdims=True)
    expd = np.exp(shifted)
    probs = expd / expd.sum(axis=2, keepdims=True)
    bins = probs[:, :, :DUSTBIN]
    heat = bins.reshape(hc, wc, CELL, CELL).transpose(0, 2, 1, 3)
    return heat.reshape(hc * CELL, wc * CELL).astype(np.float32)


def nms_local_maxima(heatmap: np.ndarray, radius: int = DEFAULT_NMS_RADIUS):
    """Strict local maxima over the full square (2r+1)^2 neighborhood.

    A pixel survives only if its score strictly exceeds every other pixel
    in the neighborhood, so score plateaus eliminate each other.
    Out-of-bounds neighbors never block a maximum. Returns (u, v, s)
    arrays in row-major pixel order.
    """
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    heat = np.asarray(heatmap, dtype=np.float32)
    footprint = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    footprint[radius, radius] = False
    neighbor_max = maximum_filter(heat, footprint=footprint, mode="constant", cval=-np.inf)
    vs, us = np.nonzero(heat > neighbor_max)
    return us.astype(np.int64), vs.astype(np.int64), heat[vs, us]


def detect(
    heatmap: np.ndarray,
    radius: int = DEFAULT_NMS_RADIUS,
    min_score: float = DEFAULT_MIN_SCORE,
    top_k: int | None = None,
) -> list[Keypoint]:
    """NMS candidates filtered by score threshold or reduced to the top-k.

    Output is sorted by (score desc, v asc, u asc), which also breaks
    top-k ties deterministically.
    """
    us, vs, ss = nms_local_maxima(heatmap, radius)
    order = np.lexsort((us, vs, -ss.astype(np.float64)))
    us, vs, ss = us[order], vs[order], ss[order]
    if top_k is not None:
        if top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {top_k}")
        us, vs, ss = us[:top_k], vs[:top_k], ss[:top_k]
    else:
        keep = ss >= min_score
        us, vs, ss = us[keep], vs[keep], ss[keep]
    return [Keypoint(int(u), int(v), float(s)) for u, v, s in zip(us, vs, ss)]
