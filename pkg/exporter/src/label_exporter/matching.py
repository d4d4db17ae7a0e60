"""Mutual-nearest-neighbor descriptor matching between two frames."""

from __future__ import annotations

import numpy as np

from .formats import FrameKeypoints, FrameMatches

__all__ = ["match_mutual"]


def match_mutual(a: FrameKeypoints, b: FrameKeypoints,
                 min_similarity: float = 0.2) -> FrameMatches:
    if len(a) == 0 or len(b) == 0:
        z = np.zeros(0)
        return FrameMatches(a.tau_us, b.tau_us, z, z.copy(), z.copy())
    sim = a.descriptors.astype(np.float64) @ b.descriptors.astype(np.float64).T
    fwd = sim.argmax(axis=1)
    back = sim.argmax(axis=0)
    rows = np.arange(len(a))
    keep = (back[fwd] == rows) & (sim[rows, fwd] >= min_similarity)
    ia = rows[keep]
    ib = fwd[keep]
    return FrameMatches(a.tau_us, b.tau_us, ia, ib, sim[ia, ib])
