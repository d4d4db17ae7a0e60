"""Deterministic Harris-corner detector with normalized patch descriptors.

The default backend: no model weights, no randomness, identical output for
identical pixels on every platform, which keeps the exported fixtures
byte-stable. Descriptors are mean-removed, L2-normalized 16x16 patches
(256 dimensions, matching the learned detectors' descriptor width).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, maximum_filter

__all__ = ["ClassicalConfig", "detect_and_describe"]

PATCH = 16
DESCRIPTOR_DIM = PATCH * PATCH


@dataclass(frozen=True)
class ClassicalConfig:
    max_keypoints: int = 512
    harris_k: float = 0.04
    smoothing_sigma: float = 1.5
    nms_radius: int = 4
    rel_threshold: float = 1e-3  # response floor relative to the strongest corner


def _harris_response(image: np.ndarray, cfg: ClassicalConfig) -> np.ndarray:
    dy, dx = np.gradient(image.astype(np.float64))
    ixx = gaussian_filter(dx * dx, cfg.smoothing_sigma)
    iyy = gaussian_filter(dy * dy, cfg.smoothing_sigma)
    ixy = gaussian_filter(dx * dy, cfg.smoothing_sigma)
    det = ixx * iyy - ixy * ixy
    trace = ixx + iyy
    return det - cfg.harris_k * trace * trace


def _local_maxima(response: np.ndarray, radius: int):
    footprint = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    footprint[radius, radius] = False
    neighbors = maximum_filter(response, footprint=footprint, mode="constant",
                               cval=-np.inf)
    vs, us = np.nonzero(response > neighbors)
    return us, vs


def _patch_descriptors(image: np.ndarray, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    half = PATCH // 2
    padded = np.pad(image.astype(np.float64), half, mode="reflect")
    descs = np.empty((len(us), DESCRIPTOR_DIM))
    for n, (u, v) in enumerate(zip(us, vs)):
        patch = padded[v:v + PATCH, u:u + PATCH].reshape(-1)
        patch = patch - patch.mean()
        norm = np.linalg.norm(patch)
        descs[n] = patch / norm if norm > 1e-12 else 0.0
    return descs.astype(np.float32)


def detect_and_describe(image: np.ndarray, cfg: ClassicalConfig = ClassicalConfig()):
    """(u, v, score, descriptors) for the strongest corners of one frame.

    Scores are Harris responses normalized by the frame maximum, so they
    land in (0, 1] like the learned detectors' probabilities. Blank or
    textureless frames yield zero keypoints.
    """
    response = _harris_response(image, cfg)
    peak = response.max(initial=0.0)
    if peak <= 0.0:
        empty = np.zeros(0, np.float32)
        return empty, empty.copy(), empty.copy(), np.zeros((0, DESCRIPTOR_DIM), np.float32)
    us, vs = _local_maxima(response, cfg.nms_radius)
    scores = response[vs, us]
    keep = scores >= cfg.rel_threshold * peak
    us, vs, scores = us[keep], vs[keep], scores[keep]
    order = np.lexsort((us, vs, -scores))[: cfg.max_keypoints]
    us, vs, scores = us[order], vs[order], scores[order]
    descriptors = _patch_descriptors(image, us, vs)
    return (
        us.astype(np.float32),
        vs.astype(np.float32),
        (scores / peak).astype(np.float32),
        descriptors,
    )
