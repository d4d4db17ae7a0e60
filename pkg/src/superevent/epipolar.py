"""Relative pose from matched normalized image points.

Eight-point essential-matrix estimation inside a seeded RANSAC loop:
hypotheses are solved for all iterations at once (batched SVD), scored by
squared Sampson distance, and the best consensus set is refit and
decomposed into the four (R, t) candidates, of which the chirality check
(positive triangulated depth in both cameras) picks the winner.

Coordinates are normalized (unitless) image points; the pixel inlier
threshold is divided by the focal length by the caller or via the `focal`
argument of `estimate_relative_pose`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RansacConfig",
    "PoseEstimate",
    "eight_point",
    "sampson_sq",
    "decompose_essential",
    "triangulate_depths",
    "estimate_relative_pose",
    "MIN_MATCHES",
]

MIN_MATCHES = 8

_W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 2000
    threshold_px: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.threshold_px <= 0:
            raise ValueError(f"threshold must be positive, got {self.threshold_px}")


@dataclass(frozen=True)
class PoseEstimate:
    """Rotation and unit translation taking ref-camera coords to target."""

    rotation: np.ndarray
    translation: np.ndarray
    essential: np.ndarray
    inliers: np.ndarray

    @property
    def num_inliers(self) -> int:
        return int(self.inliers.sum())


def _homogeneous(points: np.ndarray) -> np.ndarray:
    return np.concatenate([points, np.ones((*points.shape[:-1], 1))], axis=-1)


def _hartley_normalize(points: np.ndarray):
    """Center and isotropically scale point sets to mean distance sqrt(2).

    Works on (..., N, 2) batches; returns normalized points and the (...,
    3, 3) similarity transforms.
    """
    centroid = points.mean(axis=-2, keepdims=True)
    centered = points - centroid
    mean_dist = np.linalg.norm(centered, axis=-1).mean(axis=-1)
    scale = np.sqrt(2.0) / np.maximum(mean_dist, 1e-12)
    shape = points.shape[:-2]
    transform = np.zeros((*shape, 3, 3))
    transform[..., 0, 0] = scale
    transform[..., 1, 1] = scale
    transform[..., 2, 2] = 1.0
    transform[..., 0, 2] = -scale * centroid[..., 0, 0]
    transform[..., 1, 2] = -scale * centroid[..., 0, 1]
    return centered * scale[..., None, None], transform


def _solve_epipolar(x_ref: np.ndarray, x_tgt: np.ndarray) -> np.ndarray:
    """DLT solution of x_tgt^T E x_ref = 0 on (..., N>=8, 2) batches."""
    xr, tr = _hartley_normalize(x_ref)
    xt, tt = _hartley_normalize(x_tgt)
    u1, v1 = xr[..., 0], xr[..., 1]
    u2, v2 = xt[..., 0], xt[..., 1]
    ones = np.ones_like(u1)
    a = np.stack(
        [u2 * u1, u2 * v1, u2, v2 * u1, v2 * v1, v2, u1, v1, ones], axis=-1
    )
    _, _, vh = np.linalg.svd(a)
    e = vh[..., -1, :].reshape(*a.shape[:-2], 3, 3)
    e = np.swapaxes(tt, -1, -2) @ e @ tr
    return _project_to_essential(e)


def _project_to_essential(e: np.ndarray) -> np.ndarray:
    """Nearest essential matrix: singular values forced to (1, 1, 0)."""
    u, _, vh = np.linalg.svd(e)
    d = np.zeros_like(e)
    d[..., 0, 0] = 1.0
    d[..., 1, 1] = 1.0
    return u @ d @ vh


def eight_point(x_ref: np.ndarray, x_tgt: np.ndarray) -> np.ndarray:
    """Essential matrix from >= 8 normalized correspondences."""
    x_ref = np.asarray(x_ref, dtype=np.float64)
    x_tgt = np.asarray(x_tgt, dtype=np.float64)
    if x_ref.shape != x_tgt.shape or x_ref.shape[-1] != 2:
        raise ValueError(f"point sets disagree: {x_ref.shape} vs {x_tgt.shape}")
    if x_ref.shape[-2] < MIN_MATCHES:
        raise ValueError(f"need at least {MIN_MATCHES} correspondences")
    return _solve_epipolar(x_ref, x_tgt)


def sampson_sq(e: np.ndarray, x_ref: np.ndarray, x_tgt: np.ndarray) -> np.ndarray:
    """Squared first-order geometric (Sampson) distance per correspondence.

    Broadcasts over a leading hypothesis axis of `e`.
    """
    xr = _homogeneous(np.asarray(x_ref, dtype=np.float64))
    xt = _homogeneous(np.asarray(x_tgt, dtype=np.float64))
    ex1 = np.einsum("...ij,nj->...ni", e, xr)
    etx2 = np.einsum("...ji,nj->...ni", e, xt)
    err = np.einsum("ni,...ni->...n", xt, ex1)
    denom = ex1[..., 0] ** 2 + ex1[..., 1] ** 2 + etx2[..., 0] ** 2 + etx2[..., 1] ** 2
    return err**2 / np.maximum(denom, 1e-300)


def decompose_essential(e: np.ndarray):
    """The four (R, t) candidates of an essential matrix."""
    u, _, vh = np.linalg.svd(e)
    if np.linalg.det(u) < 0:
        u = -u
    if np.linalg.det(vh) < 0:
        vh = -vh
    r1 = u @ _W @ vh
    r2 = u @ _W.T @ vh
    t = u[:, 2]
    return [(r1, t), (r1, -t), (r2, t), (r2, -t)]


def triangulate_depths(rotation, translation, x_ref, x_tgt):
    """Linear triangulation; returns per-point depths in both cameras."""
    n = x_ref.shape[0]
    p1 = np.zeros((3, 4))
    p1[:3, :3] = np.eye(3)
    p2 = np.zeros((3, 4))
    p2[:3, :3] = rotation
    p2[:3, 3] = translation
    a = np.empty((n, 4, 4))
    a[:, 0] = x_ref[:, 0, None] * p1[2] - p1[0]
    a[:, 1] = x_ref[:, 1, None] * p1[2] - p1[1]
    a[:, 2] = x_tgt[:, 0, None] * p2[2] - p2[0]
    a[:, 3] = x_tgt[:, 1, None] * p2[2] - p2[1]
    _, _, vh = np.linalg.svd(a)
    points = vh[:, -1, :]
    w = points[:, 3]
    w = np.where(np.abs(w) < 1e-300, 1e-300, w)
    xyz = points[:, :3] / w[:, None]
    depth_ref = xyz[:, 2]
    depth_tgt = xyz @ rotation.T[:, 2] + translation[2]
    return depth_ref, depth_tgt


def estimate_relative_pose(
    x_ref: np.ndarray,
    x_tgt: np.ndarray,
    cfg: RansacConfig = RansacConfig(),
    focal: float = 1.0,
) -> PoseEstimate | None:
    """Seeded RANSAC relative pose; None when no usable consensus exists.

    The Sampson inlier threshold is `threshold_px / focal` in normalized
    units. Failure cases (< 8 matches, or the best consensus below 8) are
    reported as None so callers can score them as unbounded error.
    """
    x_ref = np.asarray(x_ref, dtype=np.float64)
    x_tgt = np.asarray(x_tgt, dtype=np.float64)
    n = x_ref.shape[0]
    if n < MIN_MATCHES or x_tgt.shape[0] != n:
        return None

    rng = np.random.default_rng(cfg.seed)
    # all minimal samples drawn up front: argsort of a random matrix gives
    # iterations x 8 distinct indices
    samples = rng.random((cfg.iterations, n)).argsort(axis=1)[:, :MIN_MATCHES]
    hypotheses = _solve_epipolar(x_ref[samples], x_tgt[samples])

    thresh_sq = (cfg.threshold_px / focal) ** 2
    dists = sampson_sq(hypotheses, x_ref, x_tgt)
    inlier_masks = dists <= thresh_sq
    counts = inlier_masks.sum(axis=1)
    best = int(np.argmax(counts))  # first best wins: deterministic
    if counts[best] < MIN_MATCHES:
        return None
    inliers = inlier_masks[best]

    e = eight_point(x_ref[inliers], x_tgt[inliers])
    best_candidate = None
    best_support = -1
    for rotation, translation in decompose_essential(e):
        d_ref, d_tgt = triangulate_depths(rotation, translation, x_ref[inliers], x_tgt[inliers])
        support = int(((d_ref > 0) & (d_tgt > 0)).sum())
        if support > best_support:
            best_support = support
            best_candidate = (rotation, translation)
    rotation, translation = best_candidate
    return PoseEstimate(rotation, translation, e, inliers)
