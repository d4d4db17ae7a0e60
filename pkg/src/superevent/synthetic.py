"""Synthetic scenes and fixtures for exercising the geometry stack.

Generates random two-view correspondence sets with known relative pose,
and full benchmark fixtures: an orbiting-camera trajectory, intrinsics,
and per-pose SEKP predictions whose descriptors identify world points, so
matching is exact and the benchmark should recover every rotation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import CameraIntrinsics
from .matching import KeypointSet, write_keypoints
from .posebench import distort_points

__all__ = [
    "TwoViewScene",
    "random_two_view_scene",
    "rotation_about_axis",
    "matrix_to_quat",
    "write_benchmark_fixture",
]


@dataclass(frozen=True)
class TwoViewScene:
    """Exact normalized correspondences with their ground-truth pose."""

    x_ref: np.ndarray      # (N, 2) normalized coords in the reference camera
    x_tgt: np.ndarray      # (N, 2) in the target camera
    rotation: np.ndarray   # ref-camera coords -> tgt-camera coords
    translation: np.ndarray
    inlier_mask: np.ndarray


def rotation_about_axis(axis: np.ndarray, angle_deg: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    a = np.radians(angle_deg)
    k = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + np.sin(a) * k + (1 - np.cos(a)) * (k @ k)


def matrix_to_quat(r: np.ndarray) -> np.ndarray:
    """Rotation matrix -> unit quaternion (w, x, y, z), w >= 0."""
    t = np.trace(r)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(1.0 + r[i, i] - r[j, j] - r[k, k], 0.0)) * 2
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def random_two_view_scene(
    rng: np.random.Generator,
    num_points: int = 100,
    rotation_deg: float | None = None,
    outlier_fraction: float = 0.0,
    noise_px: float = 0.0,
    focal: float = 320.0,
) -> TwoViewScene:
    """Random 3D cloud seen by two cameras with a random rotation/baseline.

    Outliers replace target points by uniform draws over the field of view;
    optional Gaussian pixel noise (converted by `focal`) perturbs inliers.
    """
    if rotation_deg is None:
        rotation_deg = float(rng.uniform(10.0, 40.0))
    points = np.stack(
        [
            rng.uniform(-2.0, 2.0, num_points),
            rng.uniform(-2.0, 2.0, num_points),
            rng.uniform(4.0, 10.0, num_points),
        ],
        axis=1,
    )
    axis = rng.normal(size=3)
    rotation = rotation_about_axis(axis, rotation_deg)
    # keep the cloud in front of the target camera: rotate about the cloud
    # center and add a sideways baseline
    center = np.array([0.0, 0.0, 7.0])
    baseline = rng.normal(size=3)
    baseline = 0.5 * baseline / np.linalg.norm(baseline)
    translation = center - rotation @ center + baseline
    if np.linalg.norm(translation) < 0.3:
        # flipping the baseline always escapes a near-zero total baseline
        translation = center - rotation @ center - baseline
    cam_tgt = points @ rotation.T + translation
    x_ref = points[:, :2] / points[:, 2:3]
    x_tgt = cam_tgt[:, :2] / cam_tgt[:, 2:3]
    if noise_px > 0:
        x_ref = x_ref + rng.normal(scale=noise_px / focal, size=x_ref.shape)
        x_tgt = x_tgt + rng.normal(scale=noise_px / focal, size=x_tgt.shape)
    inliers = np.ones(num_points, dtype=bool)
    n_out = int(round(outlier_fraction * num_points))
    if n_out:
        idx = rng.choice(num_points, n_out, replace=False)
        x_tgt[idx] = rng.uniform(-0.5, 0.5, (n_out, 2))
        inliers[idx] = False
    scale = np.linalg.norm(translation)
    return TwoViewScene(x_ref, x_tgt, rotation, translation / scale, inliers)


def _orbit_pose(angle_deg: float, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Camera on a y-axis orbit, optical axis through the origin.

    Returns (R_wc, position): world-from-camera rotation and camera center.
    """
    a = np.radians(angle_deg)
    position = radius * np.array([np.sin(a), 0.0, -np.cos(a)])
    forward = -position / np.linalg.norm(position)  # toward the origin
    up = np.array([0.0, 1.0, 0.0])
    right = np.cross(up, forward)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    return np.stack([right, down, forward], axis=1), position


def write_benchmark_fixture(
    out_dir: Path | str,
    seed: int = 7,
    num_points: int = 220,
    rate_hz: float = 8.0,
    duration_s: float = 3.0,
    spin_deg_per_s: float = 30.0,
    descriptor_dim: int = 64,
    width: int = 240,
    height: int = 180,
) -> dict:
    """Emit trajectory, intrinsics, and SEKP predictions for `bench pose`.

    The camera orbits a random point cloud while staring at its center, so
    the rotation change between poses equals the orbit angle; every world
    point carries one persistent random unit descriptor, making descriptor
    matches exact. Returns the file layout as a dict of paths.
    """
    out = Path(out_dir)
    preds = out / "preds"
    preds.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    intrinsics = CameraIntrinsics(
        fx=200.0, fy=200.0, cx=width / 2, cy=height / 2,
        distortion=np.array([-0.05, 0.002, 0.0005, -0.0005]),
    )
    points = np.stack(
        [rng.uniform(-1.2, 1.2, num_points), rng.uniform(-0.9, 0.9, num_points),
         rng.uniform(-1.2, 1.2, num_points)],
        axis=1,
    )
    descriptors = rng.normal(size=(num_points, descriptor_dim))
    descriptors /= np.linalg.norm(descriptors, axis=1, keepdims=True)
    descriptors = descriptors.astype(np.float32)

    times = np.arange(0.0, duration_s, 1.0 / rate_hz)
    trajectory_lines = ["# synthetic orbit trajectory: t tx ty tz qx qy qz qw"]
    for t in times:
        r_wc, position = _orbit_pose(spin_deg_per_s * t, radius=4.0)
        cam = (points - position) @ r_wc  # R_wc^T (X - C)
        visible = cam[:, 2] > 0.5
        pix = distort_points(cam[visible, :2] / cam[visible, 2:3], intrinsics)
        inside = (
            (pix[:, 0] >= 0) & (pix[:, 0] < width) & (pix[:, 1] >= 0) & (pix[:, 1] < height)
        )
        idx = np.nonzero(visible)[0][inside]
        tau_us = round(t * 1e6)
        kps = KeypointSet(
            tau_us,
            pix[inside, 0].astype(np.float32),
            pix[inside, 1].astype(np.float32),
            np.ones(len(idx), dtype=np.float32),
            descriptors[idx],
        )
        write_keypoints(kps, preds / f"{tau_us:012d}.sekp")
        q = matrix_to_quat(r_wc)
        fields = [t, position[0], position[1], position[2], q[1], q[2], q[3], q[0]]
        trajectory_lines.append(" ".join(repr(float(v)) for v in fields))

    (out / "trajectory.txt").write_text("\n".join(trajectory_lines) + "\n")
    (out / "intrinsics.json").write_text(
        json.dumps(
            {
                "fx": intrinsics.fx, "fy": intrinsics.fy,
                "cx": intrinsics.cx, "cy": intrinsics.cy,
                "dist": list(intrinsics.distortion),
            },
            indent=2,
        )
        + "\n"
    )
    (out / "bench.toml").write_text(
        "\n".join(
            [
                "[bench]",
                "max_rotation_deg = 45.0",
                "max_dt_s = 2.0",
                "buckets = 45",
                "auc_thresholds = [5.0, 10.0, 20.0]",
                "seed = 7",
                "",
                "[bench.ransac]",
                "iterations = 100",
                "threshold_px = 1.0",
                "seed = 0",
                "",
                "[matcher]",
                "min_similarity = 0.2",
                "",
            ]
        )
    )
    return {
        "trajectory": out / "trajectory.txt",
        "intrinsics": out / "intrinsics.json",
        "predictions": preds,
        "config": out / "bench.toml",
    }
