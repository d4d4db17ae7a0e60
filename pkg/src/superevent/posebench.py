"""Rotation-change pose-estimation benchmark.

Samples are drawn from a ground-truth trajectory: a reference timestamp
qualifies when the orientation changes by the maximum bucket angle within
a bounded look-ahead, and then one target timestamp is emitted per bucket
(the first sample whose rotation change reaches the bucket). For each
sample, keypoints from a prediction provider are matched, undistorted,
fed to RANSAC relative-pose estimation, and scored by the angle of the
rotation difference; the cumulative error curve is summarized as AUC.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .epipolar import MIN_MATCHES, RansacConfig, estimate_relative_pose
from .events import CameraIntrinsics, PoseStamped
from .matching import DEFAULT_MIN_SIMILARITY, KeypointSet, match_mutual_nn

__all__ = [
    "BenchConfig",
    "PoseSample",
    "SampleResult",
    "BenchmarkReport",
    "PredictionProvider",
    "quat_conj",
    "quat_mul",
    "quat_to_matrix",
    "select_samples",
    "distort_points",
    "undistort",
    "rotation_error",
    "auc",
    "run_benchmark",
    "resolve_threads",
]

THREADS_ENV = "SUPEREVENT_THREADS"

PredictionProvider = Callable[[int], Optional[KeypointSet]]


@dataclass(frozen=True)
class BenchConfig:
    max_rotation_deg: float = 45.0   # rotation change a reference must reach
    max_dt_s: float = 2.0            # look-ahead window
    buckets: int = 45                # evenly spaced rotation-change targets
    ransac: RansacConfig = field(default_factory=RansacConfig)
    auc_thresholds: tuple[float, ...] = (5.0, 10.0, 20.0)
    min_similarity: float = DEFAULT_MIN_SIMILARITY
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_rotation_deg <= 0 or self.max_dt_s <= 0:
            raise ValueError("rotation and time bounds must be positive")
        if self.buckets < 1:
            raise ValueError(f"buckets must be >= 1, got {self.buckets}")
        th = tuple(float(t) for t in self.auc_thresholds)
        if any(t <= 0 for t in th) or any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError(f"auc thresholds must be positive ascending: {th}")
        object.__setattr__(self, "auc_thresholds", th)


@dataclass(frozen=True)
class PoseSample:
    """One benchmark measurement: reference/target times and the ground truth.

    ``rotation`` is the unit quaternion (w, x, y, z) of the target camera
    frame relative to the reference camera frame, i.e. R(q) maps
    reference-camera coordinates into the target camera — the same
    convention the essential-matrix estimate uses.
    """

    t_ref: float
    t_tgt: float
    rotation: np.ndarray
    bucket_deg: float

    @property
    def tau_ref_us(self) -> int:
        return round(self.t_ref * 1e6)

    @property
    def tau_tgt_us(self) -> int:
        return round(self.t_tgt * 1e6)

    def gt_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)


@dataclass(frozen=True)
class SampleResult:
    sample: PoseSample
    error_deg: float
    num_inliers: int
    num_matches: int
    status: str  # ok | failed | skipped


@dataclass(frozen=True)
class BenchmarkReport:
    results: tuple[SampleResult, ...]
    auc: dict[float, float]
    num_samples: int
    num_failures: int
    num_skipped: int
    mean_inlier_ratio: float

    def errors(self) -> np.ndarray:
        return np.array([r.error_deg for r in self.results if r.status != "skipped"])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def select_samples(trajectory: Sequence[PoseStamped], cfg: BenchConfig) -> list[PoseSample]:
    """Bucketed rotation-change samples from a time-sorted trajectory.

    A reference pose only emits samples when the rotation change reaches
    ``max_rotation_deg`` somewhere within ``max_dt_s``; each bucket angle
    then maps to the first subsequent pose whose rotation change reaches it.
    """
    times = np.array([p.t for p in trajectory])
    quats = np.array([p.orientation for p in trajectory])
    bucket_angles = cfg.max_rotation_deg / cfg.buckets * np.arange(1, cfg.buckets + 1)
    samples: list[PoseSample] = []
    for a in range(len(trajectory)):
        stop = int(np.searchsorted(times, times[a] + cfg.max_dt_s, side="right"))
        if stop <= a + 1:
            continue
        window = slice(a + 1, stop)
        dots = np.abs(quats[window] @ quats[a])
        angles = 2.0 * np.degrees(np.arccos(np.clip(dots, 0.0, 1.0)))
        running = np.maximum.accumulate(angles)
        if running[-1] < cfg.max_rotation_deg:
            continue
        hits = np.searchsorted(running, bucket_angles, side="left")
        for bucket, hit in zip(bucket_angles, hits):
            b = a + 1 + int(hit)
            q_rel = quat_mul(quat_conj(quats[b]), quats[a])
            samples.append(PoseSample(float(times[a]), float(times[b]), q_rel, float(bucket)))
    return samples


def distort_points(points: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Forward radial-tangential model: normalized coords -> pixels."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    k1, k2, p1, p2 = intrinsics.distortion
    x, y = pts[:, 0], pts[:, 1]
    r2 = x * x + y * y
    radial = 1.0 + k1 * r2 + k2 * r2 * r2
    xd = x * radial + 2 * p1 * x * y + p2 * (r2 + 2 * x * x)
    yd = y * radial + p1 * (r2 + 2 * y * y) + 2 * p2 * x * y
    return np.stack(
        [xd * intrinsics.fx + intrinsics.cx, yd * intrinsics.fy + intrinsics.cy], axis=1
    )


def undistort(
    points: np.ndarray,
    intrinsics: CameraIntrinsics,
    iterations: int = 10,
    tolerance: float = 1e-6,
):
    """Pixel coordinates -> normalized coordinates, inverting the distortion.

    Fixed-point iteration of the radial-tangential model. Points whose
    residual still exceeds ``tolerance`` (normalized units) after the fixed
    iteration budget are flagged invalid so callers can drop and count them.
    Returns (normalized (N, 2), valid (N,) bool).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    k1, k2, p1, p2 = intrinsics.distortion
    xd = (pts[:, 0] - intrinsics.cx) / intrinsics.fx
    yd = (pts[:, 1] - intrinsics.cy) / intrinsics.fy
    x, y = xd.copy(), yd.copy()
    for _ in range(iterations):
        r2 = x * x + y * y
        radial = 1.0 + k1 * r2 + k2 * r2 * r2
        dx = 2 * p1 * x * y + p2 * (r2 + 2 * x * x)
        dy = p1 * (r2 + 2 * y * y) + 2 * p2 * x * y
        x = (xd - dx) / radial
        y = (yd - dy) / radial
    r2 = x * x + y * y
    radial = 1.0 + k1 * r2 + k2 * r2 * r2
    res_x = x * radial + 2 * p1 * x * y + p2 * (r2 + 2 * x * x) - xd
    res_y = y * radial + p1 * (r2 + 2 * y * y) + 2 * p2 * x * y - yd
    valid = np.hypot(res_x, res_y) <= tolerance
    return np.stack([x, y], axis=1), valid


def rotation_error(r_est: np.ndarray, r_gt: np.ndarray) -> float:
    """Angle (degrees) of the rotation taking the estimate onto the truth."""
    for name, r in (("estimate", r_est), ("ground truth", r_gt)):
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (3, 3) or np.abs(r.T @ r - np.eye(3)).max() > 1e-6 or np.linalg.det(r) < 0:
            raise ValueError(f"{name} rotation is not orthonormal")
    cos = (np.trace(r_gt.T @ r_est) - 1.0) / 2.0
    return math.degrees(math.acos(min(1.0, max(-1.0, cos))))


def auc(errors, threshold: float) -> float:
    """Normalized area under the cumulative error curve on [0, threshold].

    Exact integral of the empirical step curve: each finite error e below
    the threshold contributes (threshold - e); failures (inf) contribute 0.
    """
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    errors = np.asarray(errors, dtype=np.float64)
    n = len(errors)
    if n == 0:
        return 0.0
    covered = errors[np.isfinite(errors) & (errors <= threshold)]
    return float((threshold - covered).sum() / (n * threshold))


def resolve_threads(threads: int | None = None) -> int:
    if threads is not None and threads > 0:
        return threads
    env = os.environ.get(THREADS_ENV, "")
    if env.strip():
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _evaluate_sample(
    sample: PoseSample,
    provider: PredictionProvider,
    intrinsics: CameraIntrinsics,
    cfg: BenchConfig,
) -> SampleResult:
    kps_ref = provider(sample.tau_ref_us)
    kps_tgt = provider(sample.tau_tgt_us)
    if kps_ref is None or kps_tgt is None:
        return SampleResult(sample, math.inf, 0, 0, "skipped")
    matches = match_mutual_nn(kps_ref, kps_tgt, cfg.min_similarity)
    m = len(matches)
    if m < MIN_MATCHES:
        return SampleResult(sample, math.inf, 0, m, "failed")
    pix_ref = np.stack([kps_ref.u[matches.index_a], kps_ref.v[matches.index_a]], axis=1)
    pix_tgt = np.stack([kps_tgt.u[matches.index_b], kps_tgt.v[matches.index_b]], axis=1)
    norm_ref, ok_ref = undistort(pix_ref, intrinsics)
    norm_tgt, ok_tgt = undistort(pix_tgt, intrinsics)
    keep = ok_ref & ok_tgt
    if keep.sum() < MIN_MATCHES:
        return SampleResult(sample, math.inf, 0, m, "failed")
    # parallel and serial runs agree because every sample derives its own seed
    seed = int(np.random.SeedSequence(
        [cfg.seed, sample.tau_ref_us, sample.tau_tgt_us]
    ).generate_state(1)[0])
    estimate = estimate_relative_pose(
        norm_ref[keep],
        norm_tgt[keep],
        replace(cfg.ransac, seed=seed),
        focal=math.sqrt(intrinsics.fx * intrinsics.fy),
    )
    if estimate is None:
        return SampleResult(sample, math.inf, 0, m, "failed")
    err = rotation_error(estimate.rotation, sample.gt_matrix())
    return SampleResult(sample, err, estimate.num_inliers, m, "ok")


def run_benchmark(
    trajectory: Sequence[PoseStamped],
    provider: PredictionProvider,
    intrinsics: CameraIntrinsics,
    cfg: BenchConfig = BenchConfig(),
    threads: int | None = None,
) -> BenchmarkReport:
    """Evaluate every selected sample and summarize AUC at the thresholds.

    Samples are independent; they are evaluated on a thread pool and the
    report order (and content) is identical for any thread count.
    """
    samples = select_samples(trajectory, cfg)
    workers = resolve_threads(threads)
    if workers > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda s: _evaluate_sample(s, provider, intrinsics, cfg), samples)
            )
    else:
        results = [_evaluate_sample(s, provider, intrinsics, cfg) for s in samples]
    evaluated = [r for r in results if r.status != "skipped"]
    errors = np.array([r.error_deg for r in evaluated]) if evaluated else np.zeros(0)
    ratios = [r.num_inliers / r.num_matches for r in evaluated if r.status == "ok"]
    return BenchmarkReport(
        results=tuple(results),
        auc={t: auc(errors, t) for t in cfg.auc_thresholds},
        num_samples=len(results),
        num_failures=sum(1 for r in evaluated if r.status == "failed"),
        num_skipped=sum(1 for r in results if r.status == "skipped"),
        mean_inlier_ratio=float(np.mean(ratios)) if ratios else 0.0,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def write_report_csv(report: BenchmarkReport, path: Path | str) -> None:
    lines = ["tau_ref_us,tau_tgt_us,bucket_deg,error_deg,inliers,matches"]
    for r in report.results:
        lines.append(
            f"{r.sample.tau_ref_us},{r.sample.tau_tgt_us},{_fmt(r.sample.bucket_deg)},"
            f"{_fmt(r.error_deg)},{r.num_inliers},{r.num_matches}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_report_json(report: BenchmarkReport, path: Path | str) -> None:
    doc = {
        "auc": {_fmt(t): v for t, v in report.auc.items()},
        "samples": report.num_samples,
        "failures": report.num_failures,
        "skipped": report.num_skipped,
        "mean_inlier_ratio": report.mean_inlier_ratio,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def write_cumulative_curve_csv(report: BenchmarkReport, threshold: float, path: Path | str) -> None:
    """Breakpoints of the cumulative error curve up to the threshold."""
    errors = np.sort(report.errors())
    n = len(errors)
    lines = ["error_deg,recall"]
    lines.append(f"{_fmt(0.0)},{_fmt(0.0)}")
    for i, e in enumerate(errors[np.isfinite(errors) & (errors <= threshold)]):
        lines.append(f"{_fmt(e)},{_fmt((i + 1) / n)}")
    covered = float((errors[np.isfinite(errors)] <= threshold).sum() / n) if n else 0.0
    lines.append(f"{_fmt(threshold)},{_fmt(covered)}")
    Path(path).write_text("\n".join(lines) + "\n")
