"""Built-in oracle suites and the throughput benchmark for `selftest`.

Each check cross-validates a fast implementation against a slow,
structurally different reference: incremental time surfaces against the
full event scan, the filtered NMS against per-offset comparisons, the
closed-form AUC against grid integration, and the analytic loss gradients
against central finite differences.
"""

from __future__ import annotations

import time

import numpy as np

from .detection import nms_local_maxima
from .events import EVENT_RECORD_DTYPE
from .losses import (
    DescriptorTarget,
    DetectorTarget,
    LossConfig,
    descriptor_loss,
    detector_loss,
)
from .posebench import auc
from .representation import (
    ActiveEventSurface,
    TimeWindowSet,
    build_mcts,
    mcts_from_aes,
)

__all__ = ["run_selftest", "SelfTestFailure"]


class SelfTestFailure(AssertionError):
    pass


def random_stream(rng, max_events=2000, max_size=64):
    width = int(rng.integers(4, max_size + 1))
    height = int(rng.integers(4, max_size + 1))
    n = int(rng.integers(0, max_events + 1))
    ev = np.empty(n, EVENT_RECORD_DTYPE)
    ev["t"] = np.sort(rng.integers(0, 2_000_000, n))
    ev["x"] = rng.integers(0, width, n)
    ev["y"] = rng.integers(0, height, n)
    ev["p"] = rng.choice([-1, 1], n)
    return width, height, ev


def random_windows(rng) -> TimeWindowSet:
    n = int(rng.integers(1, 6))
    deltas = np.sort(rng.uniform(0.0002, 0.5, n))
    while len(np.unique(deltas)) != n:
        deltas = np.sort(rng.uniform(0.0002, 0.5, n))
    return TimeWindowSet(tuple(deltas))


def check_mcts_equivalence(cases=200, seed=0, max_events=2000, max_size=64) -> str:
    rng = np.random.default_rng(seed)
    for case in range(cases):
        width, height, ev = random_stream(rng, max_events, max_size)
        tau = int(rng.integers(0, 2_500_000))
        windows = random_windows(rng)
        keep = ev[ev["t"] <= np.uint64(tau)]
        brute = build_mcts(ev, tau, windows, width, height)
        aes = ActiveEventSurface(width, height)
        aes.ingest_stream(keep)
        incremental = mcts_from_aes(aes, tau, windows)
        if not np.array_equal(brute.data, incremental.data):
            raise SelfTestFailure(f"mcts equivalence case {case}: routes disagree bitwise")
    return f"{cases} randomized streams, incremental == brute force bitwise"


def nms_offset_scan(heatmap: np.ndarray, radius: int):
    """Reference NMS: compare against every neighborhood offset separately."""
    h, w = heatmap.shape
    padded = np.full((h + 2 * radius, w + 2 * radius), -np.inf, dtype=heatmap.dtype)
    padded[radius:radius + h, radius:radius + w] = heatmap
    keep = np.ones((h, w), dtype=bool)
    for du in range(-radius, radius + 1):
        for dv in range(-radius, radius + 1):
            if du == 0 and dv == 0:
                continue
            shifted = padded[radius + dv:radius + dv + h, radius + du:radius + du + w]
            keep &= heatmap > shifted
    return keep


def check_nms_oracle(cases=200, seed=1, max_size=128) -> str:
    rng = np.random.default_rng(seed)
    for case in range(cases):
        h = int(rng.integers(4, max_size + 1))
        w = int(rng.integers(4, max_size + 1))
        radius = int(rng.choice([1, 2, 3]))
        heat = rng.random((h, w), dtype=np.float32)
        if rng.random() < 0.3:
            heat = np.round(heat, 1)  # force plateaus
        us, vs, _ = nms_local_maxima(heat, radius)
        mask = np.zeros((h, w), dtype=bool)
        mask[vs, us] = True
        if not np.array_equal(mask, nms_offset_scan(heat, radius)):
            raise SelfTestFailure(f"nms case {case}: filtered result != offset scan")
    return f"{cases} randomized heatmaps match the offset-scan reference"


def auc_grid_reference(errors, threshold, grid=100_000) -> float:
    errors = np.asarray(errors, dtype=np.float64)
    if len(errors) == 0:
        return 0.0
    xs = (np.arange(grid) + 0.5) * (threshold / grid)
    recall = (errors[None, :] <= xs[:, None]).mean(axis=1)
    return float(recall.mean())


def check_auc_oracle(cases=100, seed=2, grid=100_000, tolerance=1e-6) -> str:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(200, 2000))
        errors = rng.uniform(0.0, 30.0, n)
        fail = rng.random(n) < 0.2
        errors[fail] = np.inf
        threshold = float(rng.uniform(2.0, 25.0))
        exact = auc(errors, threshold)
        approx = auc_grid_reference(errors, threshold, grid)
        worst = max(worst, abs(exact - approx))
    if worst > tolerance:
        raise SelfTestFailure(f"auc deviates from grid integration by {worst:.2e}")
    return f"{cases} random error lists, max |exact - grid| = {worst:.2e}"


def finite_difference(fun, x, eps=1e-6):
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = fun()
        flat[i] = orig - eps
        lo = fun()
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * eps)
    return grad


def _rel_err(analytic, numeric):
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-12)
    return np.abs(analytic - numeric).max() / scale


def check_detector_gradients(cases=20, seed=3, tolerance=1e-5) -> str:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        hc, wc = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        logits = rng.normal(size=(hc, wc, 65))
        target = DetectorTarget(rng.integers(0, 65, (hc, wc)))
        _, grad = detector_loss(logits, target)
        numeric = finite_difference(lambda: detector_loss(logits, target)[0], logits)
        worst = max(worst, _rel_err(grad, numeric))
    if worst > tolerance:
        raise SelfTestFailure(f"detector gradient off by {worst:.2e} relative")
    return f"{cases} random instances, max relative error {worst:.2e}"


def random_descriptor_instance(rng, dim=6, kink_margin=1e-4, cfg=LossConfig()):
    """Random grids/targets re-drawn until no similarity sits on a hinge kink."""
    while True:
        hc, wc = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        d0 = rng.normal(size=(hc, wc, dim))
        d1 = rng.normal(size=(hc, wc, dim))
        lab0 = rng.random((hc, wc)) < 0.6
        lab1 = rng.random((hc, wc)) < 0.6
        if not lab0.any() or not lab1.any():
            continue
        cells0 = np.argwhere(lab0)
        cells1 = np.argwhere(lab1)
        k = int(rng.integers(0, min(len(cells0), len(cells1)) + 1))
        pairs = np.hstack(
            [
                cells0[rng.choice(len(cells0), k, replace=False)],
                cells1[rng.choice(len(cells1), k, replace=False)],
            ]
        ) if k else np.zeros((0, 4), dtype=np.int64)
        target = DescriptorTarget(pairs, lab0, lab1)
        unit0 = d0[lab0] / np.linalg.norm(d0[lab0], axis=1, keepdims=True)
        unit1 = d1[lab1] / np.linalg.norm(d1[lab1], axis=1, keepdims=True)
        sim = unit0 @ unit1.T
        if (np.abs(sim - cfg.c_p) > kink_margin).all() and (
            np.abs(sim - cfg.c_n) > kink_margin
        ).all():
            return d0, d1, target


def check_descriptor_gradients(cases=20, seed=4, tolerance=1e-5) -> str:
    rng = np.random.default_rng(seed)
    cfg = LossConfig()
    worst = 0.0
    for _ in range(cases):
        d0, d1, target = random_descriptor_instance(rng, cfg=cfg)
        _, g0, g1 = descriptor_loss(d0, d1, target, cfg)
        n0 = finite_difference(lambda: descriptor_loss(d0, d1, target, cfg)[0], d0)
        n1 = finite_difference(lambda: descriptor_loss(d0, d1, target, cfg)[0], d1)
        worst = max(worst, _rel_err(g0, n0), _rel_err(g1, n1))
    if worst > tolerance:
        raise SelfTestFailure(f"descriptor gradient off by {worst:.2e} relative")
    return f"{cases} random instances, max relative error {worst:.2e}"


def measure_throughput(width=640, height=480, num_events=2_000_000, seed=5):
    """AES bulk-ingestion rate and 10-channel materialization latency."""
    rng = np.random.default_rng(seed)
    ev = np.empty(num_events, EVENT_RECORD_DTYPE)
    ev["t"] = np.sort(rng.integers(0, 2_000_000, num_events))
    ev["x"] = rng.integers(0, width, num_events)
    ev["y"] = rng.integers(0, height, num_events)
    ev["p"] = rng.choice([-1, 1], num_events)

    rates = []
    for _ in range(3):
        aes = ActiveEventSurface(width, height)
        start = time.perf_counter()
        aes.ingest_stream(ev)
        rates.append(num_events / (time.perf_counter() - start))

    aes = ActiveEventSurface(width, height)
    aes.ingest_stream(ev)
    tau = int(ev["t"][-1])
    latencies = []
    for _ in range(5):
        start = time.perf_counter()
        mcts_from_aes(aes, tau)
        latencies.append(time.perf_counter() - start)
    return max(rates), min(latencies)


def run_selftest(bench: bool = False, fast: bool = True) -> int:
    """Run every oracle suite, print one PASS/FAIL line each, return rc."""
    scale = 1 if fast else 5
    checks = [
        ("mcts-equivalence", lambda: check_mcts_equivalence(cases=200 * scale)),
        ("nms-oracle", lambda: check_nms_oracle(cases=200 * scale)),
        ("auc-oracle", lambda: check_auc_oracle(cases=100)),
        ("detector-gradients", lambda: check_detector_gradients(cases=20)),
        ("descriptor-gradients", lambda: check_descriptor_gradients(cases=20)),
    ]
    failed = False
    for name, fn in checks:
        try:
            detail = fn()
            print(f"PASS {name}: {detail}")
        except SelfTestFailure as exc:
            print(f"FAIL {name}: {exc}")
            failed = True
    if bench:
        rate, latency = measure_throughput()
        ok_rate = rate >= 5e6
        ok_lat = latency <= 0.020
        print(f"{'PASS' if ok_rate else 'FAIL'} ingest-throughput: "
              f"{rate / 1e6:.1f}M events/s (target >= 5.0M)")
        print(f"{'PASS' if ok_lat else 'FAIL'} mcts-materialization: "
              f"{latency * 1e3:.2f} ms for 10 channels at 640x480 (target <= 20 ms)")
        failed = failed or not (ok_rate and ok_lat)
    return 1 if failed else 0
