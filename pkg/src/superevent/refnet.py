"""Tiny deterministic reference network for pipeline plumbing tests.

Two 3x3 convolutions with average pooling down to stride 8, then 1x1
detector (65 channels) and descriptor (256 channels) heads. Weights are
seeded random floats; the network predicts nothing useful, but it has the
real tensor geometry, so decoding, descriptor sampling, and the benchmark
harness can be exercised end to end without a trained model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .representation import Mcts

__all__ = ["Prediction", "RefNet"]

DESCRIPTOR_DIM = 256
DETECTOR_CLASSES = 65


@dataclass(frozen=True)
class Prediction:
    """Raw network output: per-cell class logits and raw grid descriptors."""

    cells: np.ndarray        # (H_c, W_c, 65)
    descriptors: np.ndarray  # (H_c, W_c, 256)


def _conv3x3(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(padded, (3, 3), axis=(1, 2))
    out = np.einsum("chwij,ocij->ohw", windows, w, optimize=True)
    return out + b[:, None, None]


def _avg_pool(x: np.ndarray, k: int) -> np.ndarray:
    c, h, w = x.shape
    return x.reshape(c, h // k, k, w // k, k).mean(axis=(2, 4))


class RefNet:
    """Fixed-weight convolutional stub with detector and descriptor heads."""

    def __init__(self, weights: dict[str, np.ndarray]):
        self.weights = {k: np.asarray(v, dtype=np.float32) for k, v in weights.items()}

    @classmethod
    def create(cls, seed: int = 0, in_channels: int = 10) -> "RefNet":
        rng = np.random.default_rng(seed)

        def he(shape, fan_in):
            return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(np.float32)

        return cls(
            {
                "conv1_w": he((16, in_channels, 3, 3), in_channels * 9),
                "conv1_b": rng.uniform(-0.1, 0.1, 16).astype(np.float32),
                "conv2_w": he((32, 16, 3, 3), 16 * 9),
                "conv2_b": rng.uniform(-0.1, 0.1, 32).astype(np.float32),
                "det_w": he((DETECTOR_CLASSES, 32), 32),
                "det_b": rng.uniform(-0.1, 0.1, DETECTOR_CLASSES).astype(np.float32),
                "desc_w": he((DESCRIPTOR_DIM, 32), 32),
                "desc_b": rng.uniform(-0.1, 0.1, DESCRIPTOR_DIM).astype(np.float32),
            }
        )

    @property
    def in_channels(self) -> int:
        return self.weights["conv1_w"].shape[1]

    def forward(self, mcts) -> Prediction:
        x = mcts.data if isinstance(mcts, Mcts) else np.asarray(mcts, dtype=np.float32)
        if x.ndim != 3 or x.shape[0] != self.in_channels:
            raise ValueError(f"expected ({self.in_channels}, H, W) input, got {x.shape}")
        _, h, w = x.shape
        if h % 8 or w % 8:
            raise ValueError(f"input {h}x{w} not divisible by 8; crop before calling")
        wts = self.weights
        x = np.maximum(_conv3x3(x, wts["conv1_w"], wts["conv1_b"]), 0.0)
        x = _avg_pool(x, 4)
        x = np.maximum(_conv3x3(x, wts["conv2_w"], wts["conv2_b"]), 0.0)
        x = _avg_pool(x, 2)  # (32, H/8, W/8)
        feats = x.transpose(1, 2, 0)
        cells = feats @ wts["det_w"].T + wts["det_b"]
        descriptors = feats @ wts["desc_w"].T + wts["desc_b"]
        return Prediction(cells.astype(np.float32), descriptors.astype(np.float32))
