"""SuperPoint backend: VGG encoder with detector and descriptor heads.

Weights are loaded from a local checkpoint and can be pinned by SHA256;
nothing is downloaded at run time. Torch is imported lazily so the
default classical backend works without it installed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["SuperPointConfig", "SuperPointBackend", "ModelLoadError"]


class ModelLoadError(RuntimeError):
    pass


@dataclass(frozen=True)
class SuperPointConfig:
    weights: Path | str | None = None
    weights_sha256: str | None = None
    max_keypoints: int = 1024
    score_threshold: float = 0.005
    nms_radius: int = 4


def _build_net(torch):
    nn = torch.nn

    class SuperPointNet(nn.Module):
        def __init__(self):
            super().__init__()
            self.relu = nn.ReLU(inplace=True)
            self.pool = nn.MaxPool2d(2, 2)
            c1, c2, c3, c4, c5, d1 = 64, 64, 128, 128, 256, 256
            self.conv1a = nn.Conv2d(1, c1, 3, 1, 1)
            self.conv1b = nn.Conv2d(c1, c1, 3, 1, 1)
            self.conv2a = nn.Conv2d(c1, c2, 3, 1, 1)
            self.conv2b = nn.Conv2d(c2, c2, 3, 1, 1)
            self.conv3a = nn.Conv2d(c2, c3, 3, 1, 1)
            self.conv3b = nn.Conv2d(c3, c3, 3, 1, 1)
            self.conv4a = nn.Conv2d(c3, c4, 3, 1, 1)
            self.conv4b = nn.Conv2d(c4, c4, 3, 1, 1)
            self.convPa = nn.Conv2d(c4, c5, 3, 1, 1)
            self.convPb = nn.Conv2d(c5, 65, 1, 1, 0)
            self.convDa = nn.Conv2d(c4, c5, 3, 1, 1)
            self.convDb = nn.Conv2d(c5, d1, 1, 1, 0)

        def forward(self, x):
            x = self.relu(self.conv1a(x))
            x = self.relu(self.conv1b(x))
            x = self.pool(x)
            x = self.relu(self.conv2a(x))
            x = self.relu(self.conv2b(x))
            x = self.pool(x)
            x = self.relu(self.conv3a(x))
            x = self.relu(self.conv3b(x))
            x = self.pool(x)
            x = self.relu(self.conv4a(x))
            x = self.relu(self.conv4b(x))
            scores = self.convPb(self.relu(self.convPa(x)))
            desc = self.convDb(self.relu(self.convDa(x)))
            return scores, desc

    return SuperPointNet()


class SuperPointBackend:
    """Detector/descriptor inference; construct once, call per frame."""

    def __init__(self, cfg: SuperPointConfig = SuperPointConfig()):
        try:
            import torch
        except ImportError as exc:
            raise ModelLoadError("the superpoint backend requires torch") from exc
        self.torch = torch
        self.cfg = cfg
        self.net = _build_net(torch)
        if cfg.weights is None:
            raise ModelLoadError("superpoint backend needs --weights (a local checkpoint)")
        path = Path(cfg.weights)
        if not path.exists():
            raise ModelLoadError(f"weights file not found: {path}")
        if cfg.weights_sha256:
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            if digest != cfg.weights_sha256.lower():
                raise ModelLoadError(
                    f"weights hash mismatch: got {digest}, pinned {cfg.weights_sha256}"
                )
        try:
            state = torch.load(path, map_location="cpu", weights_only=True)
            self.net.load_state_dict(state)
        except Exception as exc:
            raise ModelLoadError(f"cannot load weights from {path}: {exc}") from exc
        self.net.eval()

    def __call__(self, image: np.ndarray):
        torch = self.torch
        cfg = self.cfg
        h8, w8 = (image.shape[0] // 8) * 8, (image.shape[1] // 8) * 8
        tensor = torch.from_numpy(image[:h8, :w8]).float()[None, None]
        with torch.no_grad():
            logits, raw_desc = self.net(tensor)
            probs = torch.softmax(logits, dim=1)[0, :-1]  # drop the dustbin
            hc, wc = probs.shape[1], probs.shape[2]
            heat = probs.reshape(8, 8, hc, wc).permute(2, 0, 3, 1).reshape(hc * 8, wc * 8)
            pooled = torch.nn.functional.max_pool2d(
                heat[None, None], kernel_size=2 * cfg.nms_radius + 1,
                stride=1, padding=cfg.nms_radius,
            )[0, 0]
            mask = (heat == pooled) & (heat >= cfg.score_threshold)
            vs, us = torch.nonzero(mask, as_tuple=True)
            scores = heat[vs, us]
            if len(scores) > cfg.max_keypoints:
                top = torch.topk(scores, cfg.max_keypoints).indices
                us, vs, scores = us[top], vs[top], scores[top]
            desc = torch.nn.functional.normalize(raw_desc[0], dim=0)
            grid = torch.stack(
                [us.float() / (w8 - 1) * 2 - 1, vs.float() / (h8 - 1) * 2 - 1], dim=1
            )[None, None]
            sampled = torch.nn.functional.grid_sample(
                desc[None], grid, mode="bilinear", align_corners=True
            )[0, :, 0].T
            sampled = torch.nn.functional.normalize(sampled, dim=1)
        return (
            us.numpy().astype(np.float32),
            vs.numpy().astype(np.float32),
            scores.numpy().astype(np.float32),
            sampled.numpy().astype(np.float32),
        )
