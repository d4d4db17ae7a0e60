"""Reference training losses with analytic gradients.

Detector: mean softmax cross-entropy over grid cells, each cell classifying
its keypoint pixel among 64 bins plus a dustbin. Descriptor: hinge terms on
the dot product of L2-normalized cell descriptors, saturating at c_p for
matching pairs and c_n for non-matching ones; only labeled cells take part.
The total objective adds both detector losses to the descriptor loss
weighted by c_lambda.

Everything here runs in float64 so the gradients can serve as an oracle for
training-framework implementations; the analytic forms are validated
against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detection import DUSTBIN

__all__ = [
    "LossConfig",
    "DetectorTarget",
    "DescriptorTarget",
    "detector_loss",
    "descriptor_loss",
    "total_loss",
]

NUM_CLASSES = DUSTBIN + 1


@dataclass(frozen=True)
class LossConfig:
    c_lambda: float = 10.0   # descriptor loss weight
    c_d: float = 0.5         # matching-pair weight
    c_p: float = 1.0         # positive saturation margin
    c_n: float = 0.2         # negative saturation margin

    def __post_init__(self) -> None:
        if min(self.c_lambda, self.c_d, self.c_p, self.c_n) <= 0:
            raise ValueError("loss constants must be positive")
        if self.c_p <= self.c_n:
            raise ValueError(f"c_p ({self.c_p}) must exceed c_n ({self.c_n})")


@dataclass(frozen=True)
class DetectorTarget:
    """One-hot cell classification targets, stored as class indices.

    ``classes[h, w]`` is the winning pixel bin (row-major within the 8x8
    cell) or DUSTBIN (=64) for cells without a keypoint.
    """

    classes: np.ndarray

    def __post_init__(self) -> None:
        cls = np.ascontiguousarray(self.classes, dtype=np.int64)
        if cls.ndim != 2:
            raise ValueError(f"classes must be (H_c, W_c), got {cls.shape}")
        if cls.size and (cls.min() < 0 or cls.max() >= NUM_CLASSES):
            raise ValueError("class index outside [0, 65)")
        object.__setattr__(self, "classes", cls)


@dataclass(frozen=True)
class DescriptorTarget:
    """Sparse correspondence labels on the cell grid.

    ``pairs`` is (P, 4) of (h0, w0, h1, w1) matching cells; ``labeled0`` /
    ``labeled1`` mark the cells carrying a keypoint label on each side.
    Matching cells must be labeled and appear at most once per side; every
    labeled cross pair that is not in ``pairs`` counts as a non-match.
    """

    pairs: np.ndarray
    labeled0: np.ndarray
    labeled1: np.ndarray

    def __post_init__(self) -> None:
        pairs = np.ascontiguousarray(self.pairs, dtype=np.int64).reshape(-1, 4)
        lab0 = np.ascontiguousarray(self.labeled0, dtype=bool)
        lab1 = np.ascontiguousarray(self.labeled1, dtype=bool)
        if lab0.ndim != 2 or lab1.ndim != 2:
            raise ValueError("labeled masks must be 2-d")
        for side, (hs, ws), mask in (
            (0, (pairs[:, 0], pairs[:, 1]), lab0),
            (1, (pairs[:, 2], pairs[:, 3]), lab1),
        ):
            if len(pairs) == 0:
                continue
            hc, wc = mask.shape
            if (hs < 0).any() or (hs >= hc).any() or (ws < 0).any() or (ws >= wc).any():
                raise ValueError(f"pair cell outside grid on side {side}")
            if not mask[hs, ws].all():
                raise ValueError(f"matching pair references unlabeled cell on side {side}")
            flat = hs * wc + ws
            if len(np.unique(flat)) != len(flat):
                raise ValueError(f"matching pairs reuse a cell on side {side}")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "labeled0", lab0)
        object.__setattr__(self, "labeled1", lab1)

    def transposed(self) -> "DescriptorTarget":
        return DescriptorTarget(self.pairs[:, [2, 3, 0, 1]], self.labeled1, self.labeled0)


def detector_loss(logits: np.ndarray, target: DetectorTarget):
    """Mean cross-entropy over cells plus its gradient w.r.t. the logits.

    gradient = (softmax - onehot) / (H_c * W_c)
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 3 or logits.shape[2] != NUM_CLASSES:
        raise ValueError(f"expected (H_c, W_c, {NUM_CLASSES}) logits, got {logits.shape}")
    if logits.shape[:2] != target.classes.shape:
        raise ValueError(
            f"logit grid {logits.shape[:2]} vs target grid {target.classes.shape}"
        )
    hc, wc, _ = logits.shape
    shifted = logits - logits.max(axis=2, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=2, keepdims=True))
    log_probs = shifted - logz
    hh, ww = np.indices((hc, wc))
    loss = -log_probs[hh, ww, target.classes].mean()
    grad = np.exp(log_probs)
    grad[hh, ww, target.classes] -= 1.0
    grad /= hc * wc
    return float(loss), grad


def _normalize_rows(rows: np.ndarray):
    norms = np.linalg.norm(rows, axis=1)
    if (norms == 0).any():
        raise ValueError("labeled cell has a zero descriptor")
    return rows / norms[:, None], norms


def descriptor_loss(desc0: np.ndarray, desc1: np.ndarray, target: DescriptorTarget,
                    cfg: LossConfig = LossConfig()):
    """Hinge descriptor loss and gradients w.r.t. the raw (pre-norm) grids.

    Similarity d is the dot product of the normalized descriptors. Matching
    pairs contribute c_d * max(0, c_p - d); every other labeled cross pair
    contributes max(0, d - c_n). Gradients flow through the normalization:
    d(y/|y|)/dy = (I - yy^T/|y|^2) / |y|. At the hinge kinks (d == margin)
    the flat-side subgradient 0 is used. Unlabeled cells get zero gradient.
    """
    desc0 = np.asarray(desc0, dtype=np.float64)
    desc1 = np.asarray(desc1, dtype=np.float64)
    if desc0.shape != desc1.shape or desc0.ndim != 3:
        raise ValueError(f"descriptor grids disagree: {desc0.shape} vs {desc1.shape}")
    if target.labeled0.shape != desc0.shape[:2] or target.labeled1.shape != desc1.shape[:2]:
        raise ValueError("labeled masks do not match the grids")

    grad0 = np.zeros_like(desc0)
    grad1 = np.zeros_like(desc1)
    cells0 = np.argwhere(target.labeled0)
    cells1 = np.argwhere(target.labeled1)
    if len(cells0) == 0 or len(cells1) == 0:
        return 0.0, grad0, grad1

    raw0 = desc0[cells0[:, 0], cells0[:, 1]]
    raw1 = desc1[cells1[:, 0], cells1[:, 1]]
    unit0, norm0 = _normalize_rows(raw0)
    unit1, norm1 = _normalize_rows(raw1)
    sim = unit0 @ unit1.T

    wc0 = target.labeled0.shape[1]
    wc1 = target.labeled1.shape[1]
    pos0 = {h * wc0 + w: r for r, (h, w) in enumerate(cells0)}
    pos1 = {h * wc1 + w: r for r, (h, w) in enumerate(cells1)}
    is_match = np.zeros(sim.shape, dtype=bool)
    for h0, w0, h1, w1 in target.pairs:
        is_match[pos0[h0 * wc0 + w0], pos1[h1 * wc1 + w1]] = True

    pos_term = np.where(is_match, cfg.c_d * np.maximum(0.0, cfg.c_p - sim), 0.0)
    neg_term = np.where(~is_match, np.maximum(0.0, sim - cfg.c_n), 0.0)
    loss = float(pos_term.sum() + neg_term.sum())

    dsim = np.where(is_match & (sim < cfg.c_p), -cfg.c_d, 0.0)
    dsim += np.where(~is_match & (sim > cfg.c_n), 1.0, 0.0)

    gu0 = dsim @ unit1
    gu1 = dsim.T @ unit0
    graw0 = (gu0 - (gu0 * unit0).sum(axis=1, keepdims=True) * unit0) / norm0[:, None]
    graw1 = (gu1 - (gu1 * unit1).sum(axis=1, keepdims=True) * unit1) / norm1[:, None]
    grad0[cells0[:, 0], cells0[:, 1]] = graw0
    grad1[cells1[:, 0], cells1[:, 1]] = graw1
    return loss, grad0, grad1


def total_loss(detector0: float, detector1: float, descriptor: float,
               c_lambda: float = LossConfig().c_lambda) -> float:
    """Combined objective: both detector losses plus the weighted descriptor loss."""
    return detector0 + detector1 + c_lambda * descriptor
