"""Detection training objective on raw output maps.

Three terms: penalty-reduced focal loss on the squashed heatmap, mean L1
on predicted radii at keypoint cells, and mean L1 on predicted sub-cell
offsets. Every term returns the analytic gradient with respect to the raw
maps (heatmap gradients are with respect to pre-squash logits).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .encode import HeatmapTargets, Keypoint

__all__ = [
    "SQUASH_EPS",
    "OutputMaps",
    "LossWeights",
    "LossReport",
    "squash",
    "focal_loss",
    "radius_loss",
    "offset_loss",
    "total_loss",
]

# Squashed heatmap values are clamped this far from {0, 1} before any log.
SQUASH_EPS = 1e-7


@dataclass
class OutputMaps:
    """Raw prediction grids: heatmap logits (C, H, W), radius (H, W),
    offsets (2, H, W) ordered (dx, dy)."""

    heatmap_logits: np.ndarray
    radius: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.heatmap_logits).all()
                and np.isfinite(self.radius).all()
                and np.isfinite(self.offset).all()):
            raise ValueError("output maps must be finite")

    def copy(self) -> "OutputMaps":
        return OutputMaps(self.heatmap_logits.copy(), self.radius.copy(),
                          self.offset.copy())


@dataclass(frozen=True)
class LossWeights:
    """Term weights and focal exponents."""

    lambda_radius: float = 0.1
    lambda_off: float = 1.0
    alpha: float = 2.0
    beta: float = 4.0

    def __post_init__(self):
        for name in ("lambda_radius", "lambda_off", "alpha", "beta"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("focal exponents must be >= 0")


@dataclass
class LossReport:
    """Scalar loss terms plus gradients shaped like the output maps."""

    l_heatmap: float
    l_offset: float
    l_radius: float
    l_total: float
    grad_heatmap_logits: np.ndarray
    grad_radius: np.ndarray
    grad_offset: np.ndarray


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Branch on sign to avoid exp overflow for large |z|.
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def squash(logits: np.ndarray) -> np.ndarray:
    """Logistic squashing with clamping away from 0 and 1."""
    return np.clip(_sigmoid(np.asarray(logits, dtype=float)),
                   SQUASH_EPS, 1.0 - SQUASH_EPS)


def focal_loss(logits: np.ndarray, target: np.ndarray, alpha: float,
               beta: float) -> tuple[float, np.ndarray]:
    """Penalty-reduced pixel-wise focal loss and its gradient w.r.t. logits.

    Cells where the target is exactly 1 are positives; everywhere else the
    penalty is reduced by (1 - target)^beta. Normalized by the number of
    positive cells, which must be at least one.
    """
    if logits.shape != target.shape:
        raise ValueError(
            f"shape mismatch: logits {logits.shape} vs target {target.shape}")
    pos = target == 1.0
    n = int(np.count_nonzero(pos))
    if n == 0:
        raise ValueError("focal loss undefined: no positive (target == 1) cells")

    s = _sigmoid(np.asarray(logits, dtype=float))
    y = np.clip(s, SQUASH_EPS, 1.0 - SQUASH_EPS)

    pos_term = np.where(pos, (1.0 - y) ** alpha * np.log(y), 0.0)
    neg_term = np.where(pos, 0.0,
                        (1.0 - target) ** beta * y ** alpha * np.log(1.0 - y))
    loss = -(pos_term.sum() + neg_term.sum()) / n

    dpos = -alpha * (1.0 - y) ** (alpha - 1.0) * np.log(y) + (1.0 - y) ** alpha / y
    dneg = (1.0 - target) ** beta * (
        alpha * y ** (alpha - 1.0) * np.log(1.0 - y) - y ** alpha / (1.0 - y))
    dloss_dy = -np.where(pos, dpos, dneg) / n
    # Chain through the squash; clamped cells have zero slope.
    dy_dlogit = np.where((s > SQUASH_EPS) & (s < 1.0 - SQUASH_EPS),
                         s * (1.0 - s), 0.0)
    return float(loss), dloss_dy * dy_dlogit


def radius_loss(radius_pred: np.ndarray,
                keypoints: Sequence[Keypoint]) -> tuple[float, np.ndarray]:
    """Mean absolute radius error over keypoint cells, with gradient.

    The L1 subgradient at zero residual is taken as 0; gradient entries are
    nonzero only at keypoint cells.
    """
    if not keypoints:
        raise ValueError("radius loss undefined for an empty keypoint list")
    grad = np.zeros_like(radius_pred)
    total = 0.0
    n = len(keypoints)
    for k in keypoints:
        res = radius_pred[k.cell_y, k.cell_x] - k.radius
        total += abs(res)
        grad[k.cell_y, k.cell_x] += np.sign(res)
    return total / n, grad / n


def offset_loss(offset_pred: np.ndarray,
                keypoints: Sequence[Keypoint]) -> tuple[float, np.ndarray]:
    """Mean L1 error of predicted sub-cell offsets, summed over both
    coordinates per object and averaged over objects."""
    if not keypoints:
        raise ValueError("offset loss undefined for an empty keypoint list")
    grad = np.zeros_like(offset_pred)
    total = 0.0
    n = len(keypoints)
    for k in keypoints:
        for ch, target in ((0, k.offset_x), (1, k.offset_y)):
            res = offset_pred[ch, k.cell_y, k.cell_x] - target
            total += abs(res)
            grad[ch, k.cell_y, k.cell_x] += np.sign(res)
    return total / n, grad / n


def total_loss(maps: OutputMaps, targets: HeatmapTargets,
               weights: LossWeights = LossWeights()) -> LossReport:
    """Weighted sum of the three terms with accumulated gradients."""
    if maps.heatmap_logits.shape != targets.heatmap.shape:
        raise ValueError(
            f"heatmap shape mismatch: {maps.heatmap_logits.shape} vs "
            f"{targets.heatmap.shape}")
    l_k, g_k = focal_loss(maps.heatmap_logits, targets.heatmap,
                          weights.alpha, weights.beta)
    l_r, g_r = radius_loss(maps.radius, targets.keypoints)
    l_o, g_o = offset_loss(maps.offset, targets.keypoints)
    l_total = l_k + weights.lambda_radius * l_r + weights.lambda_off * l_o
    return LossReport(
        l_heatmap=l_k,
        l_offset=l_o,
        l_radius=l_r,
        l_total=l_total,
        grad_heatmap_logits=g_k,
        grad_radius=weights.lambda_radius * g_r,
        grad_offset=weights.lambda_off * g_o,
    )
