"""Predicted output maps to scored circles.

Peaks are heatmap cells that dominate their 8-connected neighborhood; each
peak is turned back into an input-resolution circle by adding the predicted
sub-cell offset and scaling by the output stride.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import Circle, Point2, circle_nms
from .losses import OutputMaps, squash

__all__ = ["DecodeConfig", "Peak", "extract_peaks", "decode_circles"]


@dataclass(frozen=True)
class DecodeConfig:
    """Peak selection and reconstruction parameters."""

    top_n: int = 100
    score_threshold: float = 0.0
    stride: int = 4
    apply_nms: bool = False
    nms_threshold: float = 0.5

    def __post_init__(self):
        if self.top_n < 1:
            raise ValueError(f"top_n must be >= 1, got {self.top_n}")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError(
                f"score_threshold must be in [0, 1], got {self.score_threshold}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")


class Peak(NamedTuple):
    category: int
    cell_x: int
    cell_y: int
    score: float


def extract_peaks(heatmap: np.ndarray, cfg: DecodeConfig) -> list[Peak]:
    """Local maxima of a (C, H, W) heatmap under 8-connectivity.

    A cell qualifies if its value is >= every in-bounds neighbor. Peaks are
    sorted by descending score with ties broken by (category, y, x), cut at
    the score threshold, and truncated to the configured count.
    """
    heat = np.asarray(heatmap, dtype=float)
    if heat.ndim != 3:
        raise ValueError(f"heatmap must be (C, H, W), got shape {heat.shape}")
    c, h, w = heat.shape
    # Compare against shifted copies padded with -inf outside the border.
    padded = np.full((c, h + 2, w + 2), -np.inf)
    padded[:, 1:-1, 1:-1] = heat
    is_peak = np.ones((c, h, w), dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            neighbor = padded[:, 1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
            is_peak &= heat >= neighbor
    cats, ys, xs = np.nonzero(is_peak)
    peaks = [Peak(int(ci), int(xi), int(yi), float(heat[ci, yi, xi]))
             for ci, yi, xi in zip(cats, ys, xs)
             if heat[ci, yi, xi] >= cfg.score_threshold]
    peaks.sort(key=lambda p: (-p.score, p.category, p.cell_y, p.cell_x))
    return peaks[:cfg.top_n]


def decode_circles(maps: OutputMaps, cfg: DecodeConfig) -> list[Circle]:
    """Reconstruct scored circles from raw output maps.

    For each peak the center is (cell + predicted offset) * stride and the
    radius is the radius-map value at the peak cell times the stride, with
    negative predictions clamped to zero. Scores come straight from the
    squashed heatmap, so the returned list is sorted by descending score.
    """
    heat = squash(maps.heatmap_logits)
    if maps.radius.shape != heat.shape[1:]:
        raise ValueError(
            f"radius map shape {maps.radius.shape} does not match heatmap "
            f"cells {heat.shape[1:]}")
    if maps.offset.shape != (2,) + heat.shape[1:]:
        raise ValueError(
            f"offset map shape {maps.offset.shape} does not match heatmap "
            f"cells {heat.shape[1:]}")
    circles = []
    for p in extract_peaks(heat, cfg):
        dx = maps.offset[0, p.cell_y, p.cell_x]
        dy = maps.offset[1, p.cell_y, p.cell_x]
        r = max(maps.radius[p.cell_y, p.cell_x], 0.0) * cfg.stride
        center = Point2((p.cell_x + dx) * cfg.stride,
                        (p.cell_y + dy) * cfg.stride)
        circles.append(Circle(center, r, score=p.score, category=p.category))
    if cfg.apply_nms:
        circles = circle_nms(circles, cfg.nms_threshold)
    return circles
