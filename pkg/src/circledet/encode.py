"""Ground-truth circles to training targets.

Each object is splatted as a 2D Gaussian bump onto a per-class heatmap at
the downsampled output resolution; its sub-cell center offset and its
radius (in output-stride units) are stored at the keypoint cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .geometry import Circle, Point2, ciou

__all__ = [
    "FixedSigma",
    "SizeAdaptiveSigma",
    "EncoderConfig",
    "Keypoint",
    "HeatmapTargets",
    "EncodeError",
    "gaussian_sigma",
    "encode",
]


class EncodeError(ValueError):
    """Raised when one or more ground-truth objects cannot be encoded."""


@dataclass(frozen=True)
class FixedSigma:
    """Use one Gaussian standard deviation for every object."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class SizeAdaptiveSigma:
    """Scale the kernel with object size.

    Sigma is one third of the largest center shift that still keeps the
    shifted circle at cIOU >= min_overlap with the original.
    """

    min_overlap: float = 0.7

    def __post_init__(self):
        if not 0.0 < self.min_overlap < 1.0:
            raise ValueError(
                f"min_overlap must be in (0, 1), got {self.min_overlap}")


SigmaPolicy = Union[FixedSigma, SizeAdaptiveSigma]


@dataclass(frozen=True)
class EncoderConfig:
    """Grid geometry and kernel policy for target encoding."""

    input_w: int
    input_h: int
    stride: int = 4
    num_classes: int = 1
    sigma_policy: SigmaPolicy = field(default_factory=SizeAdaptiveSigma)

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.input_w % self.stride or self.input_h % self.stride:
            raise ValueError(
                f"input {self.input_w}x{self.input_h} not divisible by "
                f"stride {self.stride}")

    @property
    def grid_w(self) -> int:
        return self.input_w // self.stride

    @property
    def grid_h(self) -> int:
        return self.input_h // self.stride


@dataclass(frozen=True)
class Keypoint:
    """One encoded object: integer cell, sub-cell offset, radius in cells."""

    category: int
    cell_x: int
    cell_y: int
    offset_x: float
    offset_y: float
    radius: float


@dataclass
class HeatmapTargets:
    """Training targets on the output grid.

    heatmap has shape (C, H/R, W/R) with values in [0, 1] and exact ones at
    keypoint cells; offset_map has shape (2, H/R, W/R) ordered (dx, dy);
    radius_map has shape (H/R, W/R) in output-stride units.
    """

    heatmap: np.ndarray
    offset_map: np.ndarray
    radius_map: np.ndarray
    keypoints: list[Keypoint]
    config: EncoderConfig


def _max_keypoint_shift(radius: float, min_overlap: float) -> float:
    """Largest center displacement keeping cIOU >= min_overlap.

    cIOU between a circle and its shifted copy decreases monotonically with
    the shift, so the boundary is found by bisection on the distance.
    """
    ref = Circle(Point2(0.0, 0.0), radius)
    lo, hi = 0.0, 2.0 * radius
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ciou(ref, Circle(Point2(mid, 0.0), radius)) >= min_overlap:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gaussian_sigma(radius_out: float, policy: SigmaPolicy) -> float:
    """Kernel standard deviation for an object of the given radius.

    radius_out is in output-stride units and must be positive.
    """
    if not radius_out > 0:
        raise ValueError(f"radius_out must be > 0, got {radius_out}")
    if isinstance(policy, FixedSigma):
        return policy.sigma
    if isinstance(policy, SizeAdaptiveSigma):
        return _max_keypoint_shift(radius_out, policy.min_overlap) / 3.0
    raise TypeError(f"unknown sigma policy {policy!r}")


def encode(gt: Sequence[Circle], cfg: EncoderConfig) -> HeatmapTargets:
    """Splat ground-truth circles into heatmap / offset / radius targets.

    Overlapping Gaussians of the same class combine by element-wise max so
    the heatmap stays in [0, 1]. Objects whose center falls outside the
    image or whose category exceeds the configured class count are rejected
    together in one error listing.
    """
    problems = []
    for i, c in enumerate(gt):
        if not (0.0 <= c.center.x < cfg.input_w
                and 0.0 <= c.center.y < cfg.input_h):
            problems.append(
                f"object {i}: center ({c.center.x}, {c.center.y}) outside "
                f"{cfg.input_w}x{cfg.input_h} image")
        if not 0 <= c.category < cfg.num_classes:
            problems.append(
                f"object {i}: category {c.category} not in [0, {cfg.num_classes})")
    if problems:
        raise EncodeError("; ".join(problems))

    gh, gw = cfg.grid_h, cfg.grid_w
    heatmap = np.zeros((cfg.num_classes, gh, gw))
    offset_map = np.zeros((2, gh, gw))
    radius_map = np.zeros((gh, gw))
    keypoints: list[Keypoint] = []

    ys, xs = np.mgrid[0:gh, 0:gw]
    for c in gt:
        fx = c.center.x / cfg.stride
        fy = c.center.y / cfg.stride
        cx, cy = int(math.floor(fx)), int(math.floor(fy))
        dx, dy = fx - cx, fy - cy
        r_out = c.radius / cfg.stride
        sigma = gaussian_sigma(r_out, cfg.sigma_policy)
        bump = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma * sigma))
        np.maximum(heatmap[c.category], bump, out=heatmap[c.category])
        offset_map[0, cy, cx] = dx
        offset_map[1, cy, cx] = dy
        radius_map[cy, cx] = r_out
        keypoints.append(Keypoint(c.category, cx, cy, dx, dy, r_out))

    return HeatmapTargets(heatmap, offset_map, radius_map, keypoints, cfg)
