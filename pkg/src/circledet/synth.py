"""Deterministic synthetic scenes for exercising the detection pipeline.

Scenes are packed circles with regular-polygon masks; detections are
simulated by perturbing ground truth with seeded noise. No pixel data is
generated anywhere, everything downstream works on geometry and grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Circle, Point2, PolygonMask, ciou

__all__ = [
    "SceneConfig",
    "Scene",
    "SceneError",
    "PerturbConfig",
    "generate_scene",
    "circle_polygon",
    "perturb_detections",
]

MAX_PLACEMENT_ATTEMPTS = 10_000


class SceneError(RuntimeError):
    """Raised when a scene configuration cannot be packed."""


@dataclass(frozen=True)
class SceneConfig:
    """Scene geometry and sampling ranges."""

    image_w: int = 512
    image_h: int = 512
    min_objects: int = 1
    max_objects: int = 8
    min_radius: float = 10.0
    max_radius: float = 40.0
    max_pairwise_ciou: float = 0.0
    classes: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.min_objects < 1 or self.max_objects < self.min_objects:
            raise ValueError("need 1 <= min_objects <= max_objects")
        if not 0 < self.min_radius <= self.max_radius:
            raise ValueError("need 0 < min_radius <= max_radius")
        if not 0.0 <= self.max_pairwise_ciou <= 1.0:
            raise ValueError("max_pairwise_ciou must be in [0, 1]")
        if self.classes < 1:
            raise ValueError("classes must be >= 1")
        if 2 * self.max_radius > min(self.image_w, self.image_h):
            raise ValueError("largest circle cannot fit inside the image")


@dataclass
class Scene:
    """Ground truth: circles plus a 64-gon mask per circle."""

    circles: list[Circle]
    masks: list[PolygonMask]
    config: SceneConfig


def circle_polygon(c: Circle, sides: int = 64) -> PolygonMask:
    """Regular polygon inscribed in a circle."""
    if sides < 3:
        raise ValueError(f"polygon needs >= 3 sides, got {sides}")
    angles = 2.0 * math.pi * np.arange(sides) / sides
    verts = tuple(Point2(c.center.x + c.radius * math.cos(a),
                         c.center.y + c.radius * math.sin(a))
                  for a in angles)
    return PolygonMask(verts)


def generate_scene(cfg: SceneConfig) -> Scene:
    """Pack circles into the image by seeded rejection sampling.

    Every circle lies fully inside the image and no pair exceeds the
    configured cIOU. Fails with the violated constraint if the packing
    budget runs out.
    """
    rng = np.random.default_rng(cfg.seed)
    count = int(rng.integers(cfg.min_objects, cfg.max_objects + 1))
    circles: list[Circle] = []
    attempts = 0
    while len(circles) < count:
        if attempts >= MAX_PLACEMENT_ATTEMPTS:
            raise SceneError(
                f"placed {len(circles)}/{count} circles in "
                f"{MAX_PLACEMENT_ATTEMPTS} attempts; cannot satisfy "
                f"max_pairwise_ciou={cfg.max_pairwise_ciou} with radii in "
                f"[{cfg.min_radius}, {cfg.max_radius}] inside "
                f"{cfg.image_w}x{cfg.image_h}")
        attempts += 1
        r = float(rng.uniform(cfg.min_radius, cfg.max_radius))
        x = float(rng.uniform(r, cfg.image_w - r))
        y = float(rng.uniform(r, cfg.image_h - r))
        cat = int(rng.integers(0, cfg.classes))
        cand = Circle(Point2(x, y), r, category=cat)
        if all(ciou(cand, c) <= cfg.max_pairwise_ciou for c in circles):
            circles.append(cand)
    masks = [circle_polygon(c) for c in circles]
    return Scene(circles=circles, masks=masks, config=cfg)


@dataclass(frozen=True)
class PerturbConfig:
    """Noise model for simulated detections.

    score_separation controls how cleanly true detections outrank spurious
    ones: true scores are uniform on [separation, 1], spurious scores on
    [0, 1 - separation]. The default of 1.0 makes them exactly 1 and 0, so
    a noiseless perturbation reproduces the ground truth verbatim.
    """

    center_sigma: float = 0.0
    radius_jitter: float = 0.0
    drop_rate: float = 0.0
    spurious_rate: float = 0.0
    score_separation: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("drop_rate", "spurious_rate", "score_separation"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.center_sigma < 0 or self.radius_jitter < 0:
            raise ValueError("noise magnitudes must be >= 0")


def perturb_detections(gt: list[Circle], cfg: PerturbConfig,
                       image_w: float, image_h: float) -> list[Circle]:
    """Turn ground truth into a simulated scored prediction set.

    Each object is dropped with drop_rate, then jittered: centers get
    isotropic Gaussian noise, radii are scaled by (1 + jitter * normal)
    and floored at zero. Each object also spawns a spurious detection with
    spurious_rate, placed uniformly inside the image with a radius drawn
    from the ground-truth radius range. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(cfg.seed)
    preds: list[Circle] = []
    for c in gt:
        if rng.random() < cfg.drop_rate:
            continue
        x = c.center.x + rng.normal(0.0, cfg.center_sigma) if cfg.center_sigma else c.center.x
        y = c.center.y + rng.normal(0.0, cfg.center_sigma) if cfg.center_sigma else c.center.y
        r = c.radius * max(0.0, 1.0 + cfg.radius_jitter * rng.normal()) \
            if cfg.radius_jitter else c.radius
        score = float(rng.uniform(cfg.score_separation, 1.0))
        preds.append(Circle(Point2(x, y), r, score=score, category=c.category))
    if gt and cfg.spurious_rate:
        r_lo = min(c.radius for c in gt)
        r_hi = max(c.radius for c in gt)
        for c in gt:
            if rng.random() >= cfg.spurious_rate:
                continue
            r = float(rng.uniform(r_lo, r_hi))
            x = float(rng.uniform(0.0, image_w))
            y = float(rng.uniform(0.0, image_h))
            score = float(rng.uniform(0.0, 1.0 - cfg.score_separation))
            preds.append(Circle(Point2(x, y), r, score=score,
                                category=c.category))
    return preds
