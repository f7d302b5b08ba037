"""Reference trainer: fit raw output maps to encoded targets.

Plain full-batch gradient descent on the map entries themselves, with no
network in between. This proves that the loss gradients and the
encode/decode pair compose: descending the detection objective from
scratch must reproduce the ground-truth circles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .decode import DecodeConfig, decode_circles
from .encode import EncoderConfig, HeatmapTargets, encode
from .evaluation import EvalReport, MatchConfig, evaluate
from .losses import SQUASH_EPS, LossWeights, OutputMaps, total_loss
from .synth import Scene, SceneConfig, generate_scene

__all__ = [
    "FitConfig",
    "TrajectoryPoint",
    "FitResult",
    "DivergenceError",
    "optimal_maps",
    "fit_maps",
    "end_to_end_check",
]


class DivergenceError(RuntimeError):
    """Raised when the fitted loss blows past ten times its initial value."""


@dataclass(frozen=True)
class FitConfig:
    """Gradient-descent schedule for map fitting."""

    steps: int = 500
    learning_rate: float = 0.5
    init: str = "zeros"
    init_sigma: float = 0.1
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    record_every: int = 10

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.learning_rate > 0:
            raise ValueError(
                f"learning_rate must be > 0, got {self.learning_rate}")
        if self.init not in ("zeros", "noise"):
            raise ValueError(f"init must be 'zeros' or 'noise', got {self.init!r}")
        if self.record_every < 1:
            raise ValueError(
                f"record_every must be >= 1, got {self.record_every}")


class TrajectoryPoint(NamedTuple):
    step: int
    l_heatmap: float
    l_offset: float
    l_radius: float
    l_total: float


@dataclass
class FitResult:
    maps: OutputMaps
    trajectory: list[TrajectoryPoint]


def optimal_maps(targets: HeatmapTargets) -> OutputMaps:
    """Maps at the analytic optimum of the detection objective.

    The focal term is minimized by pushing the squashed heatmap to its
    clamp bounds: 1 at positive cells and 0 everywhere else, including the
    Gaussian shoulders (the shoulder weight only softens the penalty, the
    per-cell optimum stays at zero). Radius and offset maps are copied
    from the targets, which are exact at keypoint cells.
    """
    hi = math.log((1.0 - SQUASH_EPS) / SQUASH_EPS)
    logits = np.where(targets.heatmap == 1.0, hi, -hi)
    return OutputMaps(logits.astype(float), targets.radius_map.copy(),
                      targets.offset_map.copy())


def _initial_maps(targets: HeatmapTargets, cfg: FitConfig) -> OutputMaps:
    shape_hm = targets.heatmap.shape
    shape_r = targets.radius_map.shape
    shape_o = targets.offset_map.shape
    if cfg.init == "zeros":
        return OutputMaps(np.zeros(shape_hm), np.zeros(shape_r),
                          np.zeros(shape_o))
    rng = np.random.default_rng(cfg.seed)
    return OutputMaps(rng.normal(0.0, cfg.init_sigma, shape_hm),
                      rng.normal(0.0, cfg.init_sigma, shape_r),
                      rng.normal(0.0, cfg.init_sigma, shape_o))


def fit_maps(targets: HeatmapTargets, cfg: FitConfig = FitConfig(),
             start: OutputMaps | None = None) -> FitResult:
    """Gradient-descend output maps against encoded targets.

    Records the loss terms every record_every steps (plus the initial and
    final state) and raises DivergenceError if the total loss exceeds ten
    times its starting value.
    """
    if not targets.keypoints:
        raise ValueError("cannot fit targets without keypoints")
    maps = start.copy() if start is not None else _initial_maps(targets, cfg)
    trajectory: list[TrajectoryPoint] = []
    initial = None
    for step in range(cfg.steps + 1):
        report = total_loss(maps, targets, cfg.weights)
        if initial is None:
            initial = report.l_total
        if report.l_total > 10.0 * initial and report.l_total > 1e-12:
            raise DivergenceError(
                f"loss {report.l_total:.6g} exceeded 10x initial "
                f"{initial:.6g} at step {step}")
        if step % cfg.record_every == 0 or step == cfg.steps:
            trajectory.append(TrajectoryPoint(
                step, report.l_heatmap, report.l_offset, report.l_radius,
                report.l_total))
        if step == cfg.steps:
            break
        maps.heatmap_logits -= cfg.learning_rate * report.grad_heatmap_logits
        maps.radius -= cfg.learning_rate * report.grad_radius
        maps.offset -= cfg.learning_rate * report.grad_offset
    return FitResult(maps=maps, trajectory=trajectory)


def end_to_end_check(scene_cfg: SceneConfig, fit_cfg: FitConfig,
                     eval_cfg: MatchConfig = MatchConfig(),
                     encoder_cfg: EncoderConfig | None = None,
                     decode_cfg: DecodeConfig | None = None,
                     ) -> tuple[EvalReport, Scene, FitResult]:
    """generate -> encode -> fit -> decode -> evaluate, in one call."""
    scene = generate_scene(scene_cfg)
    if encoder_cfg is None:
        encoder_cfg = EncoderConfig(scene_cfg.image_w, scene_cfg.image_h,
                                    num_classes=scene_cfg.classes)
    targets = encode(scene.circles, encoder_cfg)
    result = fit_maps(targets, fit_cfg)
    if decode_cfg is None:
        decode_cfg = DecodeConfig(stride=encoder_cfg.stride)
    detections = decode_circles(result.maps, decode_cfg)
    report = evaluate({0: detections}, {0: scene.circles}, eval_cfg)
    return report, scene, result
