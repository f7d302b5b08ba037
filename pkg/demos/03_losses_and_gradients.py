"""The training objective and its gradients, inspected by hand.

Builds a small target grid, evaluates the focal / radius / offset terms on
noisy output maps, and spot-checks a few analytic partial derivatives
against central finite differences.
"""

import numpy as np

from circledet import (
    Circle,
    EncoderConfig,
    LossWeights,
    OutputMaps,
    Point2,
    encode,
    total_loss,
)

rng = np.random.default_rng(0)
cfg = EncoderConfig(input_w=32, input_h=32, stride=4)
gt = [Circle(Point2(10.6, 13.2), 6.0), Circle(Point2(24.0, 22.5), 9.0)]
targets = encode(gt, cfg)

maps = OutputMaps(rng.normal(0, 1, targets.heatmap.shape),
                  rng.normal(2, 1, targets.radius_map.shape),
                  rng.normal(0, 0.5, targets.offset_map.shape))

report = total_loss(maps, targets, LossWeights())
print("loss terms on noisy maps:")
print(f"  focal   {report.l_heatmap:.6f}")
print(f"  radius  {report.l_radius:.6f}  (weight 0.1)")
print(f"  offset  {report.l_offset:.6f}  (weight 1.0)")
print(f"  total   {report.l_total:.6f}")

print("\nspot-checking five heatmap-logit partials:")
h = 1e-5
cells = [(0, 2, 3), (0, 3, 2), (0, 1, 1), (0, 5, 6), (0, 7, 0)]
for idx in cells:
    plus = maps.heatmap_logits.copy()
    minus = maps.heatmap_logits.copy()
    plus[idx] += h
    minus[idx] -= h
    fd = (total_loss(OutputMaps(plus, maps.radius, maps.offset),
                     targets).l_total
          - total_loss(OutputMaps(minus, maps.radius, maps.offset),
                       targets).l_total) / (2 * h)
    analytic = report.grad_heatmap_logits[idx]
    print(f"  cell {idx}: analytic {analytic:+.8f}  finite-diff {fd:+.8f}")

print("\nradius partials are +-0.05 (lambda/N) only at keypoint cells:")
nonzero = np.argwhere(report.grad_radius != 0)
for cy, cx in nonzero:
    print(f"  cell (y={cy}, x={cx}): {report.grad_radius[cy, cx]:+.3f}")
