"""Circle-aware detection evaluation.

Implements the COCO-style greedy matching protocol and the metric suite
built on it: the AP family over an overlap-threshold ladder, FROC curves,
rotation-consistency ratios, mask-to-detection area ratios, and the paired
IOU-vs-cIOU displacement study. Detections and ground truths are grouped
per image id; circles and boxes are both supported via the configured
overlap metric.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .geometry import (
    Box,
    Circle,
    PolygonMask,
    Point2,
    box_iou,
    ciou,
    circle_to_tight_box,
    polygon_area,
)

__all__ = [
    "MatchConfig",
    "Matching",
    "APResult",
    "EvalReport",
    "FrocPoint",
    "MdtReport",
    "DisplacementRow",
    "overlap_function",
    "match_detections",
    "average_precision",
    "evaluate",
    "froc",
    "rotation_consistency",
    "rotation_consistency_pooled",
    "mask_detection_ratio",
    "displacement_study",
]

COCO_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
DEFAULT_AREA_RANGES = {"small": (0.0, 32.0 ** 2), "medium": (32.0 ** 2, 96.0 ** 2)}
RECALL_GRID = np.arange(101) / 100.0


def overlap_function(metric: str) -> Callable[[object, object], float]:
    """Resolve an overlap metric name to its pairwise function."""
    if metric == "ciou":
        return ciou
    if metric == "box_iou":
        return box_iou
    raise ValueError(f"unknown overlap metric {metric!r}")


def _shape_area(shape) -> float:
    return shape.area


def _tie_key(shape) -> tuple[float, float]:
    c = shape.center
    return (c.y, c.x)


@dataclass(frozen=True)
class MatchConfig:
    """Overlap metric, threshold ladder and named area buckets."""

    overlap_metric: str = "ciou"
    thresholds: tuple[float, ...] = COCO_THRESHOLDS
    area_ranges: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_AREA_RANGES))

    def __post_init__(self):
        overlap_function(self.overlap_metric)
        if list(self.thresholds) != sorted(self.thresholds):
            raise ValueError("thresholds must be sorted ascending")
        for t in self.thresholds:
            if not 0.0 < t < 1.0:
                raise ValueError(f"threshold {t} outside (0, 1)")


@dataclass
class Matching:
    """Greedy matching result for one image and one class.

    tp holds (pred_index, gt_index, overlap) triples; fp and fn hold the
    indices of unmatched predictions and ground truths. Indices refer to
    the caller's input ordering.
    """

    tp: list[tuple[int, int, float]]
    fp: list[int]
    fn: list[int]


def match_detections(preds: Sequence, gts: Sequence, metric: str,
                     threshold: float) -> Matching:
    """COCO-style greedy matching within one image and class.

    Predictions are visited in descending score order (ties broken by
    center y then x); each takes the unmatched ground truth of highest
    overlap provided that overlap reaches the threshold. Every ground
    truth is matched at most once.
    """
    overlap = overlap_function(metric)
    order = sorted(range(len(preds)),
                   key=lambda i: (-preds[i].score,) + _tie_key(preds[i]))
    gt_taken = [False] * len(gts)
    tp: list[tuple[int, int, float]] = []
    fp: list[int] = []
    for pi in order:
        best_j, best_ov = -1, 0.0
        for j, g in enumerate(gts):
            if gt_taken[j]:
                continue
            ov = overlap(preds[pi], g)
            if ov > best_ov:
                best_j, best_ov = j, ov
        if best_j >= 0 and best_ov >= threshold:
            gt_taken[best_j] = True
            tp.append((pi, best_j, best_ov))
        else:
            fp.append(pi)
    fn = [j for j, taken in enumerate(gt_taken) if not taken]
    return Matching(tp=tp, fp=fp, fn=fn)


class _Record(NamedTuple):
    score: float
    image_key: str
    y: float
    x: float
    is_tp: bool


@dataclass
class APResult:
    """Average precision at one threshold with its 101-point curve."""

    ap: float
    precision101: np.ndarray
    tp: int
    fp: int
    fn: int


def _records_for_image(preds: Sequence, gts: Sequence, metric: str,
                       threshold: float, image_key: str,
                       area_range: Optional[tuple[float, float]] = None,
                       ) -> tuple[list[_Record], int]:
    """Match one image and emit pooled-scoring records plus its gt count.

    With an area range, ground truths outside the range are removed before
    matching and unmatched predictions outside the range are dropped
    instead of counting as false positives.
    """
    if area_range is not None:
        lo, hi = area_range
        gts = [g for g in gts if lo <= _shape_area(g) < hi]
    m = match_detections(preds, gts, metric, threshold)
    records = []
    for pi, _, _ in m.tp:
        p = preds[pi]
        records.append(_Record(p.score, image_key, *_tie_key(p), True))
    for pi in m.fp:
        p = preds[pi]
        if area_range is not None:
            lo, hi = area_range
            if not lo <= _shape_area(p) < hi:
                continue
        records.append(_Record(p.score, image_key, *_tie_key(p), False))
    return records, len(gts)


def _ap_from_records(records: list[_Record], total_gt: int) -> APResult:
    records.sort(key=lambda r: (-r.score, r.image_key, r.y, r.x))
    flags = np.array([r.is_tp for r in records], dtype=bool)
    tp_cum = np.cumsum(flags)
    fp_cum = np.cumsum(~flags)
    precision = tp_cum / np.maximum(tp_cum + fp_cum, 1)
    recall = tp_cum / total_gt
    p101 = np.zeros(101)
    for i, r in enumerate(RECALL_GRID):
        reachable = precision[recall >= r - 1e-12]
        if reachable.size:
            p101[i] = reachable.max()
    ap = float(sum(p101) / 101.0)
    tp = int(tp_cum[-1]) if len(records) else 0
    fp = int(fp_cum[-1]) if len(records) else 0
    return APResult(ap=ap, precision101=p101, tp=tp, fp=fp, fn=total_gt - tp)


def average_precision(preds_by_image: Mapping, gts_by_image: Mapping,
                      metric: str, threshold: float,
                      area_range: Optional[tuple[float, float]] = None,
                      threads: int = 1) -> APResult:
    """AP at one overlap threshold, predictions pooled across images.

    Precision is interpolated to its running maximum and sampled at the
    101 evenly spaced recall points. Requires at least one ground truth.
    """
    images = sorted(gts_by_image.keys(), key=str)
    for img in preds_by_image:
        if img not in gts_by_image:
            raise ValueError(f"predictions reference unknown image {img!r}")

    def one(img):
        return _records_for_image(preds_by_image.get(img, []),
                                  gts_by_image[img], metric, threshold,
                                  str(img), area_range)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_image = list(pool.map(one, images))
    else:
        per_image = [one(img) for img in images]

    records = [r for recs, _ in per_image for r in recs]
    total_gt = sum(n for _, n in per_image)
    if total_gt == 0:
        raise ValueError("average precision undefined without ground truths")
    return _ap_from_records(records, total_gt)


@dataclass
class EvalReport:
    """The AP family plus per-threshold detail tables.

    area_aps maps bucket names to their AP or None when the bucket holds
    no ground truths. pr_curves and counts are keyed by threshold; counts
    are (TP, FP, FN) over all areas. froc_points are the free-response
    operating points at match threshold 0.5.
    """

    ap: float
    ap50: float
    ap75: float
    per_threshold: dict[float, float]
    area_aps: dict[str, Optional[float]]
    pr_curves: dict[float, np.ndarray]
    counts: dict[float, tuple[int, int, int]]
    froc_points: list["FrocPoint"]

    @property
    def ap_small(self) -> Optional[float]:
        return self.area_aps.get("small")

    @property
    def ap_medium(self) -> Optional[float]:
        return self.area_aps.get("medium")


def _split_by_category(by_image: Mapping) -> dict[int, dict]:
    cats: dict[int, dict] = {}
    for img, shapes in by_image.items():
        for s in shapes:
            cats.setdefault(s.category, {}).setdefault(img, []).append(s)
    return cats


def evaluate(preds_by_image: Mapping, gts_by_image: Mapping,
             cfg: MatchConfig = MatchConfig(), threads: int = 1) -> EvalReport:
    """Full evaluation over the threshold ladder and area buckets.

    AP values are averaged over the classes present in the ground truth
    (predictions for absent classes are ignored, as in the COCO protocol)
    and then over thresholds.
    """
    total_gt = sum(len(v) for v in gts_by_image.values())
    if total_gt == 0:
        raise ValueError("evaluation undefined: ground-truth set is empty")
    for img in preds_by_image:
        if img not in gts_by_image:
            raise ValueError(f"predictions reference unknown image {img!r}")

    gt_cats = _split_by_category(gts_by_image)
    pred_cats = _split_by_category(preds_by_image)
    classes = sorted(gt_cats.keys())
    images = list(gts_by_image.keys())

    def class_ap(threshold, area_range=None):
        """Mean AP over classes; None when no class has gts in range."""
        aps, curves = [], []
        tp = fp = fn = 0
        for cat in classes:
            gts_c = {img: gt_cats[cat].get(img, []) for img in images}
            preds_c = {img: pred_cats.get(cat, {}).get(img, [])
                       for img in images}
            try:
                res = average_precision(preds_c, gts_c, cfg.overlap_metric,
                                        threshold, area_range, threads)
            except ValueError:
                continue  # no gt of this class inside the range
            aps.append(res.ap)
            curves.append(res.precision101)
            tp, fp, fn = tp + res.tp, fp + res.fp, fn + res.fn
        if not aps:
            return None, None, (0, 0, 0)
        mean_curve = np.mean(curves, axis=0)
        return sum(aps) / len(aps), mean_curve, (tp, fp, fn)

    per_threshold: dict[float, float] = {}
    pr_curves: dict[float, np.ndarray] = {}
    counts: dict[float, tuple[int, int, int]] = {}
    for t in cfg.thresholds:
        ap_t, curve, cnt = class_ap(t)
        per_threshold[t] = ap_t
        pr_curves[t] = curve
        counts[t] = cnt

    ap = sum(per_threshold.values()) / len(per_threshold)
    ap50 = per_threshold[0.5] if 0.5 in per_threshold else class_ap(0.5)[0]
    ap75 = per_threshold[0.75] if 0.75 in per_threshold else class_ap(0.75)[0]

    area_aps: dict[str, Optional[float]] = {}
    for name, rng in cfg.area_ranges.items():
        vals = [class_ap(t, rng)[0] for t in cfg.thresholds]
        present = [v for v in vals if v is not None]
        area_aps[name] = sum(present) / len(present) if present else None

    return EvalReport(ap=ap, ap50=ap50, ap75=ap75,
                      per_threshold=per_threshold, area_aps=area_aps,
                      pr_curves=pr_curves, counts=counts,
                      froc_points=froc(preds_by_image, gts_by_image,
                                       cfg.overlap_metric, 0.5))


class FrocPoint(NamedTuple):
    fp_per_image: float
    sensitivity: float
    score_cut: float


def froc(preds_by_image: Mapping, gts_by_image: Mapping, metric: str,
         match_threshold: float) -> list[FrocPoint]:
    """Free-response operating points, one per distinct prediction score.

    At each cut, predictions scoring at least the cut are matched per
    image; sensitivity is pooled TP over total ground truths and the false
    positives are averaged over all rostered images. Matching is
    class-agnostic, as is customary for lesion-detection FROC. Points are
    returned sorted by ascending FP/image.
    """
    if not gts_by_image:
        raise ValueError("froc needs at least one image")
    total_gt = sum(len(v) for v in gts_by_image.values())
    if total_gt == 0:
        raise ValueError("froc undefined: ground-truth set is empty")
    num_images = len(gts_by_image)
    scores = sorted({p.score for preds in preds_by_image.values()
                     for p in preds}, reverse=True)
    points = []
    for cut in scores:
        tp_total = 0
        fp_total = 0
        for img, gts in gts_by_image.items():
            preds = [p for p in preds_by_image.get(img, [])
                     if p.score >= cut]
            m = match_detections(preds, gts, metric, match_threshold)
            tp_total += len(m.tp)
            fp_total += len(m.fp)
        points.append(FrocPoint(fp_per_image=fp_total / num_images,
                                sensitivity=tp_total / total_gt,
                                score_cut=cut))
    points.sort(key=lambda p: (p.fp_per_image, p.sensitivity))
    return points


def rotation_consistency(dets_a: Sequence, dets_b: Sequence,
                         metric: str = "ciou") -> float:
    """Fraction of detections surviving a rotate-and-map-back round trip.

    Pairs the two sets greedily by descending overlap, counts pairs with
    overlap strictly above 0.5, and divides by the average set size. Two
    empty sets are vacuously consistent (ratio 1).
    """
    if not dets_a and not dets_b:
        return 1.0
    matched = _greedy_overlap_pairs(dets_a, dets_b, metric)
    return matched / ((len(dets_a) + len(dets_b)) / 2.0)


def _greedy_overlap_pairs(dets_a: Sequence, dets_b: Sequence,
                          metric: str) -> int:
    overlap = overlap_function(metric)
    candidates = []
    for i, a in enumerate(dets_a):
        for j, b in enumerate(dets_b):
            ov = overlap(a, b)
            if ov > 0.5:
                candidates.append((-ov, i, j))
    candidates.sort()
    used_a, used_b = set(), set()
    matched = 0
    for _, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        matched += 1
    return matched


def rotation_consistency_pooled(a_by_image: Mapping, b_by_image: Mapping,
                                metric: str = "ciou") -> float:
    """Rotation consistency pooled over images (classes pooled as well)."""
    images = sorted(set(a_by_image) | set(b_by_image), key=str)
    matched = 0
    total = 0
    for img in images:
        a = a_by_image.get(img, [])
        b = b_by_image.get(img, [])
        matched += _greedy_overlap_pairs(a, b, metric)
        total += len(a) + len(b)
    if total == 0:
        return 1.0
    return matched / (total / 2.0)


@dataclass
class MdtReport:
    """Per-object mask-area to detection-area ratios.

    ratios holds None for detections with zero area; those are excluded
    from the mean and counted in skipped.
    """

    ratios: list[Optional[float]]
    mean: Optional[float]
    skipped: int


def mask_detection_ratio(masks: Sequence[PolygonMask],
                         dets: Sequence) -> MdtReport:
    """Ratio of traced mask area to enclosing detection area, per object."""
    if len(masks) != len(dets):
        raise ValueError(
            f"need one mask per detection, got {len(masks)} masks for "
            f"{len(dets)} detections")
    ratios: list[Optional[float]] = []
    skipped = 0
    for mask, det in zip(masks, dets):
        area = _shape_area(det)
        if area <= 0.0:
            ratios.append(None)
            skipped += 1
        else:
            ratios.append(polygon_area(mask) / area)
    valid = [r for r in ratios if r is not None]
    mean = sum(valid) / len(valid) if valid else None
    return MdtReport(ratios=ratios, mean=mean, skipped=skipped)


class DisplacementRow(NamedTuple):
    displacement: float
    mean_ciou: float
    mean_box_iou: float


def displacement_study(shape: Circle, displacements: Sequence[float],
                       trials: int, seed: int,
                       mode: str = "isotropic") -> list[DisplacementRow]:
    """Mean overlap of a circle and its tight box under random shifts.

    One set of directions is drawn up front and reused for every
    displacement magnitude, so both curves are monotone in the magnitude
    by construction; the identical translation is applied to the circle
    and to its tight box. In axial mode all shifts point along +x, which
    makes the means exact values rather than sample averages.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if any(d < 0 for d in displacements):
        raise ValueError("displacements must be >= 0")
    if mode == "isotropic":
        angles = np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi, trials)
    elif mode == "axial":
        angles = np.zeros(trials)
    else:
        raise ValueError(f"mode must be 'isotropic' or 'axial', got {mode!r}")

    box = circle_to_tight_box(shape)
    rows = []
    for d in displacements:
        c_sum = 0.0
        b_sum = 0.0
        for theta in angles:
            dx, dy = d * math.cos(theta), d * math.sin(theta)
            moved_c = Circle(Point2(shape.center.x + dx, shape.center.y + dy),
                             shape.radius)
            moved_b = Box(Point2(box.min_corner.x + dx, box.min_corner.y + dy),
                          box.width, box.height)
            c_sum += ciou(shape, moved_c)
            b_sum += box_iou(box, moved_b)
        rows.append(DisplacementRow(float(d), c_sum / trials, b_sum / trials))
    return rows
