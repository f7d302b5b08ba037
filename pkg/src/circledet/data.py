"""File formats: JSONL datasets and predictions, npz target/map grids.

The dataset format mirrors COCO field names (id, image_id, category_id,
bbox, area, segmentation) extended with circle_center / circle_radius.
The first line is a header carrying the image roster; every following
line is one annotation. Prediction files are headerless JSONL records.
Writers are canonical, so write -> read -> write is byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .encode import (
    EncoderConfig,
    FixedSigma,
    HeatmapTargets,
    Keypoint,
    SizeAdaptiveSigma,
)
from .geometry import Box, Circle, Point2, PolygonMask
from .losses import OutputMaps

__all__ = [
    "DataFormatError",
    "ImageInfo",
    "Annotation",
    "Dataset",
    "PredictionRecord",
    "read_dataset",
    "write_dataset",
    "read_predictions",
    "write_predictions",
    "validate_predictions",
    "predictions_by_image",
    "save_targets",
    "load_targets",
    "save_maps",
    "load_maps",
]

FORMAT_NAME = "circledet-dataset"
FORMAT_VERSION = 1
AREA_TOLERANCE = 0.01  # relative slack between stored area and pi*r^2


class DataFormatError(ValueError):
    """Raised on schema violations; messages carry record positions."""


@dataclass(frozen=True)
class ImageInfo:
    id: int
    width: int
    height: int


@dataclass(frozen=True)
class Annotation:
    """One ground-truth object: a circle plus optional box and mask."""

    id: int
    image_id: int
    category_id: int
    circle: Circle
    area: float
    bbox: Optional[Box] = None
    mask: Optional[PolygonMask] = None


@dataclass
class Dataset:
    images: list[ImageInfo]
    annotations: list[Annotation]

    def circles_by_image(self) -> dict[int, list[Circle]]:
        out: dict[int, list[Circle]] = {im.id: [] for im in self.images}
        for a in self.annotations:
            out[a.image_id].append(a.circle)
        return out

    def image(self, image_id: int) -> ImageInfo:
        for im in self.images:
            if im.id == image_id:
                return im
        raise KeyError(f"image {image_id} not in roster")


@dataclass(frozen=True)
class PredictionRecord:
    image_id: int
    circle: Circle

    @property
    def category_id(self) -> int:
        return self.circle.category

    @property
    def score(self) -> float:
        return self.circle.score


def _annotation_to_json(a: Annotation) -> dict:
    rec: dict = {
        "id": a.id,
        "image_id": a.image_id,
        "category_id": a.category_id,
        "circle_center": [a.circle.center.x, a.circle.center.y],
        "circle_radius": a.circle.radius,
        "area": a.area,
    }
    if a.bbox is not None:
        rec["bbox"] = [a.bbox.min_corner.x, a.bbox.min_corner.y,
                       a.bbox.width, a.bbox.height]
    if a.mask is not None:
        flat: list[float] = []
        for p in a.mask.vertices:
            flat.extend((p.x, p.y))
        rec["segmentation"] = [flat]
    return rec


def _parse_annotation(rec: dict, line_no: int) -> Annotation:
    try:
        cx, cy = rec["circle_center"]
        circle = Circle(Point2(float(cx), float(cy)),
                        float(rec["circle_radius"]),
                        category=int(rec["category_id"]))
        area = float(rec["area"])
        bbox = None
        if "bbox" in rec:
            bx, by, bw, bh = rec["bbox"]
            bbox = Box(Point2(float(bx), float(by)), float(bw), float(bh),
                       category=int(rec["category_id"]))
        mask = None
        if "segmentation" in rec:
            (flat,) = rec["segmentation"]
            pts = tuple(Point2(float(x), float(y))
                        for x, y in zip(flat[::2], flat[1::2]))
            mask = PolygonMask(pts)
        ann = Annotation(id=int(rec["id"]), image_id=int(rec["image_id"]),
                         category_id=int(rec["category_id"]), circle=circle,
                         area=area, bbox=bbox, mask=mask)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"annotation at line {line_no}: {exc}") from exc
    geom_area = math.pi * circle.radius ** 2
    if geom_area > 0 and abs(area - geom_area) > AREA_TOLERANCE * geom_area:
        raise DataFormatError(
            f"annotation at line {line_no}: stored area {area} deviates "
            f"more than {AREA_TOLERANCE:.0%} from circle area {geom_area}")
    return ann


def write_dataset(path: Union[str, Path], dataset: Dataset) -> None:
    """Write the canonical JSONL form (header line, then annotations)."""
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "images": [{"id": im.id, "width": im.width, "height": im.height}
                   for im in dataset.images],
    }
    lines = [json.dumps(header)]
    lines += [json.dumps(_annotation_to_json(a)) for a in dataset.annotations]
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset(path: Union[str, Path]) -> Dataset:
    """Parse and validate a dataset file."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: bad header: {exc}") from exc
    if header.get("format") != FORMAT_NAME:
        raise DataFormatError(
            f"{path}: expected format {FORMAT_NAME!r}, "
            f"got {header.get('format')!r}")
    images = []
    seen_img = set()
    for rec in header.get("images", []):
        info = ImageInfo(int(rec["id"]), int(rec["width"]), int(rec["height"]))
        if info.id in seen_img:
            raise DataFormatError(f"{path}: duplicate image id {info.id}")
        seen_img.add(info.id)
        images.append(info)
    annotations = []
    seen_ann = set()
    for line_no, ln in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"line {line_no}: bad JSON: {exc}") from exc
        ann = _parse_annotation(rec, line_no)
        if ann.id in seen_ann:
            raise DataFormatError(f"line {line_no}: duplicate annotation id "
                                  f"{ann.id}")
        seen_ann.add(ann.id)
        if ann.image_id not in seen_img:
            raise DataFormatError(f"line {line_no}: annotation {ann.id} "
                                  f"references unknown image {ann.image_id}")
        annotations.append(ann)
    return Dataset(images=images, annotations=annotations)


def write_predictions(path: Union[str, Path],
                      preds: Sequence[PredictionRecord]) -> None:
    lines = []
    for p in preds:
        lines.append(json.dumps({
            "image_id": p.image_id,
            "category_id": p.circle.category,
            "circle_center": [p.circle.center.x, p.circle.center.y],
            "circle_radius": p.circle.radius,
            "score": p.circle.score,
        }))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_predictions(path: Union[str, Path]) -> list[PredictionRecord]:
    preds = []
    text = Path(path).read_text()
    for line_no, ln in enumerate(text.splitlines(), start=1):
        if not ln.strip():
            continue
        try:
            rec = json.loads(ln)
            cx, cy = rec["circle_center"]
            circle = Circle(Point2(float(cx), float(cy)),
                            float(rec["circle_radius"]),
                            score=float(rec["score"]),
                            category=int(rec["category_id"]))
            preds.append(PredictionRecord(int(rec["image_id"]), circle))
        except (KeyError, TypeError, ValueError,
                json.JSONDecodeError) as exc:
            raise DataFormatError(f"prediction at line {line_no}: {exc}") from exc
    return preds


def validate_predictions(preds: Sequence[PredictionRecord],
                         dataset: Dataset) -> None:
    """Cross-check prediction image references against a dataset roster."""
    roster = {im.id for im in dataset.images}
    for i, p in enumerate(preds):
        if p.image_id not in roster:
            raise DataFormatError(
                f"prediction {i} references unknown image {p.image_id}")


def predictions_by_image(preds: Sequence[PredictionRecord],
                         dataset: Dataset) -> dict[int, list[Circle]]:
    out: dict[int, list[Circle]] = {im.id: [] for im in dataset.images}
    for p in preds:
        out[p.image_id].append(p.circle)
    return out


def _sigma_policy_fields(cfg: EncoderConfig) -> tuple[int, float]:
    if isinstance(cfg.sigma_policy, FixedSigma):
        return 0, cfg.sigma_policy.sigma
    return 1, cfg.sigma_policy.min_overlap


def save_targets(path: Union[str, Path], targets: HeatmapTargets) -> None:
    """Serialize encoded targets to npz."""
    kind, param = _sigma_policy_fields(targets.config)
    kp = np.array([(k.category, k.cell_x, k.cell_y, k.offset_x, k.offset_y,
                    k.radius) for k in targets.keypoints], dtype=float)
    kp = kp.reshape(-1, 6)
    np.savez(path, heatmap=targets.heatmap, offset_map=targets.offset_map,
             radius_map=targets.radius_map, keypoints=kp,
             config=np.array([targets.config.input_w, targets.config.input_h,
                              targets.config.stride,
                              targets.config.num_classes, kind, param]))


def load_targets(path: Union[str, Path]) -> HeatmapTargets:
    with np.load(path) as z:
        w, h, stride, classes, kind, param = z["config"]
        policy = FixedSigma(float(param)) if int(kind) == 0 \
            else SizeAdaptiveSigma(float(param))
        cfg = EncoderConfig(int(w), int(h), int(stride), int(classes), policy)
        keypoints = [Keypoint(int(c), int(x), int(y), float(dx), float(dy),
                              float(r))
                     for c, x, y, dx, dy, r in z["keypoints"]]
        return HeatmapTargets(z["heatmap"].copy(), z["offset_map"].copy(),
                              z["radius_map"].copy(), keypoints, cfg)


def save_maps(path: Union[str, Path], maps: OutputMaps, stride: int,
              image_id: int = 0) -> None:
    """Serialize raw output maps to npz, tagged with stride and image."""
    np.savez(path, heatmap_logits=maps.heatmap_logits, radius=maps.radius,
             offset=maps.offset, meta=np.array([stride, image_id]))


def load_maps(path: Union[str, Path]) -> tuple[OutputMaps, int, int]:
    with np.load(path) as z:
        stride, image_id = (int(v) for v in z["meta"])
        maps = OutputMaps(z["heatmap_logits"].copy(), z["radius"].copy(),
                          z["offset"].copy())
    return maps, stride, image_id
