"""Command-line surface tying the library into reproducible experiments.

Subcommands: ciou, eval, generate, perturb, encode, decode, fit, rotcheck,
displace, froc, mdt. All stochastic commands take an explicit --seed and
produce byte-identical outputs for identical arguments. Floating output is
printed with six decimals. Exit codes: 0 success, 1 internal error, 2
input validation failure.

Table column layouts (tab-separated, '#'-prefixed header line):
  displacement table: displacement, ciou, box_iou
  FROC table:         fp_per_image, sensitivity, score_cut
  PR curve table:     threshold, recall, precision
  loss trajectory:    step, l_heatmap, l_offset, l_radius, l_total

The environment variable CIRCLEDET_THREADS sets the per-image worker count
used by the eval command (default 1).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from . import data
from .decode import DecodeConfig, decode_circles
from .encode import EncodeError, EncoderConfig, FixedSigma, SizeAdaptiveSigma, encode
from .evaluation import (
    MatchConfig,
    displacement_study,
    evaluate,
    froc,
    mask_detection_ratio,
    rotation_consistency_pooled,
)
from .geometry import Circle, Point2, circle_to_tight_box, ciou, rotate90
from .synth import PerturbConfig, SceneConfig, SceneError, generate_scene, perturb_detections
from .trainer import FitConfig, fit_maps

__all__ = ["main"]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CIRCLEDET_THREADS", "1")))
    except ValueError:
        return 1


def _scene_to_dataset(scenes) -> data.Dataset:
    images, annotations = [], []
    next_ann = 1
    for image_id, scene in scenes:
        images.append(data.ImageInfo(image_id, scene.config.image_w,
                                     scene.config.image_h))
        for circle, mask in zip(scene.circles, scene.masks):
            box = circle_to_tight_box(circle)
            annotations.append(data.Annotation(
                id=next_ann, image_id=image_id, category_id=circle.category,
                circle=circle, area=math.pi * circle.radius ** 2,
                bbox=box, mask=mask))
            next_ann += 1
    return data.Dataset(images=images, annotations=annotations)


def _cmd_ciou(args) -> int:
    a = Circle(Point2(args.ax, args.ay), args.ar)
    b = Circle(Point2(args.bx, args.by), args.br)
    print(_fmt(ciou(a, b)))
    return 0


def _parse_thresholds(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(","))


def _cmd_eval(args) -> int:
    dataset = data.read_dataset(args.gt)
    preds = data.read_predictions(args.pred)
    data.validate_predictions(preds, dataset)
    cfg = MatchConfig(overlap_metric=args.metric,
                      thresholds=_parse_thresholds(args.thresholds))
    gts = dataset.circles_by_image()
    if args.metric == "box_iou":
        boxes = {}
        for img, anns in _annotations_by_image(dataset).items():
            boxes[img] = [a.bbox if a.bbox is not None
                          else circle_to_tight_box(a.circle) for a in anns]
        gts = boxes
        preds_by_img = {im.id: [] for im in dataset.images}
        for p in preds:
            preds_by_img[p.image_id].append(circle_to_tight_box(p.circle))
    else:
        preds_by_img = data.predictions_by_image(preds, dataset)
    report = evaluate(preds_by_img, gts, cfg, threads=_threads())

    lines = ["circledet evaluation report",
             f"metric={cfg.overlap_metric}",
             f"images={len(dataset.images)} predictions={len(preds)} "
             f"ground_truths={len(dataset.annotations)}",
             ""]
    lines.append("  threshold  AP")
    for t, ap_t in report.per_threshold.items():
        lines.append(f"  {t:.2f}       {_fmt(ap_t)}")
    lines.append("")
    lines.append("[report]")
    lines.append(f"AP={_fmt(report.ap)}")
    lines.append(f"AP50={_fmt(report.ap50)}")
    lines.append(f"AP75={_fmt(report.ap75)}")
    for name, val in report.area_aps.items():
        key = f"AP_{name[0].upper()}"
        lines.append(f"{key}=" + (_fmt(val) if val is not None else "n/a"))
    for t, ap_t in report.per_threshold.items():
        lines.append(f"AP@{t:.2f}={_fmt(ap_t)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")

    if args.pr_curves:
        rows = ["#threshold\trecall\tprecision"]
        for t, curve in report.pr_curves.items():
            for i, p in enumerate(curve):
                rows.append(f"{t:.2f}\t{_fmt(i / 100.0)}\t{_fmt(p)}")
        Path(args.pr_curves).write_text("\n".join(rows) + "\n")
    return 0


def _annotations_by_image(dataset: data.Dataset):
    out = {im.id: [] for im in dataset.images}
    for a in dataset.annotations:
        out[a.image_id].append(a)
    return out


def _cmd_generate(args) -> int:
    scenes = []
    for i in range(args.images):
        cfg = SceneConfig(image_w=args.width, image_h=args.height,
                          min_objects=args.min_objects,
                          max_objects=args.max_objects,
                          min_radius=args.min_radius,
                          max_radius=args.max_radius,
                          max_pairwise_ciou=args.max_overlap,
                          classes=args.classes, seed=args.seed + i)
        scenes.append((i + 1, generate_scene(cfg)))
    data.write_dataset(args.out, _scene_to_dataset(scenes))
    n = sum(len(s.circles) for _, s in scenes)
    print(f"wrote {args.out}: {len(scenes)} images, {n} objects")
    return 0


def _cmd_perturb(args) -> int:
    dataset = data.read_dataset(args.gt)
    records = []
    for idx, im in enumerate(dataset.images):
        cfg = PerturbConfig(center_sigma=args.center_sigma,
                            radius_jitter=args.radius_jitter,
                            drop_rate=args.drop_rate,
                            spurious_rate=args.spurious_rate,
                            score_separation=args.score_separation,
                            seed=args.seed + idx)
        gts = dataset.circles_by_image()[im.id]
        for c in perturb_detections(gts, cfg, im.width, im.height):
            records.append(data.PredictionRecord(im.id, c))
    data.write_predictions(args.out, records)
    print(f"wrote {args.out}: {len(records)} predictions")
    return 0


def _encoder_config(args, image: data.ImageInfo) -> EncoderConfig:
    policy = FixedSigma(args.sigma) if args.sigma is not None \
        else SizeAdaptiveSigma(args.min_overlap)
    return EncoderConfig(input_w=image.width, input_h=image.height,
                         stride=args.stride, num_classes=args.classes,
                         sigma_policy=policy)


def _select_image(dataset: data.Dataset, image_id) -> data.ImageInfo:
    if image_id is not None:
        return dataset.image(image_id)
    if len(dataset.images) == 1:
        return dataset.images[0]
    raise data.DataFormatError(
        "dataset has multiple images; pass --image-id")


def _cmd_encode(args) -> int:
    dataset = data.read_dataset(args.gt)
    image = _select_image(dataset, args.image_id)
    cfg = _encoder_config(args, image)
    circles = dataset.circles_by_image()[image.id]
    targets = encode(circles, cfg)
    data.save_targets(args.out, targets)
    print(f"wrote {args.out}: {len(targets.keypoints)} keypoints on "
          f"{cfg.grid_w}x{cfg.grid_h} grid")
    return 0


def _cmd_decode(args) -> int:
    maps, stride, image_id = data.load_maps(args.maps)
    if args.stride is not None:
        stride = args.stride
    if args.image_id is not None:
        image_id = args.image_id
    cfg = DecodeConfig(top_n=args.top_n, score_threshold=args.score_threshold,
                       stride=stride, apply_nms=args.nms,
                       nms_threshold=args.nms_threshold)
    circles = decode_circles(maps, cfg)
    records = [data.PredictionRecord(image_id, c) for c in circles]
    data.write_predictions(args.out, records)
    print(f"wrote {args.out}: {len(records)} detections")
    return 0


def _cmd_fit(args) -> int:
    dataset = data.read_dataset(args.gt)
    image = _select_image(dataset, args.image_id)
    enc_cfg = _encoder_config(args, image)
    targets = encode(dataset.circles_by_image()[image.id], enc_cfg)
    fit_cfg = FitConfig(steps=args.steps, learning_rate=args.lr,
                        init=args.init, init_sigma=args.init_sigma,
                        seed=args.seed, record_every=args.record_every)
    result = fit_maps(targets, fit_cfg)
    data.save_maps(args.out, result.maps, enc_cfg.stride, image.id)
    if args.trajectory:
        rows = ["#step\tl_heatmap\tl_offset\tl_radius\tl_total"]
        rows += [f"{p.step}\t{_fmt(p.l_heatmap)}\t{_fmt(p.l_offset)}\t"
                 f"{_fmt(p.l_radius)}\t{_fmt(p.l_total)}"
                 for p in result.trajectory]
        Path(args.trajectory).write_text("\n".join(rows) + "\n")
    final = result.trajectory[-1]
    print(f"wrote {args.out}: final loss {_fmt(final.l_total)} "
          f"after {final.step} steps")
    return 0


def _cmd_rotcheck(args) -> int:
    dataset = data.read_dataset(args.gt)
    dims = {im.id: (im.width, im.height) for im in dataset.images}
    if args.pred_a and args.pred_b:
        pa = data.read_predictions(args.pred_a)
        pb = data.read_predictions(args.pred_b)
        data.validate_predictions(pa, dataset)
        data.validate_predictions(pb, dataset)
        a_by_img = data.predictions_by_image(pa, dataset)
        b_by_img = data.predictions_by_image(pb, dataset)
    elif args.pred_a or args.pred_b:
        raise data.DataFormatError("--pred-a and --pred-b go together")
    else:
        # Self-check: rotate the ground truth one quarter turn, map the
        # shapes back, and compare against the originals.
        a_by_img = dataset.circles_by_image()
        b_by_img = {}
        for img, circles in a_by_img.items():
            w, h = dims[img]
            rotated = [rotate90(c, w, h, 1) for c in circles]
            b_by_img[img] = [rotate90(c, h, w, 3) for c in rotated]
    ratio = rotation_consistency_pooled(a_by_img, b_by_img, args.metric)
    print(f"consistency={_fmt(ratio)}")
    return 0


def _cmd_displace(args) -> int:
    circle = Circle(Point2(args.cx, args.cy), args.r)
    displacements = [args.max * i / (args.steps - 1) if args.steps > 1 else 0.0
                     for i in range(args.steps)]
    rows = displacement_study(circle, displacements, trials=args.trials,
                              seed=args.seed, mode=args.mode)
    lines = ["#displacement\tciou\tbox_iou"]
    lines += [f"{_fmt(r.displacement)}\t{_fmt(r.mean_ciou)}\t"
              f"{_fmt(r.mean_box_iou)}" for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def _cmd_froc(args) -> int:
    dataset = data.read_dataset(args.gt)
    preds = data.read_predictions(args.pred)
    data.validate_predictions(preds, dataset)
    points = froc(data.predictions_by_image(preds, dataset),
                  dataset.circles_by_image(), args.metric, args.threshold)
    lines = ["#fp_per_image\tsensitivity\tscore_cut"]
    lines += [f"{_fmt(p.fp_per_image)}\t{_fmt(p.sensitivity)}\t"
              f"{_fmt(p.score_cut)}" for p in points]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def _cmd_mdt(args) -> int:
    dataset = data.read_dataset(args.gt)
    masks, dets = [], []
    for a in dataset.annotations:
        if a.mask is None:
            raise data.DataFormatError(
                f"annotation {a.id} has no mask; mdt needs traced masks")
        masks.append(a.mask)
        if args.representation == "circle":
            dets.append(a.circle)
        else:
            dets.append(a.bbox if a.bbox is not None
                        else circle_to_tight_box(a.circle))
    report = mask_detection_ratio(masks, dets)
    mean = _fmt(report.mean) if report.mean is not None else "n/a"
    print(f"mdt_mean={mean}")
    print(f"objects={len(masks)} skipped={report.skipped}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="circledet",
        description="Circle-representation detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ciou", help="overlap ratio of two circles")
    for name in ("ax", "ay", "ar", "bx", "by", "br"):
        p.add_argument(name, type=float)
    p.set_defaults(func=_cmd_ciou)

    p = sub.add_parser("eval", help="AP family over a threshold ladder")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--metric", choices=("ciou", "box_iou"), default="ciou")
    p.add_argument("--thresholds",
                   default="0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95")
    p.add_argument("--out", default=None)
    p.add_argument("--pr-curves", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--images", type=int, default=1)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--min-objects", type=int, default=1)
    p.add_argument("--max-objects", type=int, default=8)
    p.add_argument("--min-radius", type=float, default=10.0)
    p.add_argument("--max-radius", type=float, default=40.0)
    p.add_argument("--max-overlap", type=float, default=0.0)
    p.add_argument("--classes", type=int, default=1)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("perturb", help="simulate detections from ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--center-sigma", type=float, default=0.0)
    p.add_argument("--radius-jitter", type=float, default=0.0)
    p.add_argument("--drop-rate", type=float, default=0.0)
    p.add_argument("--spurious-rate", type=float, default=0.0)
    p.add_argument("--score-separation", type=float, default=1.0)
    p.set_defaults(func=_cmd_perturb)

    def add_encoder_flags(p):
        p.add_argument("--stride", type=int, default=4)
        p.add_argument("--classes", type=int, default=1)
        p.add_argument("--sigma", type=float, default=None,
                       help="fixed Gaussian sigma (default: size-adaptive)")
        p.add_argument("--min-overlap", type=float, default=0.7)
        p.add_argument("--image-id", type=int, default=None)

    p = sub.add_parser("encode", help="ground truth to target grids (npz)")
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    add_encoder_flags(p)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="output maps (npz) to detections")
    p.add_argument("--maps", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--top-n", type=int, default=100)
    p.add_argument("--score-threshold", type=float, default=0.0)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--image-id", type=int, default=None)
    p.add_argument("--nms", action="store_true")
    p.add_argument("--nms-threshold", type=float, default=0.5)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("fit", help="gradient-descend maps against targets")
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trajectory", default=None)
    p.add_argument("--steps", type=int, default=2000,
                   help="radius targets move lr*0.1/N cells per step, so "
                        "large or crowded scenes need more steps")
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--init", choices=("zeros", "noise"), default="zeros")
    p.add_argument("--init-sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--record-every", type=int, default=10)
    add_encoder_flags(p)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("rotcheck", help="rotation-consistency ratio")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred-a", default=None)
    p.add_argument("--pred-b", default=None)
    p.add_argument("--metric", choices=("ciou", "box_iou"), default="ciou")
    p.set_defaults(func=_cmd_rotcheck)

    p = sub.add_parser("displace", help="IOU vs cIOU under random shifts")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--cx", type=float, default=0.0)
    p.add_argument("--cy", type=float, default=0.0)
    p.add_argument("--max", type=float, default=100.0)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("isotropic", "axial"),
                   default="isotropic")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_displace)

    p = sub.add_parser("froc", help="FROC operating points")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--metric", choices=("ciou", "box_iou"), default="ciou")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_froc)

    p = sub.add_parser("mdt", help="mask area over detection area")
    p.add_argument("--gt", required=True)
    p.add_argument("--representation", choices=("circle", "box"),
                   default="circle")
    p.set_defaults(func=_cmd_mdt)

    return parser


VALIDATION_ERRORS = (data.DataFormatError, EncodeError, SceneError,
                     ValueError, OSError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
