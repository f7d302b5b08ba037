"""Independent reference computations used to pin expected test values.

Everything here is written from first principles with naive algorithms
(scans, enumeration, quadrature) so it shares no code path with the
library implementations it checks.
"""

import math

import numpy as np

from circledet import Circle, Point2, ciou


def lens_area_equal_circles(d, r):
    """Intersection area of two equal circles at center distance d."""
    if d >= 2 * r:
        return 0.0
    return 2 * r * r * math.acos(d / (2 * r)) - (d / 2) * math.sqrt(4 * r * r - d * d)


def ciou_equal_circles(d, r):
    lens = lens_area_equal_circles(d, r)
    union = 2 * math.pi * r * r - lens
    return lens / union if union > 0 else 0.0


def axial_box_iou(t, r):
    """IOU of a square of side 2r with its copy shifted t along one axis."""
    if t >= 2 * r:
        return 0.0
    inter = (2 * r - t) * (2 * r)
    union = 2 * (2 * r) ** 2 - inter
    return inter / union


def quadrature_ciou(a, b, n=200_000):
    """cIOU by 1D quadrature of the chord-overlap length; no acos anywhere."""
    x_lo = max(a.center.x - a.radius, b.center.x - b.radius)
    x_hi = min(a.center.x + a.radius, b.center.x + b.radius)
    if x_hi <= x_lo:
        inter = 0.0
    else:
        xs = np.linspace(x_lo, x_hi, n)
        def chord(c, x):
            h2 = c.radius ** 2 - (x - c.center.x) ** 2
            lo = np.where(h2 > 0, c.center.y - np.sqrt(np.maximum(h2, 0)), np.nan)
            hi = np.where(h2 > 0, c.center.y + np.sqrt(np.maximum(h2, 0)), np.nan)
            return lo, hi
        alo, ahi = chord(a, xs)
        blo, bhi = chord(b, xs)
        seg = np.maximum(np.minimum(ahi, bhi) - np.maximum(alo, blo), 0.0)
        seg = np.nan_to_num(seg)
        inter = float(np.trapezoid(seg, xs))
    union = math.pi * (a.radius ** 2 + b.radius ** 2) - inter
    return inter / union if union > 0 else 0.0


def nms_oracle(circles, threshold):
    """Naive greedy suppression: repeated scans, no sorting of the input."""
    remaining = list(circles)
    kept = []
    while remaining:
        best = remaining[0]
        for c in remaining[1:]:
            if (c.score, -c.center.x, -c.center.y) > \
                    (best.score, -best.center.x, -best.center.y):
                best = c
        remaining.remove(best)
        if all(ciou(best, k) < threshold for k in kept):
            kept.append(best)
    return kept


def splat_oracle(circles, cfg, sigma_of):
    """Per-object Gaussian splat combined by max, with explicit loops."""
    h, w = cfg.grid_h, cfg.grid_w
    heat = np.zeros((cfg.num_classes, h, w))
    for c in circles:
        cx = math.floor(c.center.x / cfg.stride)
        cy = math.floor(c.center.y / cfg.stride)
        sigma = sigma_of(c.radius / cfg.stride)
        for yy in range(h):
            for xx in range(w):
                v = math.exp(-((xx - cx) ** 2 + (yy - cy) ** 2)
                             / (2 * sigma * sigma))
                heat[c.category, yy, xx] = max(heat[c.category, yy, xx], v)
    return heat


def sigma_scan_oracle(radius, min_overlap, step=1e-3):
    """Largest shift keeping cIOU >= min_overlap, by linear scan."""
    ref = Circle(Point2(0.0, 0.0), radius)
    best = 0.0
    s = 0.0
    while s <= 2 * radius:
        if ciou(ref, Circle(Point2(s, 0.0), radius)) >= min_overlap:
            best = s
        s += step
    return best / 3.0


def peaks_oracle(heat, threshold):
    """Exhaustive 8-neighborhood scan; returns {(category, x, y, score)}."""
    c, h, w = heat.shape
    out = set()
    for ci in range(c):
        for y in range(h):
            for x in range(w):
                v = heat[ci, y, x]
                ok = True
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        if dx == 0 and dy == 0:
                            continue
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < h and 0 <= nx < w and heat[ci, ny, nx] > v:
                            ok = False
                if ok and v >= threshold:
                    out.add((ci, x, y, float(v)))
    return out


def match_oracle(preds, gts, overlap_fn, threshold):
    """Greedy protocol re-derived with linear scans instead of sorting.

    Returns (tp set of (pred_idx, gt_idx), fp set, fn set).
    """
    unprocessed = set(range(len(preds)))
    gt_free = set(range(len(gts)))
    tp, fp = set(), set()
    while unprocessed:
        best_p = None
        for i in unprocessed:
            key = (preds[i].score, -preds[i].center.y, -preds[i].center.x)
            if best_p is None or key > best_key:
                best_p, best_key = i, key
        unprocessed.remove(best_p)
        best_g, best_ov = None, 0.0
        for j in sorted(gt_free):
            ov = overlap_fn(preds[best_p], gts[j])
            if ov > best_ov:
                best_g, best_ov = j, ov
        if best_g is not None and best_ov >= threshold:
            gt_free.remove(best_g)
            tp.add((best_p, best_g))
        else:
            fp.add(best_p)
    return tp, fp, set(gt_free)


def ap_oracle(preds_by_image, gts_by_image, overlap_fn, threshold):
    """Brute-force 101-point interpolated AP, pooled across images."""
    records = []
    total_gt = 0
    for img in gts_by_image:
        preds = preds_by_image.get(img, [])
        gts = gts_by_image[img]
        total_gt += len(gts)
        tp, fp, _ = match_oracle(preds, gts, overlap_fn, threshold)
        tp_idx = {i for i, _ in tp}
        for i, p in enumerate(preds):
            records.append((-p.score, str(img), p.center.y, p.center.x,
                            i in tp_idx))
    records.sort()
    tp_cum = fp_cum = 0
    points = []  # (recall, precision)
    for *_, is_tp in records:
        if is_tp:
            tp_cum += 1
        else:
            fp_cum += 1
        points.append((tp_cum / total_gt, tp_cum / (tp_cum + fp_cum)))
    total = 0.0
    for k in range(101):
        r = k / 100
        best = 0.0
        for rec, prec in points:
            if rec >= r and prec > best:
                best = prec
        total += best
    return total / 101


def froc_oracle(preds_by_image, gts_by_image, overlap_fn, match_threshold):
    """Confusion counts per distinct score cut, brute force."""
    scores = sorted({p.score for ps in preds_by_image.values() for p in ps},
                    reverse=True)
    total_gt = sum(len(g) for g in gts_by_image.values())
    n_img = len(gts_by_image)
    points = []
    for cut in scores:
        tp = fp = 0
        for img, gts in gts_by_image.items():
            preds = [p for p in preds_by_image.get(img, []) if p.score >= cut]
            t, f, _ = match_oracle(preds, gts, overlap_fn, match_threshold)
            tp += len(t)
            fp += len(f)
        points.append((fp / n_img, tp / total_gt, cut))
    return sorted(points)


def pairing_oracle(dets_a, dets_b, overlap_fn):
    """Greedy one-to-one pairing by repeated global-max scan; counts
    pairs with overlap > 0.5."""
    ov = [[overlap_fn(a, b) for b in dets_b] for a in dets_a]
    used_a, used_b = set(), set()
    matched = 0
    while True:
        best = (0.5, None, None)
        for i in range(len(dets_a)):
            if i in used_a:
                continue
            for j in range(len(dets_b)):
                if j in used_b:
                    continue
                if ov[i][j] > best[0]:
                    best = (ov[i][j], i, j)
        if best[1] is None:
            break
        used_a.add(best[1])
        used_b.add(best[2])
        matched += 1
    return matched


def regular_polygon_area(n_sides, r):
    return 0.5 * n_sides * r * r * math.sin(2 * math.pi / n_sides)


def central_difference(f, arrays, h=1e-5):
    """Central finite differences of scalar f over a list of arrays.

    Returns gradients shaped like the inputs. f is called with the list of
    (possibly perturbed) arrays.
    """
    grads = []
    for ai, arr in enumerate(arrays):
        g = np.zeros_like(arr, dtype=float)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[ai][idx] += h
            minus[ai][idx] -= h
            g[idx] = (f(plus) - f(minus)) / (2 * h)
            it.iternext()
        grads.append(g)
    return grads
