"""Independent reference implementations the library is checked against.

Kept deliberately naive: plain loops, exhaustive search, extended precision.
"""
import itertools
import math

import mpmath as mp
import numpy as np


# -- least squares -------------------------------------------------------------------------

def lstsq_normal_equations(x, y, degree, dps=50):
    """Solve the polynomial normal equations in extended precision."""
    with mp.workdps(dps):
        xs = [mp.mpf(float(v)) for v in x]
        ys = [mp.mpf(float(v)) for v in y]
        k = degree + 1
        A = mp.matrix(k, k)
        b = mp.matrix(k, 1)
        for i in range(k):
            for j in range(k):
                A[i, j] = mp.fsum(xv ** (i + j) for xv in xs)
            b[i] = mp.fsum(yv * xv ** i for xv, yv in zip(xs, ys))
        sol = mp.lu_solve(A, b)
        return [float(sol[i]) for i in range(k)]


# -- detection metrics ---------------------------------------------------------------------

def box_iou(a, b):
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


def exhaustive_match(dets, gts, thresh):
    """Best one-to-one assignment by enumeration.

    ``dets`` are (box, confidence) already sorted by descending confidence,
    ``gts`` are boxes. Among all valid partial assignments, pick the one whose
    vector of matched IoUs, read in confidence order, is lexicographically
    largest (higher-confidence detections have priority). Returns, per
    detection, the matched gt index or None.
    """
    best, best_key = None, None
    options = [[None] + [g for g in range(len(gts)) if box_iou(d[0], gts[g]) >= thresh]
               for d in dets]
    for combo in itertools.product(*options):
        used = [g for g in combo if g is not None]
        if len(used) != len(set(used)):
            continue
        key = tuple(-1.0 if g is None else box_iou(d[0], gts[g]) for d, g in zip(dets, combo))
        if best_key is None or key > best_key:
            best, best_key = combo, key
    return list(best) if best is not None else []


def ap_101(tp_flags, n_gt):
    if n_gt == 0:
        raise ValueError("no ground truth")
    precisions, recalls = [], []
    tp = fp = 0
    for flag in tp_flags:
        if flag:
            tp += 1
        else:
            fp += 1
        precisions.append(tp / (tp + fp))
        recalls.append(tp / n_gt)
    total = 0.0
    for k in range(101):
        r = k / 100
        # interpolated precision: best precision at any recall >= r
        cands = [p for p, rc in zip(precisions, recalls) if rc >= r]
        total += max(cands) if cands else 0.0
    return total / 101


def brute_force_metrics(dets, gts, conf_thresh=0.25):
    """dets: list of (image, class, box, conf); gts: list of (image, class, box).

    Confidence ties are broken by image id then input order, as documented for the library.
    """
    classes = sorted({g[1] for g in gts})
    images = sorted({g[0] for g in gts} | {d[0] for d in dets}, key=str)

    def flags_for(cls, thresh, pool):
        ranked = sorted(range(len(pool)), key=lambda i: (-pool[i][3], str(pool[i][0]), i))
        flag = {}
        for img in images:
            order = [i for i in ranked if pool[i][0] == img and pool[i][1] == cls]
            g_img = [g[2] for g in gts if g[0] == img and g[1] == cls]
            combo = exhaustive_match([(pool[i][2], pool[i][3]) for i in order], g_img, thresh)
            for i, m in zip(order, combo):
                flag[i] = m is not None
        return [flag[i] for i in ranked if pool[i][1] == cls]

    thresholds = [0.5 + 0.05 * k for k in range(10)]
    ap = {}
    for t in thresholds:
        for c in classes:
            ap[(round(t, 2), c)] = ap_101(flags_for(c, t, dets), sum(g[1] == c for g in gts))
    map50 = sum(ap[(0.5, c)] for c in classes) / len(classes)
    map5095 = sum(sum(ap[(round(t, 2), c)] for c in classes) / len(classes)
                  for t in thresholds) / len(thresholds)

    kept = [d for d in dets if d[3] >= conf_thresh]
    tp = sum(sum(flags_for(c, 0.5, kept)) for c in classes)
    fp = len(kept) - tp
    fn = len(gts) - tp
    precision = tp / (tp + fp) if kept else 0.0
    recall = tp / (tp + fn)
    return {"map50": map50, "map50_95": map5095, "precision": precision, "recall": recall,
            "tp": tp, "fp": fp, "fn": fn, "ap": ap}


# -- DBSCAN --------------------------------------------------------------------------------

def dbscan_reference(points, eps, min_samples):
    """Quadratic DBSCAN: core graph components, border points join the
    component whose smallest core index is lowest among their core neighbours."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    within = d <= eps
    core = within.sum(axis=1) >= min_samples
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if core[i] and core[j] and within[i, j]:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    comp_min = {}
    for i in range(n):
        if core[i]:
            r = find(i)
            comp_min[r] = min(comp_min.get(r, i), i)
    order = sorted(comp_min, key=lambda r: comp_min[r])
    label_of = {r: k for k, r in enumerate(order)}
    labels = np.full(n, -1)
    for i in range(n):
        if core[i]:
            labels[i] = label_of[find(i)]
        else:
            cands = [label_of[find(j)] for j in range(n) if core[j] and within[i, j]]
            if cands:
                labels[i] = min(cands)
    return labels


def same_partition(a, b):
    """Equal up to relabelling of non-noise clusters."""
    a, b = np.asarray(a), np.asarray(b)
    if not np.array_equal(a == -1, b == -1):
        return False
    fwd, back = {}, {}
    for x, y in zip(a.tolist(), b.tolist()):
        if fwd.setdefault(x, y) != y or back.setdefault(y, x) != x:
            return False
    return True


# -- per-pixel sensitivity -----------------------------------------------------------------

def sensitivity_brute_force(size_fn, boxes, width_px, height_px, shift=1.0):
    """Direct reading of the definition with explicit corner arithmetic."""
    dw, dh = [], []
    for (x0, y0, x1, y1) in boxes:
        variants = {
            "left": (x0 - shift, y0, x1 - shift, y1),
            "right": (x0 + shift, y0, x1 + shift, y1),
            "top": (x0, y0 - shift, x1, y1 - shift),
            "bottom": (x0, y0 + shift, x1, y1 + shift),
        }
        if any(v[0] < 0 or v[1] < 0 or v[2] > width_px - 1 or v[3] > height_px - 1
               for v in variants.values()):
            continue
        base = size_fn((x0, y0, x1, y1))
        for key in ("left", "right"):
            dw.append(abs(base[0] - size_fn(variants[key])[0]))
        for key in ("top", "bottom"):
            dh.append(abs(base[1] - size_fn(variants[key])[1]))
    return math.fsum(dw) / len(dw), math.fsum(dh) / len(dh)
