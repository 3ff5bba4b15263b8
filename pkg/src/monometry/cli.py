"""Batch command line: size, sensitivity, correct, correct-grid, evaluate, split, select-days."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import io as mio
from .correction import (Axis, CorrectionStage, PairedSample, error_report, fit, apply_many,
                         strategy_grid)
from .evaluation import Detection, GroundTruth, map_suite
from .geometry import GeometryError, estimate_size, pixel_sensitivity
from .leakage import (TSNEConfig, TooFewClusters, build_embedding, cluster_split, dbcv, dbscan,
                      select_extreme_days, standardize, tsne)

log = logging.getLogger("monometry")


class CliError(Exception):
    pass


@dataclass
class RunManifest:
    subcommand: str
    inputs: dict[str, str]
    seed: Optional[int] = None
    rig: Optional[str] = None
    processed: int = 0
    skipped: list[dict[str, str]] = field(default_factory=list)

    def skip(self, item: str, reason: str) -> None:
        log.warning("skipping %s: %s", item, reason)
        self.skipped.append({"item": item, "reason": reason})

    def write(self, out_dir: Path) -> None:
        record = asdict(self)
        record["skipped"] = sorted(self.skipped, key=lambda s: (s["item"], s["reason"]))
        (out_dir / "manifest.json").write_text(mio.dumps(record), encoding="utf-8")


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _label_files(directory: str) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise CliError(f"{directory} is not a directory")
    files = sorted(d.glob("*.txt"))
    if not files:
        raise CliError(f"no label files (*.txt) in {directory}")
    return files


def _load_boxes(files, width, height, expect_confidence, manifest):
    """image_id -> boxes; unreadable files go to the skip log."""
    out = {}
    for f in files:
        try:
            out[f.stem] = mio.parse_labels(f.read_bytes(), width, height, expect_confidence)
        except mio.ParseError as exc:
            manifest.skip(f.name, f"parse error: {exc}")
    return out


def _image_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    if w < 2 or h < 2:
        raise argparse.ArgumentTypeError("image dimensions must be >= 2")
    return w, h


def _read_rig(path: str):
    try:
        return mio.parse_rig(Path(path).read_bytes())
    except mio.ParseError as exc:
        raise CliError(f"invalid rig file {path}: {exc}") from None


def cmd_size(args) -> int:
    out = _out_dir(args.out)
    rig = _read_rig(args.rig)
    manifest = RunManifest("size", {"labels": args.labels}, rig=args.rig)
    boxes = _load_boxes(_label_files(args.labels), rig.image_w_px, rig.image_h_px,
                        args.detections, manifest)
    records = []
    for image_id in sorted(boxes):
        for k, box in enumerate(boxes[image_id]):
            object_id = f"{image_id}:{k}"
            try:
                est = estimate_size(rig, box)
            except GeometryError as exc:
                manifest.skip(object_id, f"{type(exc).__name__}: {exc}")
                continue
            records.append(mio.SizedBox(object_id, image_id, box.class_id, est))
    manifest.processed = len(records)
    (out / "sizes.csv").write_text(mio.write_size_csv(records), encoding="utf-8")
    manifest.write(out)
    if not records:
        raise CliError("no box could be sized")
    return 0


def cmd_sensitivity(args) -> int:
    out = _out_dir(args.out)
    rig = _read_rig(args.rig)
    manifest = RunManifest("sensitivity", {"labels": args.labels}, rig=args.rig)
    per_image = _load_boxes(_label_files(args.labels), rig.image_w_px, rig.image_h_px,
                            args.detections, manifest)
    ids, boxes = [], []
    for image_id in sorted(per_image):
        for k, box in enumerate(per_image[image_id]):
            ids.append(f"{image_id}:{k}")
            boxes.append(box)
    usable_ids, usable = [], []
    for object_id, box in zip(ids, boxes):
        try:
            estimate_size(rig, box)
        except GeometryError as exc:
            manifest.skip(object_id, f"{type(exc).__name__}: {exc}")
            continue
        usable_ids.append(object_id)
        usable.append(box)
    if not usable:
        manifest.write(out)
        raise CliError("no box could be sized")
    try:
        rep = pixel_sensitivity(rig, usable, args.shift)
    except (ValueError, GeometryError) as exc:
        manifest.write(out)
        raise CliError(str(exc)) from None
    for i in rep.skipped:
        manifest.skip(usable_ids[i], "shifted box leaves the image")
    manifest.processed = rep.n_boxes
    report = {"s_width_cm": mio._num(rep.s_width_cm), "s_height_cm": mio._num(rep.s_height_cm),
              "n_boxes": rep.n_boxes, "n_skipped": len(manifest.skipped), "shift_px": args.shift}
    (out / "sensitivity.json").write_text(mio.dumps(report), encoding="utf-8")
    manifest.write(out)
    print(f"S_width = {mio.fmt(rep.s_width_cm)} cm, S_height = {mio.fmt(rep.s_height_cm)} cm")
    return 0


def _paired(pred: dict, ref: dict) -> list[str]:
    missing = sorted(set(pred) ^ set(ref))
    if missing:
        raise CliError(f"UnpairedSamples: {', '.join(missing)}")
    return sorted(pred)


def _read_sizes(path: str) -> dict:
    try:
        return mio.parse_sizes(Path(path).read_bytes())
    except mio.ParseError as exc:
        raise CliError(f"{path}: {exc}") from None


def cmd_correct(args) -> int:
    out = _out_dir(args.out)
    pred, ref = _read_sizes(args.pred), _read_sizes(args.ref)
    ids = _paired(pred, ref)
    stage = CorrectionStage(args.stage)
    manifest = RunManifest("correct", {"pred": args.pred, "ref": args.ref})
    report = {"degree": args.degree, "stage": stage.value}
    for k, axis in enumerate((Axis.WIDTH, Axis.HEIGHT)):
        samples = [PairedSample(pred[i][k], ref[i][k], i) for i in ids]
        model = fit(samples, args.degree, axis, stage)
        applied = apply_many(model, [s.predicted for s in samples])
        after = [PairedSample(v, s.reference, s.object_id) for v, s in zip(applied.values, samples)]
        (out / f"model_{axis.value}.json").write_text(mio.write_model(model), encoding="utf-8")
        report[axis.value] = {
            "before": mio.error_report_dict(error_report(samples)),
            "after": mio.error_report_dict(error_report(after)),
            "monotone": model.is_monotone,
            "n_clamped": int(applied.clamped.sum()),
        }
    manifest.processed = len(ids)
    (out / "report.json").write_text(mio.dumps(report), encoding="utf-8")
    manifest.write(out)
    return 0


def cmd_correct_grid(args) -> int:
    out = _out_dir(args.out)
    det, ann, mea = (_read_sizes(p) for p in (args.detected, args.annotated, args.measured))
    ids = _paired(det, ann)
    _paired(det, mea)
    cells = strategy_grid([det[i] for i in ids], [ann[i] for i in ids], [mea[i] for i in ids])
    (out / "grid.json").write_text(mio.write_report(cells), encoding="utf-8")
    manifest = RunManifest("correct-grid", {"detected": args.detected, "annotated": args.annotated,
                                            "measured": args.measured})
    manifest.processed = len(ids)
    manifest.write(out)
    return 0


def cmd_evaluate(args) -> int:
    out = _out_dir(args.out)
    w, h = args.image_size
    manifest = RunManifest("evaluate", {"dets": args.dets, "gts": args.gts})
    det_files, gt_files = _label_files(args.dets), _label_files(args.gts)
    gt_ids = {f.stem for f in gt_files}
    det_ids = {f.stem for f in det_files}
    if not gt_ids & det_ids:
        raise CliError("DisjointImageSets: detection and ground-truth directories share no image")
    unknown = sorted(det_ids - gt_ids)
    if unknown:
        raise CliError(f"DisjointImageSets: detections for unknown images {', '.join(unknown)}")
    for image_id in sorted(gt_ids - det_ids):
        manifest.skip(image_id, "no detection file; treated as no detections")
    gt_boxes = _load_boxes(gt_files, w, h, False, manifest)
    det_boxes = _load_boxes(det_files, w, h, True, manifest)
    gts = [GroundTruth(b, b.class_id, i) for i in sorted(gt_boxes) for b in gt_boxes[i]]
    dets = [Detection(b, b.class_id, b.confidence, i)
            for i in sorted(det_boxes) if i in gt_boxes for b in det_boxes[i]]
    if not gts:
        manifest.write(out)
        raise CliError("EmptyGroundTruth: no ground-truth boxes")
    rep = map_suite(dets, gts, conf_thresh=args.conf_thresh, num_classes=args.num_classes,
                    iou_thresh=args.iou)
    manifest.processed = len(gt_boxes)
    (out / "eval.json").write_text(mio.write_report(rep), encoding="utf-8")
    manifest.write(out)
    print(f"mAP50 = {mio.fmt(rep.map50)}  mAP50-95 = {mio.fmt(rep.map50_95)}  "
          f"P = {mio.fmt(rep.precision)}  R = {mio.fmt(rep.recall)}")
    return 0


def cmd_split(args) -> int:
    out = _out_dir(args.out)
    manifest = RunManifest("split", {"embeddings": args.embeddings, "labels": args.labels or "",
                                     "timestamps": args.timestamps}, seed=args.seed)
    try:
        ids, visual = mio.parse_embeddings(Path(args.embeddings).read_bytes())
        stamps = mio.parse_timestamps(Path(args.timestamps).read_bytes())
    except mio.ParseError as exc:
        raise CliError(str(exc)) from None
    w, h = args.image_size
    annotations = {}
    if args.labels:
        annotations = _load_boxes(sorted(Path(args.labels).glob("*.txt")), w, h, False, manifest)
    embs = []
    for image_id, vec in zip(ids, visual):
        if image_id not in stamps:
            manifest.skip(image_id, "no timestamp")
            continue
        embs.append(build_embedding(image_id, vec, annotations.get(image_id, []), stamps[image_id]))
    if not embs:
        raise CliError("no image has both an embedding and a timestamp")
    embs = standardize(embs)
    config = TSNEConfig(perplexity=args.perplexity, learning_rate=args.learning_rate)
    try:
        reduced = tsne([e.full_vector for e in embs], [e.image_id for e in embs], config, args.seed)
    except ValueError as exc:
        manifest.write(out)
        raise CliError(f"{type(exc).__name__}: {exc}") from None
    pts = np.array([[r.x, r.y] for r in reduced])
    labels = dbscan(pts, args.eps, args.min_samples)
    try:
        score = dbcv(pts, labels)
    except TooFewClusters as exc:
        score = None
        manifest.skip("dbcv", str(exc))
    part = cluster_split({r.image_id: int(c) for r, c in zip(reduced, labels)},
                         seed=args.seed, dbcv=score)
    if part.spanning_clusters():
        raise CliError("internal error: a cluster spans several subsets")

    (out / "reduced.csv").write_text(
        "image_id,x,y\n" + "".join(f"{r.image_id},{r.x!r},{r.y!r}\n" for r in reduced),
        encoding="utf-8")
    (out / "labels.csv").write_text(
        "image_id,cluster\n" + "".join(f"{r.image_id},{int(c)}\n" for r, c in zip(reduced, labels)),
        encoding="utf-8")
    (out / "partition.json").write_text(mio.write_report(part), encoding="utf-8")
    for subset in ("train", "val", "test"):
        (out / f"{subset}.txt").write_text("".join(f"{i}\n" for i in part.ids(subset)),
                                          encoding="utf-8")
    manifest.processed = len(embs)
    manifest.write(out)
    print(f"{len(set(labels.tolist()) - {-1})} clusters, DBCV = "
          f"{'n/a' if score is None else mio.fmt(score)}")
    return 0


def cmd_select_days(args) -> int:
    try:
        records = mio.parse_weather(Path(args.weather).read_bytes())
        cloudiest, sunniest = select_extreme_days(records)
    except ValueError as exc:
        raise CliError(f"{type(exc).__name__}: {exc}") from None
    print(f"cloudiest {cloudiest.isoformat()}")
    print(f"sunniest {sunniest.isoformat()}")
    if args.out:
        out = _out_dir(args.out)
        (out / "days.json").write_text(
            mio.dumps({"cloudiest": cloudiest.isoformat(), "sunniest": sunniest.isoformat()}),
            encoding="utf-8")
        manifest = RunManifest("select-days", {"weather": args.weather})
        manifest.processed = len(records)
        manifest.write(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="monometry", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("size", help="metric sizes for every box in a label directory")
    s.add_argument("labels", help="directory of YOLO label files")
    s.add_argument("--rig", required=True, help="camera rig key=value file")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--detections", action="store_true", help="label lines carry a confidence")
    s.set_defaults(func=cmd_size)

    s = sub.add_parser("sensitivity", help="per-pixel sensitivity over a label directory")
    s.add_argument("labels")
    s.add_argument("--rig", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--shift", type=float, default=1.0, help="shift in pixels (default 1)")
    s.add_argument("--detections", action="store_true")
    s.set_defaults(func=cmd_sensitivity)

    s = sub.add_parser("correct", help="fit width/height correction models")
    s.add_argument("pred", help="CSV object_id,dim_x_cm,dim_y_cm of predicted sizes")
    s.add_argument("ref", help="CSV of reference sizes, same columns")
    s.add_argument("--degree", type=int, choices=(1, 2), default=2)
    s.add_argument("--stage", choices=[c.value for c in CorrectionStage], default="dimension")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_correct)

    s = sub.add_parser("correct-grid", help="3x3 box-shape x dimension strategy table")
    s.add_argument("detected", help="sizes from detector boxes")
    s.add_argument("annotated", help="sizes from hand-drawn boxes")
    s.add_argument("measured", help="tape-measured sizes")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_correct_grid)

    s = sub.add_parser("evaluate", help="precision, recall, mAP against ground truth")
    s.add_argument("dets", help="directory of detection label files (with confidence)")
    s.add_argument("gts", help="directory of ground-truth label files")
    s.add_argument("--out", required=True)
    s.add_argument("--conf-thresh", type=float, default=0.25)
    s.add_argument("--image-size", type=_image_size, default=(1920, 1080), help="WxH in pixels")
    s.add_argument("--num-classes", type=int, default=None)
    s.add_argument("--iou", type=float, default=0.5, help="IoU for precision/recall and confusion")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("split", help="t-SNE + DBSCAN leak-free train/val/test split")
    s.add_argument("embeddings", help="CSV image_id followed by 256 visual features")
    s.add_argument("--timestamps", required=True, help="CSV image_id,timestamp")
    s.add_argument("--labels", default=None,
                   help="optional label directory for annotation features")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--perplexity", type=float, default=30.0)
    s.add_argument("--learning-rate", type=float, default=200.0)
    s.add_argument("--eps", type=float, default=5.0)
    s.add_argument("--min-samples", type=int, default=10)
    s.add_argument("--image-size", type=_image_size, default=(1920, 1080))
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("select-days", help="cloudiest and sunniest days from weather records")
    s.add_argument("weather", help="CSV date,INST,GLOT,SIGMA")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_select_days)
    return p


def main(argv=None) -> int:
    level = getattr(logging, os.environ.get("MONOMETRY_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
