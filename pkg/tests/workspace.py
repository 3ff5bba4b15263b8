"""Synthetic CLI workspace shared by the CLI tests and the acceptance suite."""
from pathlib import Path

import numpy as np

from monometry import io
from monometry.geometry import CameraRig, GroundRect, project_to_box

from fuzz import RIG_SEED

RIG = CameraRig(4.0, 6.4, 3.6, 1280, 720, 3.0, np.radians(30.0))


def _yolo(box, cls, w, h, conf=None):
    line = (f"{cls} {(box.x_min + box.x_max) / 2 / (w - 1)!r} {(box.y_min + box.y_max) / 2 / (h - 1)!r} "
            f"{box.width / (w - 1)!r} {box.height / (h - 1)!r}")
    return line + ("" if conf is None else f" {conf!r}") + "\n"


def build_workspace(tmp_path: Path) -> Path:
    """A directory with one of every CLI input kind."""
    rng = np.random.default_rng(0)
    (tmp_path / "rig.cfg").write_bytes(RIG_SEED)

    labels = tmp_path / "labels"
    labels.mkdir()
    for i in range(4):
        lines = []
        for k in range(3):
            rect = GroundRect(float(rng.uniform(-1.5, 1.5)), float(rng.uniform(-7, -4)),
                              float(rng.uniform(0.1, 0.6)), float(rng.uniform(0.1, 0.6)))
            lines.append(_yolo(project_to_box(RIG, rect), k, 1280, 720))
        (labels / f"img{i}.txt").write_text("".join(lines))

    dets = tmp_path / "dets"
    dets.mkdir()
    for f in labels.glob("*.txt"):
        boxes = io.parse_labels(f.read_text(), 1280, 720)
        out = [_yolo(b.shifted(float(rng.normal(0, 2)), float(rng.normal(0, 2))), b.class_id,
                     1280, 720, float(rng.uniform(0.3, 1.0))) for b in boxes]
        out.append("1 0.1 0.1 0.05 0.05 0.6\n")
        (dets / f.name).write_text("".join(out))

    n = 60
    pred = rng.uniform(10, 60, (n, 2))
    ref = 1.1 * pred + 2 + rng.normal(0, 0.5, (n, 2))
    ann = 0.95 * ref - 1 + rng.normal(0, 0.4, (n, 2))
    for name, arr in (("pred", pred), ("ref", ref), ("ann", ann)):
        body = "".join(f"o{i},{float(a)!r},{float(b)!r}\n" for i, (a, b) in enumerate(arr))
        (tmp_path / f"{name}.csv").write_text("object_id,dim_x_cm,dim_y_cm\n" + body)

    centres = rng.normal(0, 5, (3, 256))
    rows, stamps = [], []
    for i in range(45):
        vec = centres[i % 3] + rng.normal(0, 0.5, 256)
        rows.append(",".join([f"im{i:02d}"] + [repr(float(v)) for v in vec]))
        stamps.append(f"im{i:02d},{1.7e9 + 3600 * (i % 3) + i}")
    (tmp_path / "emb.csv").write_text("\n".join(rows) + "\n")
    (tmp_path / "ts.csv").write_text("image_id,timestamp\n" + "\n".join(stamps) + "\n")

    (tmp_path / "weather.csv").write_text(
        "date,INST,GLOT,SIGMA\n2025-02-10,12,300,5\n2025-02-14,300,1100,50\n"
        "2025-02-20,560,1900,95\n2025-02-22,400,1500,70\n")
    return tmp_path


def commands(ws):
    return {
        "size": ["size", str(ws / "labels"), "--rig", str(ws / "rig.cfg")],
        "sensitivity": ["sensitivity", str(ws / "labels"), "--rig", str(ws / "rig.cfg")],
        "correct": ["correct", str(ws / "pred.csv"), str(ws / "ref.csv"), "--degree", "1"],
        "correct-grid": ["correct-grid", str(ws / "pred.csv"), str(ws / "ann.csv"),
                         str(ws / "ref.csv")],
        "evaluate": ["evaluate", str(ws / "dets"), str(ws / "labels"), "--image-size", "1280x720"],
        "split": ["split", str(ws / "emb.csv"), "--timestamps", str(ws / "ts.csv"),
                  "--labels", str(ws / "labels"), "--seed", "7", "--perplexity", "5",
                  "--learning-rate", "10",
                  "--eps", "3", "--min-samples", "3"],
        "select-days": ["select-days", str(ws / "weather.csv")],
    }


