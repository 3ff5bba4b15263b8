"""Readers and writers for label files, rig configs, embeddings, weather, models and reports.

Every parser accepts ``str`` or ``bytes`` and either returns a value or raises
a ``ParseError`` subclass carrying the offending line or key.
"""
from __future__ import annotations

import csv
import datetime as dt
import io as _io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .correction import CorrectionModel, ErrorReport, GridCell
from .evaluation import EvalReport
from .geometry import CameraRig, PixelBox, SizeEstimate
from .leakage.embedding import VISUAL_DIM
from .leakage.split import SUBSETS, ClusterPartition
from .leakage.weather import DayRecord

Text = Union[str, bytes]

RIG_KEYS = ("focal_mm", "sensor_w_mm", "sensor_h_mm", "image_w_px", "image_h_px",
            "height_m", "pitch_deg")
RIG_OPTIONAL = ("id", "units")


class ParseError(ValueError):
    """Base class; ``locus`` is a line number or key name."""

    locus: object = None


class MalformedLine(ParseError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.locus = line
        self.reason = reason


class LabelParseError(ParseError):
    """All malformed lines of one file."""

    def __init__(self, errors: Sequence[MalformedLine]):
        self.errors = list(errors)
        self.locus = [e.line for e in self.errors]
        super().__init__("; ".join(str(e) for e in self.errors))


class EncodingError(ParseError):
    def __init__(self, reason: str):
        super().__init__(f"input is not valid UTF-8: {reason}")
        self.locus = "encoding"


class RigError(ParseError):
    def __init__(self, key: str, reason: str):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.locus = key


class MissingKey(RigError):
    pass


class InvalidValue(RigError):
    pass


class InvariantViolation(RigError):
    pass


def _decode(text: Text) -> str:
    if isinstance(text, bytes):
        try:
            return text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError(str(exc)) from None
    return text


def _float(field: str) -> float:
    value = float(field)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {field!r}")
    return value


# -- YOLO labels ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParsedLabels:
    boxes: list[PixelBox]
    clamped_lines: list[int]


def parse_labels_detailed(text: Text, image_w: int, image_h: int,
                          expect_confidence: bool = False) -> ParsedLabels:
    """Parse ``class cx cy w h [conf]`` lines into pixel boxes.

    Edges falling slightly outside the image are clamped and their line
    numbers reported in ``clamped_lines``.
    """
    text = _decode(text)
    n_fields = 6 if expect_confidence else 5
    sx, sy = image_w - 1, image_h - 1
    boxes, clamped, errors = [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != n_fields:
            errors.append(MalformedLine(lineno, f"expected {n_fields} fields, got {len(fields)}"))
            continue
        try:
            cls_f = _float(fields[0])
            cx, cy, w, h = (_float(f) for f in fields[1:5])
            conf = _float(fields[5]) if expect_confidence else None
        except ValueError as exc:
            errors.append(MalformedLine(lineno, f"non-numeric field ({exc})"))
            continue
        reason = None
        if cls_f != int(cls_f) or cls_f < 0:
            reason = f"class id {fields[0]!r} is not a non-negative integer"
        elif not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0):
            reason = "box center outside [0, 1]"
        elif not (0.0 < w <= 1.0 and 0.0 < h <= 1.0):
            reason = "box size outside (0, 1]"
        elif conf is not None and not 0.0 <= conf <= 1.0:
            reason = "confidence outside [0, 1]"
        if reason:
            errors.append(MalformedLine(lineno, reason))
            continue
        edges = (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
        kept = tuple(min(max(e, 0.0), 1.0) for e in edges)
        if kept != edges:
            clamped.append(lineno)
        x0, y0, x1, y1 = kept[0] * sx, kept[1] * sy, kept[2] * sx, kept[3] * sy
        if not (x0 < x1 and y0 < y1):
            errors.append(MalformedLine(lineno, "box collapses to zero area"))
            continue
        boxes.append(PixelBox(x0, y0, x1, y1, class_id=int(cls_f), confidence=conf))
    if errors:
        raise LabelParseError(errors)
    return ParsedLabels(boxes, clamped)


def parse_labels(text: Text, image_w: int, image_h: int,
                 expect_confidence: bool = False) -> list[PixelBox]:
    return parse_labels_detailed(text, image_w, image_h, expect_confidence).boxes


def write_labels(boxes: Iterable[PixelBox], image_w: int, image_h: int) -> str:
    """Inverse of ``parse_labels``; floats written with full precision."""
    sx, sy = image_w - 1, image_h - 1
    lines = []
    for b in boxes:
        fields = [str(b.class_id or 0),
                  repr((b.x_min + b.x_max) / 2 / sx), repr((b.y_min + b.y_max) / 2 / sy),
                  repr((b.x_max - b.x_min) / sx), repr((b.y_max - b.y_min) / sy)]
        if b.confidence is not None:
            fields.append(repr(float(b.confidence)))
        lines.append(" ".join(fields))
    return "".join(line + "\n" for line in lines)


# -- camera rig ----------------------------------------------------------------------------

@dataclass(frozen=True)
class RigConfig:
    rig: CameraRig
    identifier: Optional[str] = None
    units: str = "metric"


def parse_rig_config(text: Text) -> RigConfig:
    """Flat ``key = value`` (or ``key: value``) file; ``#`` starts a comment."""
    text = _decode(text)
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise InvalidValue(f"line {lineno}", "expected 'key = value'")
        key, value = (part.strip() for part in line.split(sep, 1))
        value = value.strip("\"'")
        if key not in RIG_KEYS + RIG_OPTIONAL:
            raise InvalidValue(key or f"line {lineno}", "unknown key")
        if key in values:
            raise InvalidValue(key, "duplicate key")
        values[key] = value
    for key in RIG_KEYS:
        if key not in values:
            raise MissingKey(key, "required key is missing")
    if values.get("units", "metric") != "metric":
        raise InvalidValue("units", f"only 'metric' is supported, got {values['units']!r}")

    nums: dict[str, float] = {}
    for key in RIG_KEYS:
        try:
            nums[key] = _float(values[key])
        except ValueError:
            raise InvalidValue(key, f"not a finite number: {values[key]!r}") from None
    for key in ("image_w_px", "image_h_px"):
        if nums[key] != int(nums[key]):
            raise InvalidValue(key, "must be an integer")
    checks = {
        "focal_mm": nums["focal_mm"] > 0,
        "sensor_w_mm": nums["sensor_w_mm"] > 0,
        "sensor_h_mm": nums["sensor_h_mm"] > 0,
        "image_w_px": nums["image_w_px"] >= 2,
        "image_h_px": nums["image_h_px"] >= 2,
        "height_m": nums["height_m"] > 0,
        "pitch_deg": 0 < nums["pitch_deg"] < 90,
    }
    for key, ok in checks.items():
        if not ok:
            raise InvariantViolation(key, f"value {values[key]!r} violates the rig constraints")
    rig = CameraRig(
        focal_mm=nums["focal_mm"], sensor_w_mm=nums["sensor_w_mm"],
        sensor_h_mm=nums["sensor_h_mm"], image_w_px=int(nums["image_w_px"]),
        image_h_px=int(nums["image_h_px"]), height_m=nums["height_m"],
        pitch_rad=math.radians(nums["pitch_deg"]),
    )
    return RigConfig(rig, values.get("id"), values.get("units", "metric"))


def parse_rig(text: Text) -> CameraRig:
    return parse_rig_config(text).rig


def write_rig(rig: CameraRig, identifier: Optional[str] = None) -> str:
    lines = [f"id = {identifier}"] if identifier else []
    lines += [
        f"focal_mm = {rig.focal_mm!r}", f"sensor_w_mm = {rig.sensor_w_mm!r}",
        f"sensor_h_mm = {rig.sensor_h_mm!r}", f"image_w_px = {rig.image_w_px}",
        f"image_h_px = {rig.image_h_px}", f"height_m = {rig.height_m!r}",
        f"pitch_deg = {math.degrees(rig.pitch_rad)!r}", "units = metric",
    ]
    return "\n".join(lines) + "\n"


# -- correction models ---------------------------------------------------------------------

def write_model(model: CorrectionModel) -> str:
    record = {
        "axis": model.axis.value,
        "stage": model.stage.value,
        "degree": model.degree,
        "coefficients": list(model.coefficients),
        "fit_range": list(model.fit_range),
    }
    return json.dumps(record, indent=2) + "\n"


def parse_model(text: Text) -> CorrectionModel:
    text = _decode(text)
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedLine(exc.lineno, exc.msg) from None
    except RecursionError:
        raise InvalidValue("record", "nesting too deep") from None
    if not isinstance(record, dict):
        raise InvalidValue("record", "expected a JSON object")
    for key in ("axis", "stage", "degree", "coefficients", "fit_range"):
        if key not in record:
            raise MissingKey(key, "required key is missing")
    try:
        return CorrectionModel(
            degree=int(record["degree"]),
            coefficients=tuple(float(c) for c in record["coefficients"]),
            axis=record["axis"], stage=record["stage"],
            fit_range=tuple(float(v) for v in record["fit_range"]),
        )
    except (TypeError, ValueError, OverflowError) as exc:
        raise InvalidValue("record", str(exc)) from None


# -- delimited inputs ----------------------------------------------------------------------

def _rows(text: Text) -> list[list[str]]:
    reader = csv.reader(_io.StringIO(_decode(text)))
    try:
        return [row for row in reader if any(f.strip() for f in row)]
    except csv.Error as exc:
        raise MalformedLine(reader.line_num, str(exc)) from None


def parse_embeddings(text: Text) -> tuple[list[str], np.ndarray]:
    """``image_id,v0,...,v255`` rows; a non-numeric first row is taken as a header."""
    rows = _rows(text)
    if rows:
        try:
            [float(f) for f in rows[0][1:]]
        except ValueError:
            rows = rows[1:]
    ids, vecs, errors = [], [], []
    for lineno, row in enumerate(rows, start=1):
        if len(row) != VISUAL_DIM + 1:
            errors.append(MalformedLine(lineno, f"expected {VISUAL_DIM + 1} fields, got {len(row)}"))
            continue
        try:
            vecs.append([_float(f) for f in row[1:]])
        except ValueError as exc:
            errors.append(MalformedLine(lineno, str(exc)))
            continue
        ids.append(row[0].strip())
    if errors:
        raise LabelParseError(errors)
    return ids, np.array(vecs, dtype=float).reshape(len(ids), VISUAL_DIM)


def _keyed_columns(text: Text, required: Sequence[str]) -> list[tuple[int, dict[str, str]]]:
    rows = _rows(text)
    if not rows:
        raise MissingKey(required[0], "file is empty")
    header = [h.strip() for h in rows[0]]
    for key in required:
        if key not in header:
            raise MissingKey(key, "column missing from header")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise MalformedLine(lineno, f"expected {len(header)} fields, got {len(row)}")
        out.append((lineno, dict(zip(header, (f.strip() for f in row)))))
    return out


def parse_timestamps(text: Text) -> dict[str, float]:
    out = {}
    for lineno, row in _keyed_columns(text, ("image_id", "timestamp")):
        try:
            out[row["image_id"]] = _float(row["timestamp"])
        except ValueError as exc:
            raise MalformedLine(lineno, str(exc)) from None
    return out


def parse_weather(text: Text) -> list[DayRecord]:
    """``date,INST,GLOT,SIGMA`` rows; SIGMA given in percent (any value > 1) becomes a fraction."""
    recs = []
    for lineno, row in _keyed_columns(text, ("date", "INST", "GLOT", "SIGMA")):
        try:
            day = dt.date.fromisoformat(row["date"])
            inst, glot, sigma = (_float(row[k]) for k in ("INST", "GLOT", "SIGMA"))
        except ValueError as exc:
            raise MalformedLine(lineno, str(exc)) from None
        recs.append(DayRecord(day, inst, glot, sigma))
    if recs and max(r.sigma for r in recs) > 1.0:
        recs = [DayRecord(r.date, r.inst, r.glot, r.sigma / 100.0) for r in recs]
    for r in recs:
        if not 0.0 <= r.sigma <= 1.0:
            raise InvalidValue("SIGMA", f"{r.date}: sunshine fraction outside [0, 1]")
    return recs


def parse_sizes(text: Text) -> dict[str, tuple[float, float]]:
    """Size CSV keyed by object_id -> (dim_x_cm, dim_y_cm)."""
    out = {}
    for lineno, row in _keyed_columns(text, ("object_id", "dim_x_cm", "dim_y_cm")):
        if row["object_id"] in out:
            raise MalformedLine(lineno, f"duplicate object_id {row['object_id']!r}")
        try:
            out[row["object_id"]] = (_float(row["dim_x_cm"]), _float(row["dim_y_cm"]))
        except ValueError as exc:
            raise MalformedLine(lineno, str(exc)) from None
    return out


# -- reports -------------------------------------------------------------------------------

def fmt(x: float) -> str:
    return f"{x:.6g}"


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if x is None:
        return None
    x = float(x)
    return float(fmt(x)) if math.isfinite(x) else None


@dataclass(frozen=True)
class SizedBox:
    object_id: str
    image_id: str
    class_id: Optional[int]
    estimate: SizeEstimate


SIZE_HEADER = ("object_id", "image_id", "class", "dim_x_cm", "dim_y_cm", "range_m", "stage")


def write_size_csv(records: Sequence[SizedBox]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SIZE_HEADER)
    for r in records:
        e = r.estimate
        w.writerow([r.object_id, r.image_id, "" if r.class_id is None else r.class_id,
                    fmt(e.dim_x_cm), fmt(e.dim_y_cm), fmt(e.range_m), e.stage.value])
    return buf.getvalue()


def error_report_dict(rep: ErrorReport) -> dict:
    return {"n": rep.n, "rmse": _num(rep.rmse), "mae": _num(rep.mae),
            "mean_residual": _num(rep.mean_residual),
            "residual_quartiles": [_num(q) for q in rep.residual_quartiles]}


def eval_report_dict(rep: EvalReport) -> dict:
    return {
        "map50": _num(rep.map50), "map50_95": _num(rep.map50_95),
        "precision": _num(rep.precision), "recall": _num(rep.recall),
        "tp": rep.tp, "fp": rep.fp, "fn": rep.fn,
        "per_class_ap50": {str(k): _num(v) for k, v in sorted(rep.per_class_ap50.items())},
        "per_class_ap50_95": {str(k): _num(v) for k, v in sorted(rep.per_class_ap50_95.items())},
        "num_classes": rep.num_classes,
        "confusion": rep.confusion.astype(int).tolist(),
        "confusion_normalized": [[_num(v) for v in row] for row in rep.normalized_confusion()],
    }


def partition_dict(part: ClusterPartition) -> dict:
    labels = {str(k): int(v) for k, v in part.labels.items()}
    return {
        "dbcv": _num(part.dbcv),
        "n_clusters": len({v for v in labels.values() if v != -1}),
        "n_noise": sum(v == -1 for v in labels.values()),
        "proportions": {s: _num(part.proportions.get(s, 0.0)) for s in SUBSETS},
        "labels": dict(sorted(labels.items())),
        "split": dict(sorted((str(k), v) for k, v in part.split.items())),
    }


def grid_dict(cells: Sequence[GridCell]) -> list:
    name = {None: "none", 1: "linear", 2: "poly"}
    return [{"box_shape": name[c.shape_degree], "dimension": name[c.dim_degree],
             "width": error_report_dict(c.width), "height": error_report_dict(c.height)}
            for c in cells]


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_report(report) -> str:
    """Deterministic text rendering: CSV for size batches, JSON otherwise."""
    if isinstance(report, ErrorReport):
        return dumps(error_report_dict(report))
    if isinstance(report, EvalReport):
        return dumps(eval_report_dict(report))
    if isinstance(report, ClusterPartition):
        return dumps(partition_dict(report))
    if isinstance(report, (list, tuple)):
        if all(isinstance(r, SizedBox) for r in report):
            return write_size_csv(report)
        if all(isinstance(r, GridCell) for r in report):
            return dumps(grid_dict(report))
    raise TypeError(f"no report writer for {type(report).__name__}")
