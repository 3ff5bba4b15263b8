"""Two-stage polynomial correction of geometric size estimates.

Stage one (box shape) maps sizes measured on detector boxes to sizes measured
on annotated boxes; stage two (dimension) maps geometric sizes to measured
object sizes. Width and height always get independent models.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Hashable, Iterable, Optional, Sequence

import numpy as np

from .geometry import SizeEstimate, Stage

MIN_OUTPUT_CM = 0.1


class Axis(str, Enum):
    WIDTH = "width"
    HEIGHT = "height"


class CorrectionStage(str, Enum):
    BOX_SHAPE = "box_shape"
    DIMENSION = "dimension"


class CorrectionError(ValueError):
    pass


class InsufficientSamples(CorrectionError):
    pass


class RankDeficient(CorrectionError):
    pass


class AxisMismatch(CorrectionError):
    pass


class EmptyInput(CorrectionError):
    pass


class NonMonotoneWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PairedSample:
    predicted: float
    reference: float
    object_id: Hashable = None

    def __post_init__(self):
        if not (self.predicted > 0 and self.reference > 0):
            raise ValueError(f"sample {self.object_id!r}: sizes must be positive")


@dataclass(frozen=True)
class CorrectionModel:
    degree: int
    coefficients: tuple[float, ...]
    axis: Axis
    stage: CorrectionStage
    fit_range: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        object.__setattr__(self, "fit_range", tuple(float(v) for v in self.fit_range))
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "stage", CorrectionStage(self.stage))
        if self.degree not in (1, 2):
            raise ValueError(f"degree must be 1 or 2, got {self.degree!r}")
        if len(self.coefficients) != self.degree + 1:
            raise ValueError("coefficient count must equal degree + 1")
        lo, hi = self.fit_range
        if not lo < hi:
            raise ValueError(f"fit_range must be increasing, got {self.fit_range}")

    def evaluate(self, x):
        """Raw polynomial value, no clamping."""
        return np.polynomial.polynomial.polyval(x, self.coefficients)

    @property
    def is_monotone(self) -> bool:
        """True when the derivative stays positive over the training range."""
        deriv = np.polynomial.polynomial.polyder(self.coefficients)
        # derivative is at most linear, so the endpoints decide
        return bool(np.all(np.polynomial.polynomial.polyval(np.array(self.fit_range), deriv) > 0))

    @classmethod
    def identity(cls, axis: Axis, stage: CorrectionStage,
                 fit_range=(MIN_OUTPUT_CM, 1e4)) -> "CorrectionModel":
        return cls(1, (0.0, 1.0), axis, stage, fit_range)


def fit(samples: Sequence[PairedSample], degree: int, axis: Axis,
        stage: CorrectionStage) -> CorrectionModel:
    """Least-squares polynomial fit of reference against predicted size.

    Solved through a QR factorization of the Vandermonde matrix. A fitted
    polynomial that is not increasing over the training range triggers a
    ``NonMonotoneWarning``; check ``model.is_monotone`` to handle it.
    """
    if degree not in (1, 2):
        raise ValueError(f"degree must be 1 or 2, got {degree!r}")
    if len(samples) < degree + 2:
        raise InsufficientSamples(f"need at least {degree + 2} samples for degree {degree}, "
                                  f"got {len(samples)}")
    x = np.array([s.predicted for s in samples], dtype=float)
    y = np.array([s.reference for s in samples], dtype=float)
    if np.ptp(x) == 0 or len(np.unique(x)) <= degree:
        raise RankDeficient("predicted values do not span enough distinct points")

    vander = np.vander(x, degree + 1, increasing=True)
    q, r = np.linalg.qr(vander)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-12 * diag.max():
        raise RankDeficient("design matrix is numerically singular")
    coef = np.linalg.solve(r, q.T @ y)

    model = CorrectionModel(degree, tuple(coef), axis, stage, (float(x.min()), float(x.max())))
    if not model.is_monotone:
        warnings.warn(f"{axis.value}/{stage.value} degree-{degree} fit is not increasing over "
                      f"{model.fit_range}", NonMonotoneWarning, stacklevel=2)
    return model


def apply(model: CorrectionModel, predicted: float) -> float:
    if not predicted > 0:
        raise ValueError(f"predicted size must be positive, got {predicted!r}")
    return max(float(model.evaluate(predicted)), MIN_OUTPUT_CM)


@dataclass(frozen=True)
class AppliedCorrection:
    values: np.ndarray
    extrapolated: np.ndarray
    clamped: np.ndarray


def apply_many(model: CorrectionModel, predicted: Iterable[float]) -> AppliedCorrection:
    x = np.asarray(list(predicted), dtype=float)
    raw = model.evaluate(x)
    lo, hi = model.fit_range
    return AppliedCorrection(
        values=np.maximum(raw, MIN_OUTPUT_CM),
        extrapolated=(x < lo) | (x > hi),
        clamped=raw < MIN_OUTPUT_CM,
    )


@dataclass(frozen=True)
class AxisModels:
    width: Optional[CorrectionModel] = None
    height: Optional[CorrectionModel] = None

    def check(self, stage: CorrectionStage) -> None:
        for axis, model in ((Axis.WIDTH, self.width), (Axis.HEIGHT, self.height)):
            if model is None:
                continue
            if model.axis is not axis:
                raise AxisMismatch(f"{model.axis.value} model supplied for the {axis.value} axis")
            if model.stage is not stage:
                raise AxisMismatch(f"{model.stage.value} model supplied as a {stage.value} correction")

    @property
    def empty(self) -> bool:
        return self.width is None and self.height is None


def _apply_axes(models: AxisModels, est: SizeEstimate, stage: Stage) -> SizeEstimate:
    dx = apply(models.width, est.dim_x_cm) if models.width else est.dim_x_cm
    dy = apply(models.height, est.dim_y_cm) if models.height else est.dim_y_cm
    return replace(est, dim_x_cm=dx, dim_y_cm=dy, stage=stage)


def correct_pipeline(shape: Optional[AxisModels], dims: Optional[AxisModels],
                     raw: SizeEstimate) -> SizeEstimate:
    """Box-shape correction, then dimension correction; either may be absent."""
    est = raw
    if shape is not None and not shape.empty:
        shape.check(CorrectionStage.BOX_SHAPE)
        est = _apply_axes(shape, est, Stage.SHAPE_CORRECTED)
    if dims is not None and not dims.empty:
        dims.check(CorrectionStage.DIMENSION)
        est = _apply_axes(dims, est, Stage.DIM_CORRECTED)
    return est


@dataclass(frozen=True)
class ErrorReport:
    rmse: float
    mae: float
    residual_quartiles: tuple[float, float, float, float, float]
    n: int
    mean_residual: float = field(default=0.0)


def error_report(pairs: Sequence[PairedSample]) -> ErrorReport:
    """RMSE, MAE and residual five-number summary; residual = reference - predicted."""
    if not pairs:
        raise EmptyInput("error_report needs at least one pair")
    res = np.array([p.reference - p.predicted for p in pairs], dtype=float)
    rmse = math.sqrt(math.fsum(res * res) / len(res))
    mae = math.fsum(np.abs(res)) / len(res)
    q = np.percentile(res, [0, 25, 50, 75, 100], method="linear")
    return ErrorReport(rmse=rmse, mae=mae, residual_quartiles=tuple(float(v) for v in q),
                       n=len(res), mean_residual=math.fsum(res) / len(res))


def errors_between(predicted: Sequence[float], reference: Sequence[float]) -> ErrorReport:
    return error_report([PairedSample(p, r, i) for i, (p, r) in enumerate(zip(predicted, reference))])


STRATEGIES: tuple[Optional[int], ...] = (None, 1, 2)


@dataclass(frozen=True)
class GridCell:
    shape_degree: Optional[int]
    dim_degree: Optional[int]
    width: ErrorReport
    height: ErrorReport


def strategy_grid(detected: Sequence[tuple[float, float]],
                  annotated: Sequence[tuple[float, float]],
                  measured: Sequence[tuple[float, float]]) -> list[GridCell]:
    """The 3x3 table of {none, linear, poly} shape x {none, linear, poly} dimension corrections.

    Each argument holds (width_cm, height_cm) per object in a common order:
    sizes on detector boxes, sizes on annotated boxes, and hand measurements.
    Shape models map detected -> annotated; dimension models map annotated ->
    measured. Errors are always against the measured sizes.
    """
    if not (len(detected) == len(annotated) == len(measured)):
        raise ValueError("detected, annotated and measured must have equal length")
    cells = []
    shape_models = {None: AxisModels()}
    dim_models = {None: AxisModels()}
    for deg in (1, 2):
        shape_models[deg] = AxisModels(*(
            fit([PairedSample(d[k], a[k], i) for i, (d, a) in enumerate(zip(detected, annotated))],
                       deg, axis, CorrectionStage.BOX_SHAPE)
            for k, axis in enumerate((Axis.WIDTH, Axis.HEIGHT))))
        dim_models[deg] = AxisModels(*(
            fit([PairedSample(a[k], m[k], i) for i, (a, m) in enumerate(zip(annotated, measured))],
                       deg, axis, CorrectionStage.DIMENSION)
            for k, axis in enumerate((Axis.WIDTH, Axis.HEIGHT))))
    for sd in STRATEGIES:
        for dd in STRATEGIES:
            out = [correct_pipeline(shape_models[sd], dim_models[dd], SizeEstimate(w, h))
                   for w, h in detected]
            cells.append(GridCell(
                shape_degree=sd, dim_degree=dd,
                width=errors_between([e.dim_x_cm for e in out], [m[0] for m in measured]),
                height=errors_between([e.dim_y_cm for e in out], [m[1] for m in measured]),
            ))
    return cells

