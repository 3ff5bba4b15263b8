"""Picking the cloudiest and sunniest days from daily sunshine records."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class WeatherError(ValueError):
    pass


class EmptyInput(WeatherError):
    pass


class ConstantVariables(WeatherError):
    pass


@dataclass(frozen=True)
class DayRecord:
    date: dt.date
    inst: float
    glot: float
    sigma: float


def composite_scores(records: Sequence[DayRecord]) -> np.ndarray:
    """Mean of the min-max normalised INST, GLOT and SIGMA columns."""
    m = np.array([[r.inst, r.glot, r.sigma] for r in records], dtype=float)
    if not np.all(np.isfinite(m)):
        raise WeatherError("weather variables must be finite")
    lo, span = m.min(axis=0), np.ptp(m, axis=0)
    if np.all(span == 0):
        raise ConstantVariables("INST, GLOT and SIGMA are all constant")
    norm = np.divide(m - lo, span, out=np.zeros_like(m), where=span > 0)
    return norm.mean(axis=1)


def select_extreme_days(records: Sequence[DayRecord]) -> tuple[dt.date, dt.date]:
    """Return (cloudiest, sunniest); ties go to the earliest date."""
    if len(records) < 2:
        raise EmptyInput("need at least two daily records")
    ordered = sorted(records, key=lambda r: r.date)
    score = composite_scores(ordered)
    # argmin/argmax return the first occurrence, i.e. the earliest date
    return ordered[int(np.argmin(score))].date, ordered[int(np.argmax(score))].date
