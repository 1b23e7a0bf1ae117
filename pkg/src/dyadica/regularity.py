"""Scaling-exponent fits, membership criteria and the closed-form verdict oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GateViolation


@dataclass
class ScalingFit:
    """Least-squares slope of log2(value) against dyadic level."""

    slope: float
    intercept: float
    stderr: float
    r2: float
    window: tuple
    curvature_flag: bool = False

    def predict(self, level):
        return 2.0 ** (self.intercept + self.slope * level)


def scaling_fit(series, window=None, halfwidths=None) -> ScalingFit:
    """Fit ``log2 v = intercept + slope * level``.

    ``series`` maps level -> value (or (level, value) pairs); values must be
    positive.  Interval half-widths, when given, inflate the reported stderr.
    """
    if isinstance(series, dict):
        items = sorted(series.items())
    else:
        items = sorted(series)
    if window is not None:
        items = [(l, v) for l, v in items if window[0] <= l <= window[1]]
    levels = np.array([l for l, _ in items], float)
    vals = np.array([v for _, v in items], float)
    if len(levels) < 4:
        raise ValueError("scaling_fit needs at least 4 points")
    if np.any(vals <= 0):
        raise ValueError("scaling_fit needs positive values")
    span = vals.max() - vals.min()
    if span < 2 * np.spacing(vals.max()):
        raise ValueError("degenerate series: values span < 2 ulps")
    y = np.log2(vals)
    n = len(levels)
    lx = levels - levels.mean()
    sxx = float(np.dot(lx, lx))
    slope = float(np.dot(lx, y) / sxx)
    intercept = float(y.mean() - slope * levels.mean())
    resid = y - (intercept + slope * levels)
    dof = max(n - 2, 1)
    stderr = math.sqrt(float(np.dot(resid, resid)) / dof / sxx)
    ss_tot = float(np.dot(y - y.mean(), y - y.mean()))
    r2 = 1.0 - float(np.dot(resid, resid)) / ss_tot if ss_tot > 0 else 1.0
    if halfwidths is not None:
        hw = np.asarray([halfwidths.get(l, 0.0) if isinstance(halfwidths, dict)
                         else h for l, h in zip(levels, np.atleast_1d(halfwidths))], float)
        rel = np.where(vals > 0, hw / vals, 0.0)
        stderr = math.sqrt(stderr ** 2 + float(np.mean(np.log2(1 + rel) ** 2)))
    # systematic curvature: the halves disagree beyond noise
    mid = n // 2
    if n >= 6:
        s1 = np.polyfit(levels[:mid], y[:mid], 1)[0]
        s2 = np.polyfit(levels[mid:], y[mid:], 1)[0]
        curvature = abs(s1 - s2) > max(4 * stderr, 0.05)
    else:
        curvature = False
    return ScalingFit(slope, intercept, stderr, r2,
                      (float(levels.min()), float(levels.max())), bool(curvature))
