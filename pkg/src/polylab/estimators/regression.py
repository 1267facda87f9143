"""Ordinary least squares on log-log data, with vectorized bootstrap refits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    slope_se: float
    r2: float
    window: tuple[int, int]

    def predict(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)


def ols(x, y, window: tuple[int, int] | None = None) -> RegressionFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    start, stop = window if window is not None else (0, len(x))
    xs, ys = x[start:stop], y[start:stop]
    n = len(xs)
    if n < 2:
        raise ValueError("need at least two points")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ValueError("non-finite values in fit window")
    xm, ym = xs.mean(), ys.mean()
    sxx = float(np.sum((xs - xm) ** 2))
    if sxx == 0:
        raise ValueError("degenerate abscissae")
    slope = float(np.sum((xs - xm) * (ys - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = ys - (intercept + slope * xs)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((ys - ym) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    se = float(np.sqrt(ss_res / (n - 2) / sxx)) if n > 2 else float("nan")
    return RegressionFit(slope, intercept, se, r2, (int(start), int(stop)))


def slopes(x, ys) -> np.ndarray:
    """OLS slopes of each row of ``ys`` (B, n) against ``x`` (n,)."""
    x = np.asarray(x, dtype=float)
    ys = np.asarray(ys, dtype=float)
    xc = x - x.mean()
    return (ys - ys.mean(axis=1, keepdims=True)) @ xc / np.sum(xc * xc)


def percentile_interval(samples, level: float = 0.95) -> tuple[float, float]:
    samples = np.asarray(samples, dtype=float)
    samples = samples[np.isfinite(samples)]
    if samples.size == 0:
        return (float("nan"), float("nan"))
    a = (1 - level) / 2
    lo, hi = np.quantile(samples, [a, 1 - a])
    return float(lo), float(hi)
