"""Log-log slope fits and the pass/fail record built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientData

SLOPE_SLACK = 0.25
MIN_FIT_POINTS = 4


def asymptotic_window(n: int, min_points: int = MIN_FIT_POINTS) -> list:
    """Indices of the upper half of a ladder of length n (at least ``min_points``)."""
    k = max(min_points, math.ceil(n / 2))
    return list(range(max(0, n - k), n))


def fit_loglog(points: Sequence[tuple], window: Optional[Sequence[int]] = None):
    """Ordinary least squares of log E on log w.

    Returns ``(slope, intercept, r_squared)``.  Needs at least four points with
    E > 0 inside the window.
    """
    pts = list(points)
    if window is not None:
        pts = [pts[i] for i in window]
    w = np.array([p[0] for p in pts], dtype=float)
    e = np.array([p[1] for p in pts], dtype=float)
    keep = np.isfinite(e) & (e > 0) & (w > 0)
    if keep.sum() < MIN_FIT_POINTS:
        raise InsufficientData(f"need {MIN_FIT_POINTS} positive values, got {int(keep.sum())}")
    x, y = np.log(w[keep]), np.log(e[keep])
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - intercept - slope * x) ** 2))
    # constant data is fitted exactly by slope 0
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float(np.sum(y ** 2))) else max(0.0, 1.0 - ss_res / ss_tot)
    return slope, intercept, min(r2, 1.0)


@dataclass
class RateReport:
    slope: float
    intercept: float
    r_squared: float
    target_alpha: float
    passed: bool
    window: list
    superpolynomial: bool = False
    note: str = ""
    w: list = field(default_factory=list)
    values: list = field(default_factory=list)
    lam: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared,
            "target_alpha": self.target_alpha, "pass": self.passed, "window": self.window,
            "superpolynomial": self.superpolynomial, "note": self.note,
            "w": self.w, "values": self.values, "lambda": self.lam,
        }


def decay_report(ws: Sequence[float], values: Sequence[float], alpha: float,
                 slack: float = SLOPE_SLACK, allow_underflow: bool = True) -> RateReport:
    """Check values(w) = O(w^-alpha) on the asymptotic window of the ladder.

    Values that underflow to exactly zero inside the window count as faster
    than any power, since O(.) is only an upper bound.
    """
    ws = [float(w) for w in ws]
    values = [float(v) for v in values]
    if len(ws) < MIN_FIT_POINTS or not all(math.isfinite(v) for v in values):
        raise InsufficientData("need at least four finite values")
    window = asymptotic_window(len(ws))
    tail = [values[i] for i in window]
    if allow_underflow and any(v == 0.0 for v in tail):
        return RateReport(-math.inf, 0.0, 0.0, alpha, True, window, True,
                          "underflow inside window: super-polynomial decay", ws, values)
    if all(v == 0.0 for v in tail):
        return RateReport(-math.inf, 0.0, 0.0, alpha, True, window, True,
                          "identically zero", ws, values)
    slope, intercept, r2 = fit_loglog(list(zip(ws, values)), window)
    return RateReport(slope, intercept, r2, alpha, slope <= -alpha + slack, window,
                      w=ws, values=values)


def decreasing_until_underflow(values: Sequence[float]) -> bool:
    """Strictly decreasing, except that an exact zero may only be followed by zero."""
    for a, b in zip(values, values[1:]):
        if not (b < a or (a == 0.0 and b == 0.0)):
            return False
    return True
