"""Discrete L-curve: lambda grids, the trimming window and corner detection.

Lambda indices in the window formulas are 1-based, so that index ``i`` of an
ascending grid of ``m`` values runs from 1 to ``m``.  Python code converts with
``i - 1`` at the boundary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LCurvePoint",
    "LCurveData",
    "TrimWindow",
    "WINDOW_WIDTH",
    "make_lambda_grid",
    "trim_window",
    "menger_curvature",
    "find_corner",
    "write_lcurve_csv",
]

WINDOW_WIDTH = 10


@dataclass(frozen=True)
class LCurvePoint:
    lam: float
    resid_norm: float
    constraint_norm: float
    grid_index: int | None = None  # 1-based index into the global grid
    solution: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def log_resid(self):
        return float(np.log10(self.resid_norm))

    @property
    def log_constraint(self):
        return float(np.log10(self.constraint_norm))


@dataclass
class LCurveData:
    """Points of one L-curve, ordered by increasing lambda."""

    points: list
    corner_index: int | None = None

    def __post_init__(self):
        lams = np.array([p.lam for p in self.points])
        if np.any(np.diff(lams) <= 0):
            raise ValueError("L-curve points must have strictly increasing lambda")
        for p in self.points:
            if not (p.resid_norm > 0 and p.constraint_norm > 0):
                raise ValueError(f"L-curve point at lambda={p.lam:g} has a zero norm; log is undefined")

    @classmethod
    def from_arrays(cls, lams, resid, constraint, grid_indices=None, solutions=None):
        """Build from parallel arrays in any lambda order."""
        order = np.argsort(lams)
        pts = [
            LCurvePoint(
                float(lams[i]),
                float(resid[i]),
                float(constraint[i]),
                None if grid_indices is None else int(grid_indices[i]),
                None if solutions is None else solutions[i],
            )
            for i in order
        ]
        return cls(pts)

    @property
    def lambdas(self):
        return np.array([p.lam for p in self.points])

    @property
    def log_coords(self):
        """``(len(points), 2)`` array of ``(log10 ||Ax-b||, log10 ||Mx||)``."""
        return np.array([[p.log_resid, p.log_constraint] for p in self.points])

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class TrimWindow:
    lo_index: int
    hi_index: int

    def __post_init__(self):
        if self.hi_index - self.lo_index + 1 != WINDOW_WIDTH:
            raise ValueError("trim window must span exactly 10 indices")

    def indices(self):
        """1-based indices in the window, ascending."""
        return range(self.lo_index, self.hi_index + 1)


def make_lambda_grid(hi_exp: float, lo_exp: float, count: int) -> np.ndarray:
    """``count`` log-spaced values between ``10**lo_exp`` and ``10**hi_exp``, ascending."""
    if count < 2:
        raise ValueError("lambda grid needs at least two values")
    if hi_exp == lo_exp:
        raise ValueError("degenerate lambda range")
    lo, hi = sorted((lo_exp, hi_exp))
    return np.logspace(lo, hi, count)


def trim_window(i_prev: int, m: int) -> TrimWindow:
    """Ten consecutive indices from ``i_prev - 2`` to ``i_prev + 7``, shifted to fit in ``1..m``."""
    if m < WINDOW_WIDTH:
        raise ValueError(f"trimming needs at least {WINDOW_WIDTH} lambda values, got {m}")
    if not 1 <= i_prev <= m:
        raise ValueError(f"previous index {i_prev} outside 1..{m}")
    lo = max(min(i_prev - 2, m - WINDOW_WIDTH + 1), 1)
    return TrimWindow(lo, lo + WINDOW_WIDTH - 1)


def menger_curvature(p1, p2, p3) -> float:
    """Signed curvature of the circle through three points; counterclockwise turns are positive."""
    a = np.subtract(p2, p1)
    b = np.subtract(p3, p2)
    c = np.subtract(p3, p1)
    denom = np.linalg.norm(a) * np.linalg.norm(b) * np.linalg.norm(c)
    if denom == 0.0:
        return 0.0
    cross = a[0] * b[1] - a[1] * b[0]
    return float(2.0 * cross / denom)


def find_corner(data: LCurveData) -> int:
    """Index (into ``data.points``) of the L-curve corner.

    With points ordered by increasing lambda the curve runs from the top-left
    leg (small residual, large constraint) to the bottom-right leg, so the
    corner is a counterclockwise turn and has positive curvature.  The
    interior point of largest positive Menger curvature wins.  If no point
    turns the right way the point nearest the lower-left corner of the
    min-max normalized bounding box is returned instead.
    """
    if len(data) < 3:
        raise ValueError("corner detection needs at least three points")
    xy = data.log_coords
    if not np.all(np.isfinite(xy)):
        raise ValueError("L-curve coordinates must be finite")

    # merge repeated consecutive points, remembering the first original index
    keep = [0]
    for i in range(1, len(xy)):
        if not np.array_equal(xy[i], xy[keep[-1]]):
            keep.append(i)
    pts = xy[keep]

    best, best_kappa = None, 0.0
    for j in range(1, len(pts) - 1):
        kappa = menger_curvature(pts[j - 1], pts[j], pts[j + 1])
        if kappa > best_kappa:
            best, best_kappa = j, kappa
    if best is not None:
        data.corner_index = keep[best]
        return data.corner_index

    span = xy.max(axis=0) - xy.min(axis=0)
    span[span == 0] = 1.0
    scaled = (xy - xy.min(axis=0)) / span
    data.corner_index = int(np.argmin(np.hypot(scaled[:, 0], scaled[:, 1])))
    return data.corner_index


def write_lcurve_csv(path, data: LCurveData) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "resid_norm", "constraint_norm"])
        for p in data.points:
            w.writerow([repr(p.lam), repr(p.resid_norm), repr(p.constraint_norm)])
