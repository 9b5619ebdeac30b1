"""Motion analysis of tracked marker dots.

Works in the units of the capture pipeline: millimetres and seconds, with
curvature in 1/mm.  A frame holds the four tracked dots along the actuator;
per-frame circular-arc fits give a curvature time series, which is smoothed
and reduced to a response time and final curvature.

The arc fit minimises the geometric distance sum((|p_i - c| - r)^2), seeded
by the algebraic (linearised) circle fit and refined with a damped
Gauss-Newton iteration.  Collinear points are reported as a degenerate fit
with zero curvature rather than an error.  The curvature sign follows the
orientation of the point sequence: counterclockwise positive.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .backend import jit

COND_TOL = 1e-10  # flatness threshold of the normalised algebraic system
KAPPA_FLOOR = 1e-6  # 1/mm, denominator floor of the settle rule


class ParseError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class NoDeformationError(ValueError):
    """The curvature series never leaves the noise floor."""


class UnsettledError(ValueError):
    """The settle rule is never satisfied within the series."""


@dataclass(frozen=True)
class MarkerFrame:
    t: float  # s
    points: np.ndarray  # (4, 2) in mm

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (4, 2):
            raise ValueError(f"expected 4 (x, y) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("marker coordinates must be finite")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class ArcFit:
    center: tuple[float, float]  # mm
    radius: float  # mm (inf when degenerate)
    curvature: float  # 1/mm, signed, 0 when degenerate
    rms_residual: float  # mm
    degenerate: bool


@dataclass(frozen=True)
class CurvatureSeries:
    sample_rate: float  # Hz
    times: np.ndarray  # s
    values: np.ndarray  # 1/mm, signed

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be matching 1-d arrays")
        if len(t) >= 2:
            dt = np.diff(t)
            if np.any(np.abs(dt - 1.0 / self.sample_rate) > 1e-6 / self.sample_rate):
                raise ValueError("series must be uniformly sampled at sample_rate")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.times)

    @classmethod
    def from_values(cls, values, sample_rate: float, t0: float = 0.0) -> "CurvatureSeries":
        values = np.asarray(values, dtype=float)
        times = t0 + np.arange(len(values)) / sample_rate
        return cls(sample_rate=sample_rate, times=times, values=values)


@dataclass(frozen=True)
class ResponseSummary:
    start_time: float  # s
    response_time: float  # s
    final_curvature: float  # 1/mm


@jit
def _circle_fit_kernel(pts, cond_tol, max_iter):
    """Geometric circle fit; returns (cx, cy, r, rms, degenerate_flag).

    Points are centred and scaled before the algebraic seed so the
    degeneracy test is a pure flatness ratio, independent of units.
    """
    n = pts.shape[0]
    mx = 0.0
    my = 0.0
    for i in range(n):
        mx += pts[i, 0]
        my += pts[i, 1]
    mx /= n
    my /= n
    scale = 0.0
    for i in range(n):
        dx = pts[i, 0] - mx
        dy = pts[i, 1] - my
        scale += dx * dx + dy * dy
    scale = np.sqrt(scale / n)
    if scale == 0.0:
        return 0.0, 0.0, 0.0, 0.0, 2  # all points coincident

    q = np.empty((n, 2))
    for i in range(n):
        q[i, 0] = (pts[i, 0] - mx) / scale
        q[i, 1] = (pts[i, 1] - my) / scale

    a = np.empty((n, 3))
    b = np.empty(n)
    for i in range(n):
        a[i, 0] = q[i, 0]
        a[i, 1] = q[i, 1]
        a[i, 2] = 1.0
        b[i] = -(q[i, 0] * q[i, 0] + q[i, 1] * q[i, 1])
    sol, _res, rank, sv = np.linalg.lstsq(a, b, -1.0)
    if sv[2] <= cond_tol * sv[0]:
        return 0.0, 0.0, 0.0, 0.0, 1  # collinear within tolerance
    cx = -0.5 * sol[0]
    cy = -0.5 * sol[1]
    rr = cx * cx + cy * cy - sol[2]
    if rr <= 0.0:
        return 0.0, 0.0, 0.0, 0.0, 1
    r = np.sqrt(rr)

    # damped Gauss-Newton on (cx, cy, r) in normalised coordinates
    f = np.empty(n)
    jac = np.empty((n, 3))
    sse = 0.0
    for i in range(n):
        dx = q[i, 0] - cx
        dy = q[i, 1] - cy
        d = np.sqrt(dx * dx + dy * dy)
        f[i] = d - r
        sse += f[i] * f[i]
    for _ in range(max_iter):
        for i in range(n):
            dx = q[i, 0] - cx
            dy = q[i, 1] - cy
            d = np.sqrt(dx * dx + dy * dy)
            if d < 1e-30:
                d = 1e-30
            jac[i, 0] = -dx / d
            jac[i, 1] = -dy / d
            jac[i, 2] = -1.0
            f[i] = d - r
        jtj = jac.T @ jac
        jtf = jac.T @ f
        for k in range(3):
            jtj[k, k] += 1e-14  # ridge keeps the 3x3 solve nonsingular
        step = np.linalg.solve(jtj, -jtf)
        t = 1.0
        improved = False
        ncx = cx
        ncy = cy
        nr = r
        nsse = sse
        while t >= 1e-8:
            tcx = cx + t * step[0]
            tcy = cy + t * step[1]
            tr = r + t * step[2]
            tsse = 0.0
            for i in range(n):
                dx = q[i, 0] - tcx
                dy = q[i, 1] - tcy
                d = np.sqrt(dx * dx + dy * dy)
                e = d - tr
                tsse += e * e
            if tsse <= sse:
                ncx = tcx
                ncy = tcy
                nr = tr
                nsse = tsse
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        moved = abs(ncx - cx) + abs(ncy - cy) + abs(nr - r)
        cx = ncx
        cy = ncy
        r = nr
        sse = nsse
        if moved < 1e-14 * (1.0 + abs(r)):
            break

    rms = np.sqrt(sse / n) * scale
    return cx * scale + mx, cy * scale + my, r * scale, rms, 0


def _orientation(pts) -> float:
    """Signed turning of the polyline; positive is counterclockwise."""
    total = 0.0
    for i in range(len(pts) - 2):
        ax, ay = pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1]
        bx, by = pts[i + 2][0] - pts[i + 1][0], pts[i + 2][1] - pts[i + 1][1]
        total += ax * by - ay * bx
    return total


def fit_arc(points, cond_tol: float = COND_TOL, max_iter: int = 100) -> ArcFit:
    """Least-squares circular arc through tracked points (mm in, 1/mm out)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least 3 (x, y) points")
    if not np.all(np.isfinite(pts)):
        raise ValueError("marker coordinates must be finite")
    cx, cy, r, rms, flag = _circle_fit_kernel(pts, cond_tol, max_iter)
    if flag == 2:
        raise ValueError("points are all coincident")
    if flag == 1:
        return ArcFit(center=(math.nan, math.nan), radius=math.inf,
                      curvature=0.0, rms_residual=0.0, degenerate=True)
    sign = 1.0 if _orientation(pts) >= 0.0 else -1.0
    return ArcFit(center=(cx, cy), radius=r, curvature=sign / r,
                  rms_residual=rms, degenerate=False)


def smooth(series: CurvatureSeries, window: int) -> CurvatureSeries:
    """Centred moving average over `window` frames, length preserving.

    Endpoints average over the samples that exist.  Even windows are applied
    as given (one extra sample on the past side), so a 20-frame window
    divides by exactly 20 in the interior.
    """
    if len(series) == 0:
        raise ValueError("cannot smooth an empty series")
    w = int(window)
    if w < 1:
        raise ValueError("window must be at least 1 frame")
    v = series.values
    n = len(v)
    left = w // 2
    right = w - 1 - left
    c = np.concatenate(([0.0], np.cumsum(v)))
    idx = np.arange(n)
    lo = np.maximum(0, idx - left)
    hi = np.minimum(n, idx + right + 1)
    out = (c[hi] - c[lo]) / (hi - lo)
    return CurvatureSeries(sample_rate=series.sample_rate, times=series.times,
                           values=out)


def extract_response(series: CurvatureSeries, rate_threshold: float = 0.05,
                     window: float = 0.4, start_fraction: float = 0.02,
                     kappa_floor: float = KAPPA_FLOOR) -> ResponseSummary:
    """Settle-rule reduction of a curvature series.

    Deformation starts when |kappa| first exceeds start_fraction of the
    series peak; it ends at the earliest time, at least one window later,
    where the relative change over the trailing window drops below
    rate_threshold.  The denominator is floored at kappa_floor.
    """
    v = series.values
    t = series.times
    n = len(v)
    w = int(round(window * series.sample_rate))
    if w < 1:
        raise ValueError("window shorter than one sample period")
    if n <= w:
        raise ValueError("series shorter than the rolling window")
    peak = float(np.max(np.abs(v))) if n else 0.0
    if peak <= 0.0:
        raise NoDeformationError("series shows no deformation")
    thresh = start_fraction * peak
    above = np.nonzero(np.abs(v) > thresh)[0]
    if len(above) == 0:
        raise NoDeformationError("series never exceeds the onset threshold")
    i0 = int(above[0])
    for i in range(i0 + w, n):
        denom = max(abs(v[i]), kappa_floor)
        if abs(v[i] - v[i - w]) / denom < rate_threshold:
            return ResponseSummary(start_time=float(t[i0]),
                                   response_time=float(t[i] - t[i0]),
                                   final_curvature=float(v[i]))
    raise UnsettledError("deformation does not settle within the series")


def synthesize_markers(curvature: float, arc_length: float, n_points: int = 4) -> np.ndarray:
    """Equally spaced points (mm) along an arc from the origin, tangent +x.

    Takes SI inputs (1/m, m); positive curvature bends counterclockwise.
    Zero curvature yields collinear points on the x axis.
    """
    if arc_length <= 0.0:
        raise ValueError("arc_length must be positive")
    if n_points < 2:
        raise ValueError("need at least 2 points")
    s = np.linspace(0.0, arc_length, n_points)
    if curvature == 0.0:
        pts = np.column_stack([s, np.zeros_like(s)])
    else:
        theta = curvature * s
        pts = np.column_stack([np.sin(theta) / curvature,
                               (1.0 - np.cos(theta)) / curvature])
    return pts * 1000.0


def track_from_response(times, kappas_per_m, arc_length: float) -> list[MarkerFrame]:
    """Turn a simulated curvature history into synthetic marker frames."""
    return [MarkerFrame(t=float(t), points=synthesize_markers(float(k), arc_length))
            for t, k in zip(times, kappas_per_m)]


def curvature_series_from_frames(frames, cond_tol: float = COND_TOL) -> CurvatureSeries:
    """Per-frame arc fits; infers the sample rate from the frame times."""
    if len(frames) < 2:
        raise ValueError("need at least two frames")
    times = np.array([f.t for f in frames])
    dt = np.diff(times)
    if np.any(dt <= 0.0):
        raise ValueError("frame times must be strictly increasing")
    rate = 1.0 / float(np.median(dt))
    values = np.array([fit_arc(f.points, cond_tol=cond_tol).curvature for f in frames])
    return CurvatureSeries(sample_rate=rate, times=times, values=values)


MARKER_HEADER = ["t", "x1", "y1", "x2", "y2", "x3", "y3", "x4", "y4"]


def read_marker_csv(path) -> list[MarkerFrame]:
    frames = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if [h.strip() for h in header] != MARKER_HEADER:
            raise ParseError(f"expected header {','.join(MARKER_HEADER)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 9:
                raise ParseError(f"expected 9 fields, got {len(row)}", line=lineno)
            try:
                vals = [float(x) for x in row]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            frames.append(MarkerFrame(t=vals[0], points=np.array(vals[1:]).reshape(4, 2)))
    if not frames:
        raise ParseError("no data rows", line=2)
    return frames


def write_marker_csv(path, frames):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MARKER_HEADER)
        for f in frames:
            writer.writerow([repr(float(f.t))] + [repr(float(x)) for x in f.points.ravel()])
