"""Planar geometric primitives.

Curves are closed (or, for extracted contours, possibly open) polylines in the
plane stored as ``(n, 2)`` float arrays.  Everything here is a pure function of
its inputs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from .errors import DomainError, EmptyIntersectionError

__all__ = [
    "Curve",
    "Line",
    "FlatnessReport",
    "hausdorff_distance",
    "local_hausdorff",
    "flatness_deviation",
    "reifenberg_certificate",
    "discrete_curvature",
    "sup_curvature",
    "curvatures",
    "interpolation_gradient_bound",
    "curvature_continuation_bound",
    "read_curve",
    "write_curve",
    "resample_uniform",
]


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


class Curve:
    """A planar polyline, closed by default.

    Closed curves are reoriented counterclockwise on construction so that the
    outward normal of an edge ``(dx, dy)`` is ``(dy, -dx)``.

    Parameters
    ----------
    vertices : array_like, shape (n, 2)
        Vertex coordinates, without repeating the first vertex at the end.
    closed : bool
        Whether the last vertex connects back to the first.
    """

    __slots__ = ("vertices", "closed", "_diameter")

    def __init__(self, vertices, closed: bool = True):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise DomainError("vertices must have shape (n, 2)")
        if closed and len(v) > 1 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if len(v) < (3 if closed else 2):
            raise DomainError(f"a curve needs at least 3 vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise DomainError("vertices must be finite")
        steps = np.roll(v, -1, axis=0) - v if closed else np.diff(v, axis=0)
        if np.any(np.all(steps == 0.0, axis=1)):
            raise DomainError("consecutive vertices must be distinct")
        if closed and _shoelace(v) < 0.0:
            v = v[::-1].copy()
        v.setflags(write=False)
        self.vertices = v
        self.closed = bool(closed)
        self._diameter = None

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        kind = "closed" if self.closed else "open"
        return f"Curve({len(self)} vertices, {kind})"

    @property
    def n_segments(self) -> int:
        return len(self.vertices) if self.closed else len(self.vertices) - 1

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end points of every segment, each of shape (m, 2)."""
        v = self.vertices
        if self.closed:
            return v, np.roll(v, -1, axis=0)
        return v[:-1], v[1:]

    def segment_lengths(self) -> np.ndarray:
        a, b = self.segments()
        return np.hypot(*(b - a).T)

    def perimeter(self) -> float:
        return float(self.segment_lengths().sum())

    def signed_area(self) -> float:
        return _shoelace(self.vertices)

    def area(self) -> float:
        return abs(self.signed_area())

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def diameter(self) -> float:
        if self._diameter is None:
            v = self.vertices
            if len(v) > 64:
                try:
                    v = v[ConvexHull(v).vertices]
                except Exception:  # degenerate (collinear) input
                    pass
            d = v[:, None, :] - v[None, :, :]
            self._diameter = float(np.sqrt((d**2).sum(-1)).max())
        return self._diameter

    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def is_simple(self) -> bool:
        """True when no two non-adjacent segments intersect."""
        import shapely

        geom = shapely.LinearRing(self.vertices) if self.closed else shapely.LineString(self.vertices)
        return bool(geom.is_simple)

    def densified(self, spacing: float) -> np.ndarray:
        """Vertices with extra points inserted so no gap exceeds ``spacing``.

        Original vertices are kept, so the underlying point set is unchanged.
        """
        a, b = self.segments()
        lengths = np.hypot(*(b - a).T)
        counts = np.maximum(1, np.ceil(lengths / spacing).astype(int))
        seg_idx = np.repeat(np.arange(len(a)), counts)
        starts = np.cumsum(counts) - counts
        frac = (np.arange(counts.sum()) - np.repeat(starts, counts)) / np.repeat(counts, counts)
        pts = a[seg_idx] + frac[:, None] * (b - a)[seg_idx]
        if not self.closed:
            pts = np.vstack([pts, self.vertices[-1:]])
        return pts

    def transformed(self, rotation: float = 0.0, shift=(0.0, 0.0), scale: float = 1.0) -> "Curve":
        c, s = math.cos(rotation), math.sin(rotation)
        m = np.array([[c, -s], [s, c]])
        return Curve(scale * self.vertices @ m.T + np.asarray(shift, float), closed=self.closed)


@dataclass(frozen=True)
class Line:
    """An infinite line through ``point`` with unit ``direction``."""

    point: tuple[float, float]
    direction: tuple[float, float]

    def __post_init__(self):
        d = np.asarray(self.direction, float)
        n = float(np.hypot(*d))
        if n == 0.0:
            raise DomainError("line direction must be non-zero")
        object.__setattr__(self, "direction", (float(d[0] / n), float(d[1] / n)))
        object.__setattr__(self, "point", (float(self.point[0]), float(self.point[1])))

    @classmethod
    def from_angle(cls, angle: float, offset: float = 0.0, center=(0.0, 0.0)) -> "Line":
        """Line at ``angle`` whose signed distance from ``center`` is ``offset``."""
        u = (math.cos(angle), math.sin(angle))
        p = (center[0] - offset * u[1], center[1] + offset * u[0])
        return cls(p, u)


@dataclass
class FlatnessReport:
    """Per-scale worst flatness deviation over sampled centers.

    ``per_point`` rows, when kept, are ``(center_x, center_y, scale,
    deviation, deviation_through_center)``.
    """

    scales: list[float]
    deviations: list[float]
    per_point: np.ndarray | None = None
    skipped: list[tuple[float, str]] = field(default_factory=list)

    def __post_init__(self):
        if len(self.scales) != len(self.deviations):
            raise DomainError("scales and deviations must have equal length")

    @property
    def max_deviation(self) -> float:
        return max(self.deviations) if self.deviations else float("nan")

    @property
    def max_scale(self) -> float:
        return max(self.scales) if self.scales else float("nan")

    def to_csv(self) -> str:
        lines = ["scale,deviation"]
        lines += [f"{s:.9g},{d:.9g}" for s, d in zip(self.scales, self.deviations)]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# segment soups and distances


def _as_soup(obj, center=None, radius=None) -> tuple[np.ndarray, np.ndarray]:
    """Segments ``(a, b)`` representing a Curve, Line or point set.

    Points become degenerate segments.  A Line needs a ball to be turned into a
    finite chord.
    """
    if isinstance(obj, Curve):
        return obj.segments()
    if isinstance(obj, Line):
        if center is None:
            raise DomainError("a Line can only be measured inside a ball")
        p = np.asarray(obj.point)
        u = np.asarray(obj.direction)
        reach = float(np.hypot(*(p - np.asarray(center, float)))) + 2.0 * radius
        return (p - reach * u)[None, :], (p + reach * u)[None, :]
    pts = np.atleast_2d(np.asarray(obj, dtype=float))
    if pts.size == 0:
        raise DomainError("empty point set")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("point sets must have shape (n, 2)")
    return pts, pts


def _point_segment_distance(p, a, b):
    """Distances from points ``p`` to segments ``a``-``b`` (broadcasting)."""
    ab = b - a
    ap = p - a
    denom = (ab * ab).sum(-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(denom > 0, (ap * ab).sum(-1) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    d = ap - t[..., None] * ab
    return np.sqrt((d * d).sum(-1))


def points_to_segments(points: np.ndarray, a: np.ndarray, b: np.ndarray, chunk: int = 2_000_000) -> np.ndarray:
    """Exact distance from each point to the union of segments (brute force)."""
    points = np.asarray(points, float)
    out = np.empty(len(points))
    step = max(1, chunk // max(1, len(a)))
    for i in range(0, len(points), step):
        p = points[i : i + step, None, :]
        out[i : i + step] = _point_segment_distance(p, a[None], b[None]).min(axis=1)
    return out


def _points_to_polyline(points: np.ndarray, verts: np.ndarray, closed: bool, k: int = 8) -> np.ndarray:
    """Distance from points to a densely sampled polyline.

    Only the segments adjacent to the ``k`` nearest vertices are examined.
    The polyline should be densified beforehand so that this is exact up to
    rounding.
    """
    n = len(verts)
    if n * len(points) <= 400_000:
        if closed:
            a, b = verts, np.roll(verts, -1, axis=0)
        else:
            a, b = (verts[:-1], verts[1:]) if n > 1 else (verts, verts)
        return points_to_segments(points, a, b)
    k = min(k, n)
    _, idx = cKDTree(verts).query(points, k=k)
    idx = np.atleast_2d(idx).reshape(len(points), k)
    best = np.full(len(points), np.inf)
    for shift in (0, -1):
        s = idx + shift
        if closed:
            s %= n
            e = (s + 1) % n
        else:
            s = np.clip(s, 0, max(n - 2, 0))
            e = np.minimum(s + 1, n - 1)
        d = _point_segment_distance(points[:, None, :], verts[s], verts[e]).min(axis=1)
        best = np.minimum(best, d)
    return best


def _samples(obj, spacing) -> np.ndarray:
    if isinstance(obj, Curve):
        return obj.densified(spacing)
    if isinstance(obj, (list, tuple)) and obj and all(isinstance(c, Curve) for c in obj):
        return np.vstack([c.densified(spacing) for c in obj])
    pts = np.atleast_2d(np.asarray(obj, dtype=float))
    if pts.size == 0:
        raise DomainError("hausdorff_distance needs non-empty inputs")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("point sets must have shape (n, 2)")
    return pts


def _distance_to(obj, points, spacing) -> np.ndarray:
    if isinstance(obj, Curve):
        return _points_to_polyline(points, obj.densified(spacing), obj.closed)
    if isinstance(obj, (list, tuple)) and obj and all(isinstance(c, Curve) for c in obj):
        return np.min([_distance_to(c, points, spacing) for c in obj], axis=0)
    d, _ = cKDTree(_samples(obj, spacing)).query(points)
    return d


def _extent(obj) -> float:
    if isinstance(obj, Curve):
        return obj.diameter()
    pts = _samples(obj, np.inf)
    if len(pts) < 2:
        return 0.0
    return float(np.hypot(*(pts.max(0) - pts.min(0))))


def hausdorff_distance(a, b, spacing: float | None = None) -> float:
    """Symmetric Hausdorff distance between curves and/or point sets.

    Curves (or lists of curves) are densified to ``spacing`` (default: the
    larger diameter / 1024) and distances are measured from sample points to
    the other side's segments.  Plain ``(n, 2)`` arrays are finite point sets.
    """
    if spacing is None:
        ext = max(_extent(a), _extent(b))
        spacing = ext / 1024 if ext > 0 else 1.0
    pa = _samples(a, spacing)
    pb = _samples(b, spacing)
    d_ab = _distance_to(b, pa, spacing).max()
    d_ba = _distance_to(a, pb, spacing).max()
    return float(max(d_ab, d_ba))


def clip_to_ball(a: np.ndarray, b: np.ndarray, center, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Clip segments to the closed ball, splitting at the circle exactly."""
    c = np.asarray(center, float)
    p = a - c
    d = b - a
    A = (d * d).sum(-1)
    B = 2.0 * (p * d).sum(-1)
    C = (p * p).sum(-1) - radius * radius
    degenerate = A == 0.0
    disc = B * B - 4.0 * A * C
    with np.errstate(invalid="ignore", divide="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0 = (-B - sq) / (2.0 * A)
        t1 = (-B + sq) / (2.0 * A)
    lo = np.clip(t0, 0.0, 1.0)
    hi = np.clip(t1, 0.0, 1.0)
    keep = (~degenerate) & (disc >= 0.0) & (hi >= lo) & (t1 >= 0.0) & (t0 <= 1.0)
    pts_keep = degenerate & (C <= 0.0)
    ca = np.vstack([a[keep] + lo[keep, None] * d[keep], a[pts_keep]])
    cb = np.vstack([a[keep] + hi[keep, None] * d[keep], a[pts_keep]])
    return ca, cb


def _soup_samples(a, b, spacing):
    lengths = np.hypot(*(b - a).T)
    counts = np.maximum(1, np.ceil(lengths / spacing).astype(int))
    total = counts + 1
    seg_idx = np.repeat(np.arange(len(a)), total)
    starts = np.cumsum(total) - total
    frac = (np.arange(total.sum()) - np.repeat(starts, total)) / np.repeat(counts, total)
    return a[seg_idx] + frac[:, None] * (b - a)[seg_idx]


def local_hausdorff(a, b, center, radius: float, spacing: float | None = None) -> float:
    """Hausdorff distance between ``a`` and ``b`` after clipping both to a ball.

    Raises
    ------
    EmptyIntersectionError
        If either clipped set is empty; the distance is then undefined.
    """
    if radius <= 0:
        raise DomainError("radius must be positive")
    sa = clip_to_ball(*_as_soup(a, center, radius), center, radius)
    sb = clip_to_ball(*_as_soup(b, center, radius), center, radius)
    if len(sa[0]) == 0 or len(sb[0]) == 0:
        raise EmptyIntersectionError("empty-intersection: a clipped set is empty")
    spacing = radius / 512 if spacing is None else spacing
    pa = _soup_samples(*sa, spacing)
    pb = _soup_samples(*sb, spacing)
    d_ab = points_to_segments(pa, *sb).max()
    d_ba = points_to_segments(pb, *sa).max()
    return float(max(d_ab, d_ba))


# ---------------------------------------------------------------------------
# flatness search


@numba.njit(cache=True, nogil=True)
def _line_cost(ax, ay, bx, by, theta, c, n_samples):
    # Segments are in coordinates centered at the ball center, scaled to radius 1.
    ux = math.cos(theta)
    uy = math.sin(theta)
    nx = -uy
    ny = ux
    half = math.sqrt(max(0.0, 1.0 - c * c))
    px = c * nx
    py = c * ny
    e1x = px - half * ux
    e1y = py - half * uy
    L2 = 4.0 * half * half
    m = ax.shape[0]
    worst = 0.0
    # set -> chord: distance to a segment is convex, so endpoints suffice
    for k in range(2 * m):
        if k < m:
            qx = ax[k]
            qy = ay[k]
        else:
            qx = bx[k - m]
            qy = by[k - m]
        dx = qx - e1x
        dy = qy - e1y
        t = 0.0
        if L2 > 0.0:
            t = (dx * ux + dy * uy) / (2.0 * half)
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
        rx = dx - t * 2.0 * half * ux
        ry = dy - t * 2.0 * half * uy
        d = math.sqrt(rx * rx + ry * ry)
        if d > worst:
            worst = d
    # chord -> set: sampled along the chord
    ns = n_samples if half > 0.0 else 1
    last = 0
    nearest = 0
    for s in range(ns):
        f = 0.0 if ns == 1 else s / (ns - 1.0)
        sx = e1x + f * 2.0 * half * ux
        sy = e1y + f * 2.0 * half * uy
        best = 1e300
        # start from the previous sample's nearest segment so the early exit
        # usually triggers after a single test
        for jj in range(m):
            j = jj + last
            if j >= m:
                j -= m
            vx = bx[j] - ax[j]
            vy = by[j] - ay[j]
            wx = sx - ax[j]
            wy = sy - ay[j]
            vv = vx * vx + vy * vy
            t = 0.0
            if vv > 0.0:
                t = (wx * vx + wy * vy) / vv
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            rx = wx - t * vx
            ry = wy - t * vy
            d2 = rx * rx + ry * ry
            if d2 < best:
                best = d2
                nearest = j
                if d2 <= worst * worst:
                    break
        last = nearest
        d = math.sqrt(best)
        if d > worst:
            worst = d
    return worst


@numba.njit(cache=True, nogil=True)
def _line_costs(ax, ay, bx, by, thetas, offsets, n_samples):
    out = np.empty(thetas.shape[0])
    for i in range(thetas.shape[0]):
        out[i] = _line_cost(ax, ay, bx, by, thetas[i], offsets[i], n_samples)
    return out


_N_ANGLES = 64
_N_OFFSETS = 64
_REFINE_ROUNDS = 3
_REFINE_POINTS = 9
# coarse-stage simplification tolerance, relative to the ball radius
_COARSE_TOLERANCE = 0.005


def _normalized_soup(x: Curve, center, radius):
    a, b = clip_to_ball(*x.segments(), center, radius)
    if len(a) == 0:
        raise EmptyIntersectionError("empty-intersection: curve misses the ball")
    c = np.asarray(center, float)
    a = (a - c) / radius
    b = (b - c) / radius
    return (np.ascontiguousarray(a[:, 0]), np.ascontiguousarray(a[:, 1]),
            np.ascontiguousarray(b[:, 0]), np.ascontiguousarray(b[:, 1]))


def _principal_angle(soup) -> float:
    """Direction of the segments' second moment; anchors the angle grid so the search is rotation-equivariant."""
    ax, ay, bx, by = soup
    w = np.hypot(bx - ax, by - ay)
    if not w.sum() > 0:
        return 0.0
    mx = np.dot(w, ax + bx) / (2 * w.sum())
    my = np.dot(w, ay + by) / (2 * w.sum())
    # exact second moments of uniform mass on each segment
    pax, pay, pbx, pby = ax - mx, ay - my, bx - mx, by - my
    sxx = np.dot(w, pax * pax + pax * pbx + pbx * pbx) / 3
    syy = np.dot(w, pay * pay + pay * pby + pby * pby) / 3
    sxy = np.dot(w, 2 * pax * pay + pax * pby + pbx * pay + 2 * pbx * pby) / 6
    return 0.5 * math.atan2(2 * sxy, sxx - syy)


def _search(soup, thetas, offsets, fix_offset: bool, coarse_soup=None):
    costs = _line_costs(*(coarse_soup or soup), thetas, offsets, 33)
    i = int(np.argmin(costs))
    th, c = thetas[i], offsets[i]
    d_th = math.pi / _N_ANGLES
    d_c = 2.0 / (_N_OFFSETS - 1)
    for _ in range(_REFINE_ROUNDS):
        g = np.linspace(-1.0, 1.0, _REFINE_POINTS)
        if fix_offset:
            tt = th + d_th * g
            cc = np.zeros_like(tt)
        else:
            tt, cc = np.meshgrid(th + d_th * g, np.clip(c + d_c * g, -1.0, 1.0), indexing="ij")
            tt, cc = tt.ravel(), cc.ravel()
        costs = _line_costs(*soup, tt, cc, 257)
        i = int(np.argmin(costs))
        th, c = tt[i], cc[i]
        d_th /= 4.0
        d_c /= 4.0
    value = _line_costs(*soup, np.array([th]), np.array([c]), 1025)[0]
    return float(value), float(th), float(c)


def flatness_deviation(x: Curve, center, radius: float, through_center: bool = False) -> float:
    """Best-line deviation of ``x`` inside ``B(center, radius)``, divided by radius.

    The infimum over lines is found by a 64 x 64 grid over (angle, offset)
    followed by three rounds of local refinement.  With ``through_center`` the
    line is constrained to pass through ``center``.
    """
    return _flatness(x, center, radius, through_center)[0]


def _simplified(x: Curve, tolerance: float) -> Curve:
    import shapely

    if not x.closed:
        line = shapely.LineString(x.vertices).simplify(tolerance, preserve_topology=False)
        return Curve(np.asarray(line.coords), closed=False)
    ring = shapely.LinearRing(x.vertices).simplify(tolerance, preserve_topology=False)
    v = np.asarray(ring.coords)[:-1]
    return Curve(v) if len(v) >= 3 else x


def _flatness(x, center, radius, through_center=False, coarse=None):
    """Returns (deviation, angle, offset).

    ``coarse`` is an optional simplified copy of ``x`` used only for the
    initial grid stage; refinement and the final value use ``x`` itself.
    """
    if radius <= 0:
        raise DomainError("radius must be positive")
    soup = _normalized_soup(x, center, radius)
    if coarse is None:
        coarse = _simplified(x, _COARSE_TOLERANCE * radius)
    try:
        coarse_soup = _normalized_soup(coarse, center, radius)
    except EmptyIntersectionError:
        coarse_soup = None
    th = _principal_angle(soup) + np.arange(_N_ANGLES) * (math.pi / _N_ANGLES)
    if through_center:
        return _search(soup, th, np.zeros_like(th), True, coarse_soup)
    off = np.append(np.linspace(-1.0, 1.0, _N_OFFSETS), 0.0)
    tt, cc = np.meshgrid(th, off, indexing="ij")
    return _search(soup, tt.ravel(), cc.ravel(), False, coarse_soup)


def reifenberg_certificate(
    x: Curve,
    scales: Sequence[float],
    sample_stride: int = 1,
    keep_points: bool = False,
) -> FlatnessReport:
    """Worst flatness deviation per scale over every ``sample_stride``-th vertex.

    Scales larger than the curve diameter are skipped with a warning.  On an
    open curve only centers at least ``r`` from both endpoints are used, since
    a ball around an endpoint sees a half-line, not a line.
    """
    scales = [float(s) for s in scales]
    if any(s <= 0 for s in scales) or scales != sorted(scales):
        raise DomainError("scales must be positive and sorted ascending")
    if sample_stride < 1:
        raise DomainError("sample_stride must be >= 1")
    diam = x.diameter()
    centers = x.vertices[::sample_stride]
    kept, devs, rows, skipped = [], [], [], []
    for r in scales:
        coarse = _simplified(x, _COARSE_TOLERANCE * r)
        if r > diam:
            msg = f"scale {r:.6g} exceeds curve diameter {diam:.6g}"
            warnings.warn(msg, stacklevel=2)
            skipped.append((r, msg))
            continue
        worst = 0.0
        for p in centers:
            if not x.closed and min(np.hypot(*(p - x.vertices[0])), np.hypot(*(p - x.vertices[-1]))) < r:
                continue
            d = _flatness(x, p, r, coarse=coarse)[0]
            worst = max(worst, d)
            if keep_points:
                dc = _flatness(x, p, r, through_center=True, coarse=coarse)[0]
                rows.append((p[0], p[1], r, d, dc))
        kept.append(r)
        devs.append(worst)
    table = np.array(rows) if keep_points else None
    return FlatnessReport(kept, devs, table, skipped)


# ---------------------------------------------------------------------------
# curvature


def _menger(a, b, c):
    ab = np.hypot(*(b - a).T)
    bc = np.hypot(*(c - b).T)
    ca = np.hypot(*(a - c).T)
    cross = (b - a)[..., 0] * (c - a)[..., 1] - (b - a)[..., 1] * (c - a)[..., 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        k = 2.0 * np.abs(cross) / (ab * bc * ca)
    return np.where(cross == 0.0, 0.0, k), ab, bc


def discrete_curvature(x: Curve, i: int) -> float:
    """Unsigned Menger curvature at vertex ``i``: inverse circumradius of its neighbors."""
    n = len(x)
    if not x.closed and (i <= 0 or i >= n - 1):
        raise DomainError("curvature needs two neighbors; endpoint of an open curve given")
    if not -n <= i < n:
        raise IndexError(i)
    v = x.vertices
    a, b, c = v[(i - 1) % n], v[i % n], v[(i + 1) % n]
    if np.array_equal(a, b) or np.array_equal(b, c) or np.array_equal(a, c):
        raise DomainError("duplicate neighbor points")
    k, _, _ = _menger(a[None], b[None], c[None])
    return float(k[0])


def curvatures(x: Curve) -> np.ndarray:
    """Menger curvature at every interior vertex (all vertices when closed)."""
    v = x.vertices
    if x.closed:
        a, b, c = np.roll(v, 1, axis=0), v, np.roll(v, -1, axis=0)
    else:
        a, b, c = v[:-2], v[1:-1], v[2:]
    if np.any(np.all(a == c, axis=1)):
        raise DomainError("duplicate neighbor points")
    k, _, _ = _menger(a, b, c)
    return k


def sup_curvature(x: Curve) -> float:
    """Largest discrete curvature over all vertices."""
    k = curvatures(x)
    return float(k.max()) if len(k) else 0.0


def resample_uniform(x: Curve, spacing: float) -> Curve:
    """Resample at (nearly) uniform arc-length spacing."""
    v = x.vertices
    pts = np.vstack([v, v[:1]]) if x.closed else v
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    total = s[-1]
    n = max(8 if x.closed else 2, int(round(total / spacing)))
    if x.closed:
        t = np.arange(n) * (total / n)
    else:
        t = np.linspace(0.0, total, n)
    out = np.column_stack([np.interp(t, s, pts[:, 0]), np.interp(t, s, pts[:, 1])])
    return Curve(out, closed=x.closed)


# ---------------------------------------------------------------------------
# closed-form bounds


def interpolation_gradient_bound(alpha: float, beta: float) -> float:
    """Slope bound for a curve with curvature <= alpha lying within beta of a line.

    Returns ``sqrt(2*alpha*beta - (alpha*beta)**2) / (1 - alpha*beta)``, which
    behaves like ``sqrt(2*alpha*beta)`` for small ``alpha*beta``.
    """
    if not alpha > 0 or beta < 0:
        raise DomainError("need alpha > 0 and beta >= 0")
    ab = alpha * beta
    if ab >= 1.0:
        raise DomainError(f"alpha*beta = {ab:.6g} must be < 1")
    return math.sqrt(2.0 * ab - ab * ab) / (1.0 - ab)


def curvature_continuation_bound(alpha: float, t: float) -> float:
    """Curvature bound ``alpha / sqrt(1 - 2 alpha^2 t)`` for a flow starting with |A| <= alpha."""
    if alpha < 0 or t < 0:
        raise DomainError("need alpha >= 0 and t >= 0")
    q = 1.0 - 2.0 * alpha * alpha * t
    if q <= 0.0:
        raise DomainError(f"t = {t:.6g} is past the blow-up horizon 1/(2 alpha^2)")
    return alpha / math.sqrt(q)


# ---------------------------------------------------------------------------
# file format


def write_curve(x: Curve, path) -> None:
    """Write ``<n> closed`` (or ``open``) followed by one ``x y`` line per vertex."""
    kind = "closed" if x.closed else "open"
    lines = [f"{len(x)} {kind}"] + [f"{p[0]:.17g} {p[1]:.17g}" for p in x.vertices]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_curve(path) -> Curve:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[1] not in ("closed", "open"):
            raise DomainError(f"{path}: bad curve header {header!r}")
        n = int(header[0])
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (n, 2):
        raise DomainError(f"{path}: expected {n} vertices, found {len(data)}")
    return Curve(data, closed=header[1] == "closed")
