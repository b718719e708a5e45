"""Smoothing a domain boundary by mollifying its indicator.

The pipeline is rasterize -> convolve with a radial bump of radius ``r`` ->
take the 1/2 level set.  Fields live on uniform grids with ``values[i, j]``
sampled at ``(origin_x + i h, origin_y + j h)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage

from .errors import DomainError, EmptyResultError, ResolutionError, TopologyError
from .geom_core import Curve, _points_to_polyline, sup_curvature

__all__ = [
    "GridSpec",
    "ScalarField",
    "BumpKernel",
    "rasterize_indicator",
    "build_bump_kernel",
    "mollify",
    "extract_level",
    "extract_contours",
    "approximate",
    "offset_curve",
    "signed_distance",
]


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float]
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError("grid spacing must be positive")
        if self.nx < 2 or self.ny < 2:
            raise DomainError("grid needs at least 2 x 2 nodes")

    @classmethod
    def covering(cls, bbox, h: float, pad: float) -> "GridSpec":
        """Smallest grid aligned to multiples of ``h`` containing ``bbox`` grown by ``pad``."""
        if isinstance(bbox, Curve):
            bbox = bbox.bbox()
        x0, y0, x1, y1 = bbox
        ox = math.floor((x0 - pad) / h) * h
        oy = math.floor((y0 - pad) / h) * h
        nx = int(math.ceil((x1 + pad - ox) / h)) + 1
        ny = int(math.ceil((y1 + pad - oy) / h)) + 1
        return cls((ox, oy), h, nx, ny)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return ox, oy, ox + (self.nx - 1) * self.h, oy + (self.ny - 1) * self.h

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        ox, oy = self.origin
        return ox + self.h * np.arange(self.nx), oy + self.h * np.arange(self.ny)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        xs, ys = self.axes()
        return np.meshgrid(xs, ys, indexing="ij")

    def require_padding(self, curve: Curve, pad: float) -> None:
        x0, y0, x1, y1 = curve.bbox()
        gx0, gy0, gx1, gy1 = self.extent
        slack = min(x0 - gx0, y0 - gy0, gx1 - x1, gy1 - y1)
        if slack < pad - 1e-12:
            raise DomainError(
                f"grid too small: curve needs padding {pad:.6g} on every side, grid leaves {slack:.6g}"
            )


@dataclass
class ScalarField:
    origin: tuple[float, float]
    h: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DomainError("field values must be 2-D")
        if not self.h > 0:
            raise DomainError("grid spacing must be positive")

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def grid(self) -> GridSpec:
        return GridSpec(tuple(self.origin), self.h, self.nx, self.ny)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.origin, self.h, values)

    def sample(self, x: float, y: float) -> float:
        """Bilinear interpolation at a point inside the grid."""
        fx = (x - self.origin[0]) / self.h
        fy = (y - self.origin[1]) / self.h
        i = min(max(int(math.floor(fx)), 0), self.nx - 2)
        j = min(max(int(math.floor(fy)), 0), self.ny - 2)
        tx, ty = fx - i, fy - j
        v = self.values
        return float(
            (1 - tx) * (1 - ty) * v[i, j] + tx * (1 - ty) * v[i + 1, j]
            + (1 - tx) * ty * v[i, j + 1] + tx * ty * v[i + 1, j + 1]
        )

    def write(self, path) -> None:
        """Plain text: ``nx ny h origin_x origin_y`` then row-major values."""
        with open(path, "w") as fh:
            fh.write(f"{self.nx} {self.ny} {self.h:.17g} {self.origin[0]:.17g} {self.origin[1]:.17g}\n")
            np.savetxt(fh, self.values, fmt="%.17g")

    @classmethod
    def read(cls, path) -> "ScalarField":
        with open(path) as fh:
            head = fh.readline().split()
            nx, ny = int(head[0]), int(head[1])
            h, ox, oy = map(float, head[2:5])
            vals = np.loadtxt(fh, ndmin=2)
        if vals.shape != (nx, ny):
            raise DomainError(f"{path}: expected {nx}x{ny} values, found {vals.shape}")
        return cls((ox, oy), h, vals)


# ---------------------------------------------------------------------------
# rasterization


@numba.njit(cache=True, nogil=True)
def _scanline_fill(vx, vy, ox, oy, h, nx, ny, out):
    n = vx.shape[0]
    xs = np.empty(n)
    for j in range(ny):
        y = oy + j * h
        m = 0
        for k in range(n):
            y1 = vy[k]
            y2 = vy[(k + 1) % n]
            if (y1 <= y < y2) or (y2 <= y < y1):
                x1 = vx[k]
                x2 = vx[(k + 1) % n]
                xs[m] = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                m += 1
        if m == 0:
            continue
        cross = np.sort(xs[:m])
        for q in range(0, m - 1, 2):
            lo = int(math.ceil((cross[q] - ox) / h))
            hi = int(math.floor((cross[q + 1] - ox) / h))
            if lo < 0:
                lo = 0
            if hi > nx - 1:
                hi = nx - 1
            for i in range(lo, hi + 1):
                out[i, j] = 1.0


def rasterize_indicator(x: Curve, grid: GridSpec, pad: float = 0.0) -> ScalarField:
    """Indicator of the region enclosed by ``x`` (even-odd rule) on ``grid``.

    ``pad`` is the margin the grid must leave around the curve, typically the
    largest mollification radius to be applied.
    """
    grid.require_padding(x, pad)
    out = np.zeros((grid.nx, grid.ny))
    v = x.vertices
    _scanline_fill(np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1]),
                   grid.origin[0], grid.origin[1], grid.h, grid.nx, grid.ny, out)
    return ScalarField(grid.origin, grid.h, out)


# ---------------------------------------------------------------------------
# kernel and convolution


@dataclass(frozen=True)
class BumpKernel:
    r: float
    h: float
    weights: np.ndarray

    @property
    def half_width(self) -> int:
        return self.weights.shape[0] // 2


def bump_profile(rho: np.ndarray) -> np.ndarray:
    """1 on [0, 1/2], smooth decay to 0 at 1, 0 beyond."""
    rho = np.asarray(rho, float)
    s = np.clip(2.0 * rho - 1.0, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        tail = np.exp(1.0 - 1.0 / (1.0 - s * s))
    return np.where(rho <= 0.5, 1.0, np.where(rho < 1.0, tail, 0.0))


def build_bump_kernel(r: float, h: float) -> BumpKernel:
    """Radial bump of radius ``r`` sampled at spacing ``h``, weights summing to 1."""
    if not (r > 0 and h > 0):
        raise DomainError("r and h must be positive")
    if r < 6.0 * h:
        raise ResolutionError(f"kernel radius {r:.6g} below 6h = {6 * h:.6g}")
    m = int(math.ceil(r / h))
    k = np.arange(-m, m + 1)
    # integer squared radii keep equidistant nodes bit-identical
    sq = k[:, None] ** 2 + k[None, :] ** 2
    w = bump_profile(np.sqrt(sq) * (h / r))
    w /= w.sum()
    return BumpKernel(r, h, w)


@numba.njit(cache=True, nogil=True)
def _convolve_at(values, di, dj, w, mi, mj, out):
    nx, ny = values.shape
    for q in range(mi.shape[0]):
        i = mi[q]
        j = mj[q]
        acc = 0.0
        for p in range(w.shape[0]):
            ii = i + di[p]
            jj = j + dj[p]
            if ii < 0:
                ii = 0
            elif ii >= nx:
                ii = nx - 1
            if jj < 0:
                jj = 0
            elif jj >= ny:
                jj = ny - 1
            acc += w[p] * values[ii, jj]
        out[i, j] = acc


def mollify(field: ScalarField, kernel: BumpKernel) -> ScalarField:
    """Discrete convolution of ``field`` with ``kernel``.

    Nodes whose whole kernel window is constant keep that value exactly; the
    grid is extended by edge replication.
    """
    if not math.isclose(field.h, kernel.h, rel_tol=1e-12):
        raise DomainError("kernel and field spacing differ")
    v = np.ascontiguousarray(field.values)
    size = 2 * kernel.half_width + 1
    lo = ndimage.minimum_filter(v, size=size, mode="nearest")
    hi = ndimage.maximum_filter(v, size=size, mode="nearest")
    mi, mj = np.nonzero(lo != hi)
    w = kernel.weights
    di, dj = np.nonzero(w)
    wv = w[di, dj]
    m = kernel.half_width
    out = v.copy()
    _convolve_at(v, (di - m).astype(np.int64), (dj - m).astype(np.int64), wv,
                 mi.astype(np.int64), mj.astype(np.int64), out)
    if v.min() >= 0.0 and v.max() <= 1.0:
        np.clip(out, 0.0, 1.0, out=out)
    return field.with_values(out)


# ---------------------------------------------------------------------------
# marching squares


@numba.njit(cache=True, nogil=True)
def _ms_segments(v, level, sgn, ci, cj, count_only, frm, to):
    """Oriented cell segments as pairs of edge ids, inside on the left.

    A node is inside when ``sgn * (v - level) > 0``.  Only the cells whose
    lower-left nodes are listed in ``ci, cj`` are visited.  Edge ids: the
    edge from node (i, j) to (i+1, j) is 2*(i*ny+j), the edge from (i, j) to
    (i, j+1) is 2*(i*ny+j)+1.
    """
    nx, ny = v.shape
    cnt = 0
    gv = np.empty(4)
    ins = np.empty(4, dtype=np.bool_)
    eid = np.empty(4, dtype=np.int64)
    for q in range(ci.shape[0]):
        i = ci[q]
        j = cj[q]
        if i >= nx - 1 or j >= ny - 1:
            continue
        gv[0] = sgn * (v[i, j] - level)
        gv[1] = sgn * (v[i + 1, j] - level)
        gv[2] = sgn * (v[i + 1, j + 1] - level)
        gv[3] = sgn * (v[i, j + 1] - level)
        n_in = 0
        for k in range(4):
            ins[k] = gv[k] > 0.0
            if ins[k]:
                n_in += 1
        if n_in == 0 or n_in == 4:
            continue
        # e0 bottom, e1 right, e2 top, e3 left; e_k joins corners k and k+1
        eid[0] = 2 * (i * ny + j)
        eid[1] = 2 * ((i + 1) * ny + j) + 1
        eid[2] = 2 * (i * ny + j + 1)
        eid[3] = 2 * (i * ny + j) + 1
        saddle = n_in == 2 and ins[0] == ins[2]
        if not saddle:
            ea = -1
            eb = -1
            for k in range(4):
                if ins[k] != ins[(k + 1) % 4]:
                    if ea < 0:
                        ea = k
                    else:
                        eb = k
            if not count_only:
                _emit(ea, eb, ins, eid, frm, to, cnt)
            cnt += 1
        else:
            center_in = (gv[0] + gv[1] + gv[2] + gv[3]) > 0.0
            for k in range(4):
                # cut off the corners of the class not joined through the center
                if ins[k] != center_in:
                    ea = (k + 3) % 4
                    eb = k
                    if not count_only:
                        _emit(ea, eb, ins, eid, frm, to, cnt)
                    cnt += 1
    return cnt


@numba.njit(cache=True, nogil=True)
def _emit(ea, eb, ins, eid, frm, to, cnt):
    # corners run ccw, so inside stays on the left when leaving through the
    # edge whose start corner is inside
    if ins[ea]:
        frm[cnt] = eid[ea]
        to[cnt] = eid[eb]
    else:
        frm[cnt] = eid[eb]
        to[cnt] = eid[ea]


@numba.njit(cache=True, nogil=True)
def _chain(frm, to):
    n = frm.shape[0]
    order = np.argsort(frm)
    sf = frm[order]
    nxt = -np.ones(n, dtype=np.int64)
    has_prev = np.zeros(n, dtype=np.bool_)
    for k in range(n):
        pos = np.searchsorted(sf, to[k])
        if pos < n and sf[pos] == to[k]:
            nxt[k] = order[pos]
            has_prev[order[pos]] = True
    visited = np.zeros(n, dtype=np.bool_)
    edges = np.empty(2 * n, dtype=np.int64)
    offsets = np.empty(n + 1, dtype=np.int64)
    closed = np.empty(n, dtype=np.bool_)
    m = 0
    c = 0
    offsets[0] = 0
    for phase in range(2):
        for s in range(n):
            if visited[s] or (phase == 0 and has_prev[s]):
                continue
            edges[m] = frm[s]
            m += 1
            k = s
            is_closed = False
            while True:
                visited[k] = True
                k2 = nxt[k]
                if k2 == s:
                    is_closed = True
                    break
                edges[m] = to[k]
                m += 1
                if k2 < 0 or visited[k2]:
                    break
                k = k2
            closed[c] = is_closed
            c += 1
            offsets[c] = m
    return edges[:m], offsets[: c + 1], closed[:c]


def _edge_coords(edges, v, level, origin, h):
    ny = v.shape[1]
    base = edges // 2
    vertical = (edges % 2).astype(bool)
    i = base // ny
    j = base % ny
    i2 = np.where(vertical, i, i + 1)
    j2 = np.where(vertical, j + 1, j)
    ga = v[i, j] - level
    gb = v[i2, j2] - level
    t = ga / (ga - gb)
    x = origin[0] + h * (i + np.where(vertical, 0.0, t))
    y = origin[1] + h * (j + np.where(vertical, t, 0.0))
    return np.column_stack([x, y])


def _dedupe(pts, closed, tol):
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.hypot(*np.diff(pts, axis=0).T) > tol
    pts = pts[keep]
    if closed and len(pts) > 1 and np.hypot(*(pts[0] - pts[-1])) <= tol:
        pts = pts[:-1]
    return pts


@numba.njit(cache=True, nogil=True)
def _project(v, level, ox, oy, h, pts, iters):
    """Newton-project points onto the level set of a local quadratic model.

    The model at a point uses central differences at the nearest interior node.
    """
    nx, ny = v.shape
    for q in range(pts.shape[0]):
        x = pts[q, 0]
        y = pts[q, 1]
        for _ in range(iters):
            i = int(round((x - ox) / h))
            j = int(round((y - oy) / h))
            i = min(max(i, 1), nx - 2)
            j = min(max(j, 1), ny - 2)
            c = v[i, j] - level
            gx = (v[i + 1, j] - v[i - 1, j]) / (2 * h)
            gy = (v[i, j + 1] - v[i, j - 1]) / (2 * h)
            gxx = (v[i + 1, j] - 2 * v[i, j] + v[i - 1, j]) / (h * h)
            gyy = (v[i, j + 1] - 2 * v[i, j] + v[i, j - 1]) / (h * h)
            gxy = (v[i + 1, j + 1] - v[i + 1, j - 1] - v[i - 1, j + 1] + v[i - 1, j - 1]) / (4 * h * h)
            dx = x - (ox + i * h)
            dy = y - (oy + j * h)
            f = c + gx * dx + gy * dy + 0.5 * (gxx * dx * dx + 2 * gxy * dx * dy + gyy * dy * dy)
            fx = gx + gxx * dx + gxy * dy
            fy = gy + gxy * dx + gyy * dy
            g2 = fx * fx + fy * fy
            if g2 == 0.0:
                break
            sx = f * fx / g2
            sy = f * fy / g2
            # never move further than a cell; the model is only local
            m = math.sqrt(sx * sx + sy * sy)
            if m > h:
                sx *= h / m
                sy *= h / m
            x -= sx
            y -= sy
        pts[q, 0] = x
        pts[q, 1] = y


@numba.njit(cache=True, nogil=True)
def _merge_mask(pts, closed, tol):
    n = pts.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    keep[0] = True
    last = 0
    for k in range(1, n):
        if math.hypot(pts[k, 0] - pts[last, 0], pts[k, 1] - pts[last, 1]) >= tol:
            keep[k] = True
            last = k
    if closed:
        m = n - 1
        kept = 0
        for k in range(n):
            if keep[k]:
                kept += 1
        while m > 0 and kept > 3:
            if keep[m]:
                if math.hypot(pts[m, 0] - pts[0, 0], pts[m, 1] - pts[0, 1]) >= tol:
                    break
                keep[m] = False
                kept -= 1
            m -= 1
    return keep


def _merge_close(pts, closed, tol):
    return pts[_merge_mask(pts, closed, tol)]


def refine_contour(field: ScalarField, pts: np.ndarray, closed: bool, level: float,
                   merge: float = 0.25, subdivide: int = 1) -> np.ndarray:
    """Sharpen a marching-squares contour.

    Vertices closer than ``merge * h`` are merged, every chord is split into
    ``subdivide`` pieces, and all points are projected onto the level set of
    a local quadratic model of the field.  This removes the O(h^2 curvature)
    inward bias of linear interpolation on convex arcs.
    """
    p = _merge_close(np.asarray(pts, float), closed, merge * field.h)
    if subdivide > 1 and len(p) > 1:
        q = np.roll(p, -1, axis=0) if closed else p[1:]
        base = p if closed else p[:-1]
        f = np.arange(subdivide) / subdivide
        dense = (base[:, None, :] + f[None, :, None] * (q - base)[:, None, :]).reshape(-1, 2)
        p = dense if closed else np.vstack([dense, p[-1:]])
    p = np.ascontiguousarray(p, dtype=float).copy()
    _project(np.ascontiguousarray(field.values), level, field.origin[0], field.origin[1], field.h, p, 3)
    return p


def _all_cells(shape):
    ci, cj = np.nonzero(np.ones((shape[0] - 1, shape[1] - 1), dtype=bool))
    return ci.astype(np.int64), cj.astype(np.int64)


def extract_contours(field: ScalarField, level: float, inside: str = "high", cells=None):
    """Raw marching-squares contours as ``(points, closed, signed_area)`` tuples.

    Points are ordered with the inside region (``inside`` = ``"high"`` or
    ``"low"`` values) on the left, so outer boundaries have positive signed
    area and holes negative.  ``cells`` optionally restricts the scan to the
    cells with the given lower-left node indices.
    """
    if inside not in ("high", "low"):
        raise DomainError("inside must be 'high' or 'low'")
    v = np.ascontiguousarray(field.values)
    sgn = 1.0 if inside == "high" else -1.0
    ci, cj = _all_cells(v.shape) if cells is None else (np.asarray(c, np.int64) for c in cells)
    dummy = np.empty(0, dtype=np.int64)
    n = _ms_segments(v, level, sgn, ci, cj, True, dummy, dummy)
    if n == 0:
        return []
    frm = np.empty(n, dtype=np.int64)
    to = np.empty(n, dtype=np.int64)
    _ms_segments(v, level, sgn, ci, cj, False, frm, to)
    edges, offsets, closed = _chain(frm, to)
    pts_all = _edge_coords(edges, v, level, field.origin, field.h)
    out = []
    tol = 1e-9 * field.h
    for c in range(len(closed)):
        pts = _dedupe(pts_all[offsets[c] : offsets[c + 1]], closed[c], tol)
        if len(pts) < (3 if closed[c] else 2):
            continue
        out.append((pts, bool(closed[c]), _area(pts) if closed[c] else 0.0))
    return out


def _area(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def extract_level(field: ScalarField, level: float, inside: str = "high") -> list[Curve]:
    """Level set ``field == level`` as a list of curves (marching squares).

    Crossings are linearly interpolated along cell edges; saddle cells are
    resolved by comparing the mean of the four corners with the level.
    """
    vmin, vmax = float(field.values.min()), float(field.values.max())
    if not vmin < level < vmax:
        raise EmptyResultError(f"level {level:.6g} outside field range [{vmin:.6g}, {vmax:.6g}]")
    raw = extract_contours(field, level, inside)
    if not raw:
        raise EmptyResultError("no cell crosses the requested level")
    return [Curve(p, closed=c) for p, c, _ in raw]


def approximate(x: Curve, r: float, h: float) -> Curve:
    """Smooth approximation of ``x`` at scale ``r`` on a grid of spacing ``h``.

    Returns the largest-area component of the 1/2 level set of the mollified
    indicator.  Vertices closer than h/4 are merged and the rest projected
    onto the level set, so vertex curvature is meaningful.
    """
    if r < 6.0 * h:
        raise ResolutionError(f"r = {r:.6g} must be at least 6h = {6 * h:.6g}")
    if r >= x.diameter() / 4:
        raise DomainError(f"r = {r:.6g} must be below diameter/4 = {x.diameter() / 4:.6g}")
    pad = r + 3.0 * h
    grid = GridSpec.covering(x, h, pad)
    chi = rasterize_indicator(x, grid, pad=r)
    chi_r = mollify(chi, build_bump_kernel(r, h))
    raw = [c for c in extract_contours(chi_r, 0.5, "high") if c[1]]
    if not raw:
        raise EmptyResultError("mollified indicator has no closed 1/2-contour")
    pts, _, _ = max(raw, key=lambda c: abs(c[2]))
    return Curve(refine_contour(chi_r, pts, True, 0.5))


# ---------------------------------------------------------------------------
# offsets and distance fields


def vertex_normals(x: Curve) -> np.ndarray:
    """Outward unit normals at vertices (average of adjacent edge normals)."""
    v = x.vertices
    e = np.roll(v, -1, axis=0) - v
    e /= np.hypot(*e.T)[:, None]
    n_edge = np.column_stack([e[:, 1], -e[:, 0]])
    n = n_edge + np.roll(n_edge, 1, axis=0)
    norm = np.hypot(*n.T)
    return n / np.where(norm > 0, norm, 1.0)[:, None]


def offset_curve(x: Curve, distance: float) -> Curve:
    """Move every vertex ``distance`` along its outward normal.

    Raises
    ------
    DomainError
        If ``|distance|`` is not below half the smallest radius of curvature.
    TopologyError
        If the result self-intersects.
    """
    if not x.closed:
        raise DomainError("offset needs a closed curve")
    kmax = sup_curvature(x)
    if kmax > 0 and abs(distance) >= 0.5 / kmax:
        raise DomainError(
            f"offset {distance:.6g} exceeds the tubular bound 1/(2 sup|A|) = {0.5 / kmax:.6g}"
        )
    out = Curve(x.vertices + distance * vertex_normals(x))
    if not out.is_simple():
        raise TopologyError("offset curve self-intersects")
    return out


def signed_distance(x: Curve, grid: GridSpec, pad: float = 0.0) -> ScalarField:
    """Signed distance to ``x`` on ``grid``; negative inside."""
    grid.require_padding(x, pad)
    inside = rasterize_indicator(x, grid).values > 0.5
    X, Y = grid.nodes()
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    dense = x.densified(grid.h)
    d = _points_to_polyline(nodes, dense, x.closed).reshape(X.shape)
    return ScalarField(grid.origin, grid.h, np.where(inside, -d, d))
