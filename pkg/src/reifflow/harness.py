"""Experiment configuration, scale sweeps, scaling fits and report output.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns a
:class:`Report`: one table (written as CSV) plus the series drawn in its
log-log figure.  Per-scale work runs in a thread pool whose size is capped by
the ``REIFFLOW_THREADS`` environment variable.
"""

from __future__ import annotations

import copy
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numba
import numpy as np

from . import flow_graph
from .errors import DomainError, EmptyResultError, NotAGraphError, ResolutionError
from .flow_levelset import CAP, LevelSetState, SnapshotList, evolve, fattening_gap
from .fractal_gen import KochSpec, circle_curve, koch_variant
from .geom_core import Curve, _points_to_polyline, hausdorff_distance, reifenberg_certificate, sup_curvature
from .mollifier import GridSpec, approximate, signed_distance, vertex_normals

__all__ = [
    "ExperimentConfig",
    "ScalingFit",
    "Report",
    "power_fit",
    "build_shape",
    "build_scale_grid",
    "evolve_scales",
    "run_approximation",
    "run_certificate",
    "run_flow",
    "run_uniform_estimates",
    "decomposition_fraction",
    "graph_representation",
    "run_separation",
    "run_nonfattening",
    "run_kernel_constant",
    "run_interior",
    "ecker_huisken_runs",
    "emit_report",
]

DEFAULTS: dict[str, Any] = {
    "shape": {"type": "koch", "beta": math.pi / 4, "depth": 5, "radius": 1.0, "base_side": 1.0, "vertices": 2048},
    "scales": [0.08, 0.04, 0.02, 0.01],
    "grid": {"h": 1 / 600, "pad": 0.25},
    "time": {"dt": None, "T": 0.0256, "snapshots": [0.0004, 0.0008, 0.0016, 0.0032, 0.0064, 0.0128, 0.0256]},
    "burn_in_c3": 4.0,
    "out_dir": "out",
    "seed": 0,
    "certify": {"stride": 16},
    "graph": {
        "de": 1.0,
        "L": 1.0,
        "h": 0.0005,
        "taus": [0.0025, 0.005, 0.01, 0.02],
        "interior_de": [0.005, 0.01, 0.02],
        "beta": 0.001,
        "tau": 0.04,
        "M": 2.0,
        "lambda": 0.5,
        "eh_runs": 5,
    },
}


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, update: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise DomainError(f"{name}: unknown config key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise DomainError(f"{name}: expected an object")
            out[key] = _merge(base[key], value, name + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment settings; build with :meth:`from_dict` or :meth:`load`."""

    data: dict

    @classmethod
    def from_dict(cls, d: dict | None = None) -> "ExperimentConfig":
        cfg = cls(_merge(DEFAULTS, d or {}))
        cfg._validate()
        return cfg

    @classmethod
    def load(cls, path, overrides: Sequence[str] = ()) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file {path} does not exist")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise DomainError(f"{path}: expected a JSON object")
        return cls.from_dict(raw).with_overrides(overrides)

    def with_overrides(self, overrides: Sequence[str]) -> "ExperimentConfig":
        """Apply ``dotted.key=value`` overrides; values are parsed as JSON when possible."""
        d = copy.deepcopy(self.data)
        for item in overrides:
            key, sep, text = item.partition("=")
            if not sep:
                raise DomainError(f"override {item!r} is not of the form key=value")
            parts = key.strip().split(".")
            node = d
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    raise DomainError(f"{key}: unknown config key")
                node = node[p]
            if parts[-1] not in node:
                raise DomainError(f"{key}: unknown config key")
            node[parts[-1]] = _parse_value(text)
        return ExperimentConfig.from_dict(d)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    # convenient views
    @property
    def shape(self) -> dict:
        return self.data["shape"]

    @property
    def scales(self) -> list[float]:
        return [float(r) for r in self.data["scales"]]

    @property
    def h(self) -> float:
        return float(self.data["grid"]["h"])

    @property
    def pad(self) -> float:
        return float(self.data["grid"]["pad"])

    @property
    def dt(self) -> float:
        dt = self.data["time"]["dt"]
        return 0.2 * self.h**2 if dt is None else float(dt)

    @property
    def T(self) -> float:
        return float(self.data["time"]["T"])

    @property
    def snapshots(self) -> list[float]:
        times = [float(t) for t in self.data["time"]["snapshots"]]
        return times if times and times[-1] == self.T else times + [self.T]

    @property
    def c3(self) -> float:
        return float(self.data["burn_in_c3"])

    @property
    def out_dir(self) -> Path:
        return Path(self.data["out_dir"])

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def beta(self) -> float:
        return float(self.shape["beta"])

    def require_resolved(self, feature: float, what: str) -> None:
        """Raise ResolutionError unless ``feature`` spans at least 6 flow cells."""
        if feature < 6 * self.h * (1 - 1e-9):
            raise ResolutionError(f"{what} = {feature:.6g} is below 6 grid.h = {6 * self.h:.6g}")

    def _validate(self) -> None:
        s = self.shape
        if s["type"] not in ("koch", "circle"):
            raise DomainError(f"shape.type: expected 'koch' or 'circle', got {s['type']!r}")
        if not 0 < _num("shape.beta", s["beta"]) < math.pi / 2:
            raise DomainError("shape.beta: must lie in (0, pi/2)")
        if s["type"] == "koch":
            if not isinstance(s["depth"], int) or not 0 <= s["depth"] <= 10:
                raise DomainError("shape.depth: must be an integer in [0, 10]")
            if not _num("shape.base_side", s["base_side"]) > 0:
                raise DomainError("shape.base_side: must be positive")
        else:
            if not _num("shape.radius", s["radius"]) > 0:
                raise DomainError("shape.radius: must be positive")
            if not isinstance(s["vertices"], int) or s["vertices"] < 8:
                raise DomainError("shape.vertices: must be an integer >= 8")
        h = _num("grid.h", self.data["grid"]["h"])
        if not h > 0:
            raise DomainError("grid.h: must be positive")
        if not _num("grid.pad", self.data["grid"]["pad"]) >= 0:
            raise DomainError("grid.pad: must be non-negative")
        scales = self.data["scales"]
        if not isinstance(scales, list) or not scales:
            raise DomainError("scales: must be a non-empty list")
        vals = [_num("scales", r) for r in scales]
        if any(r <= 0 for r in vals):
            raise DomainError("scales: must be positive")
        if any(a < b for a, b in zip(vals, vals[1:])):
            raise DomainError("scales: must be sorted in descending order")
        t = self.data["time"]
        if t["dt"] is not None:
            dt = _num("time.dt", t["dt"])
            if not dt > 0:
                raise DomainError("time.dt: must be positive")
            if dt > 0.25 * h * h * (1 + 1e-12):
                raise DomainError(
                    f"time.dt = {dt:.6g} violates the stability bound dt <= 0.25 h^2 = {0.25 * h * h:.6g}"
                )
        T = _num("time.T", t["T"])
        if not T > 0:
            raise DomainError("time.T: must be positive")
        snaps = [_num("time.snapshots", x) for x in t["snapshots"]]
        if any(x < 0 for x in snaps) or snaps != sorted(snaps):
            raise DomainError("time.snapshots: must be non-negative and sorted")
        if snaps and snaps[-1] > T:
            raise DomainError("time.snapshots: must not exceed time.T")
        if not _num("burn_in_c3", self.data["burn_in_c3"]) > 0:
            raise DomainError("burn_in_c3: must be positive")
        if not isinstance(self.data["seed"], int):
            raise DomainError("seed: must be an integer")
        if not isinstance(self.data["out_dir"], str) or not self.data["out_dir"]:
            raise DomainError("out_dir: must be a non-empty string")
        if not isinstance(self.data["certify"]["stride"], int) or self.data["certify"]["stride"] < 1:
            raise DomainError("certify.stride: must be a positive integer")


def _num(name, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DomainError(f"{name}: expected a number, got {value!r}")
    return float(value)


# ---------------------------------------------------------------------------
# fits and reports


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    prefactor: float
    residual: float


def power_fit(xs, ys) -> ScalingFit:
    """Least-squares fit of ``y = prefactor * x**exponent`` in log-log space."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("xs and ys must be 1D arrays of equal length")
    if len(x) < 3:
        raise DomainError("power_fit needs at least 3 points")
    if not (np.all(x > 0) and np.all(y > 0)):
        raise DomainError("power_fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return ScalingFit(float(slope), float(np.exp(intercept)), float(np.sqrt(np.mean(resid**2))))


@dataclass
class Report:
    """One experiment's table, figure series and headline numbers."""

    name: str
    header: list[str]
    rows: list[tuple]
    series: list[tuple] = field(default_factory=list)
    xlabel: str = ""
    ylabel: str = ""
    summary: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = [",".join(self.header)]
        lines += [",".join(_fmt(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def emit_report(reports: Sequence[Report], out_dir) -> list[Path]:
    """Write ``<name>.csv`` and ``<name>.svg`` for every report.

    Nothing is written unless at least one report has rows.
    """
    from .plotting import loglog_svg

    reports = [r for r in reports if r is not None and r.rows]
    if not reports:
        raise EmptyResultError("no completed runs to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for rep in reports:
        csv_path = out / f"{rep.name}.csv"
        csv_path.write_text(rep.to_csv())
        svg_path = out / f"{rep.name}.svg"
        loglog_svg(svg_path, rep.series, rep.xlabel, rep.ylabel, rep.name)
        written += [csv_path, svg_path]
    return written


# ---------------------------------------------------------------------------
# shared plumbing


def _threads() -> int:
    env = os.environ.get("REIFFLOW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise DomainError(f"REIFFLOW_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def _pmap(fn: Callable, items: Sequence) -> list:
    """Map ``fn`` over ``items`` in a thread pool; failures come back as exceptions."""

    def guarded(item):
        try:
            return fn(item)
        except (DomainError, ArithmeticError, RuntimeError) as exc:
            return exc

    n = min(len(items), _threads())
    if n <= 1:
        return [guarded(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(guarded, items))


def build_shape(cfg: ExperimentConfig) -> Curve:
    s = cfg.shape
    if s["type"] == "koch":
        return koch_variant(KochSpec(float(s["beta"]), int(s["depth"]), float(s["base_side"])))
    return circle_curve(float(s["radius"]), int(s["vertices"]))


def build_scale_grid(r: float, h: float) -> float:
    """Grid spacing for building X^r: at most r/8, and no finer than needed."""
    return min(max(h, r / 16), r / 8)


def _flow_grid(cfg: ExperimentConfig, x: Curve, extra: float = 0.0) -> GridSpec:
    pad = max(cfg.pad, 2 * max(cfg.scales) + extra + (CAP + 4) * cfg.h)
    return GridSpec.covering(x, cfg.h, pad)


def evolve_scales(cfg: ExperimentConfig, x: Curve | None = None) -> dict:
    """Build X^r and evolve it on one shared grid, for every scale.

    Returns ``{r: (X^r, snapshots)}``, with an exception in place of the
    pair for scales that failed.
    """
    cfg.require_resolved(min(cfg.scales), "smallest scale")
    x = build_shape(cfg) if x is None else x
    grid = _flow_grid(cfg, x)

    def one(r):
        xr = approximate(x, r, build_scale_grid(r, cfg.h))
        snaps = evolve(xr, cfg.T, cfg.h, cfg.dt, snapshot_times=cfg.snapshots, reference=x, grid=grid)
        return xr, snaps

    return dict(zip(cfg.scales, _pmap(one, cfg.scales)))


def _fit_or_none(xs, ys):
    try:
        return power_fit(xs, ys)
    except DomainError:
        return None


# ---------------------------------------------------------------------------
# experiments on the curve itself


def run_approximation(cfg: ExperimentConfig, x: Curve | None = None) -> tuple[Report, dict]:
    """d_H(X^r, X) and sup|A| of X^r for every scale; returns the report and the curves."""
    x = build_shape(cfg) if x is None else x

    def one(r):
        xr = approximate(x, r, build_scale_grid(r, cfg.h))
        return xr, hausdorff_distance(xr, x), sup_curvature(xr)

    rows, curves, errors = [], {}, {}
    for r, res in zip(cfg.scales, _pmap(one, cfg.scales)):
        if isinstance(res, Exception):
            errors[r] = repr(res)
            continue
        xr, d, k = res
        curves[r] = xr
        rows.append((r, build_scale_grid(r, cfg.h), d, k, d / r, k * r))
    rs = [row[0] for row in rows]
    fit_d = _fit_or_none(rs, [row[2] for row in rows])
    fit_k = _fit_or_none(rs, [row[3] for row in rows])
    rep = Report(
        "approximation",
        ["r", "h_build", "d_H", "sup_A", "d_H_over_r", "sup_A_times_r"],
        rows,
        [("d_H(X^r, X)", rs, [row[2] for row in rows], fit_d), ("sup|A|", rs, [row[3] for row in rows], fit_k)],
        "r",
        "value",
        {"d_H_exponent": fit_d.exponent if fit_d else math.nan, "sup_A_exponent": fit_k.exponent if fit_k else math.nan},
        errors,
    )
    return rep, curves


def certificate_scales(cfg: ExperimentConfig, x: Curve) -> list[float]:
    """Dyadic scales, ascending, from 4 segment lengths up to a quarter of the diameter."""
    s = cfg.shape
    if s["type"] == "koch":
        lo = 4 * KochSpec(float(s["beta"]), int(s["depth"]), float(s["base_side"])).segment_length()
    else:
        lo = 4 * float(np.max(x.segment_lengths()))
    hi = x.diameter() / 4
    scales = []
    r = hi
    while r >= lo:
        scales.append(r)
        r /= 2
    return scales[::-1]


def run_certificate(cfg: ExperimentConfig, x: Curve | None = None) -> Report:
    x = build_shape(cfg) if x is None else x
    scales = certificate_scales(cfg, x)
    if not scales:
        raise DomainError("shape has no dyadic scales between 4 segment lengths and diameter/4")
    rep = reifenberg_certificate(x, scales, sample_stride=int(cfg.data["certify"]["stride"]))
    rows = list(zip(rep.scales, rep.deviations))
    return Report(
        "certificate",
        ["scale", "deviation"],
        rows,
        [("sup deviation", rep.scales, rep.deviations, None)],
        "scale r",
        "sup_x delta(x, r)",
        {"max_deviation": rep.max_deviation, "bound": math.sin(cfg.beta)},
    )


def run_flow(cfg: ExperimentConfig, x: Curve | None = None) -> tuple[Report, SnapshotList]:
    """Level-set flow of the shape itself, one row per snapshot."""
    from .flow_levelset import _check_dt

    x = build_shape(cfg) if x is None else x
    _check_dt(cfg.dt, cfg.h)
    snaps = evolve(x, cfg.T, cfg.h, cfg.dt, snapshot_times=cfg.snapshots, grid=_flow_grid(cfg, x))
    rows = [(s.t, s.sup_A, s.dist_to_reference, s.enclosed_area, s.vertex_count) for s in snaps]
    pos = [s for s in snaps if s.t > 0]
    rep = Report(
        "flow",
        ["t", "sup_A", "dist_to_reference", "enclosed_area", "vertex_count"],
        rows,
        [("sup|A|", [s.t for s in pos], [s.sup_A for s in pos], _fit_or_none([s.t for s in pos], [s.sup_A for s in pos]))],
        "t",
        "sup|A|",
        {"extinction_time": snaps.extinction_time},
    )
    return rep, snaps


# ---------------------------------------------------------------------------
# uniform estimates


def decomposition_fraction(curves: Sequence[Curve], s: float, centers: np.ndarray) -> float:
    """Fraction of balls ``B(c, s)`` in which exactly one arc of the curve meets ``B(c, 0.9 s)``."""
    if len(centers) == 0:
        return math.nan
    dense = [c.densified(s / 40) for c in curves]
    good = 0
    for c in centers:
        arcs = 0
        for pts in dense:
            d = np.hypot(*(pts - c).T)
            inside = d <= s
            if inside.all():
                arcs += int((d <= 0.9 * s).any())
                continue
            # rotate so the walk starts outside, then split into runs
            k = int(np.argmin(inside))
            inside = np.roll(inside, -k)
            near = np.roll(d <= 0.9 * s, -k)
            starts = np.flatnonzero(inside & ~np.roll(inside, 1))
            ends = np.flatnonzero(inside & ~np.roll(inside, -1))
            for a, b in zip(starts, ends):
                arcs += int(near[a : b + 1].any())
        good += arcs == 1
    return good / len(centers)


def run_uniform_estimates(cfg: ExperimentConfig, runs: dict | None = None, x: Curve | None = None) -> Report:
    """sup|A| sqrt(t) and d_H(X^r_t, X)/sqrt(t) for t >= c3 r^2, per scale."""
    x = build_shape(cfg) if x is None else x
    runs = evolve_scales(cfg, x) if runs is None else runs
    rng = np.random.default_rng(cfg.seed)
    rows, errors, summary = [], {}, {}
    for r in cfg.scales:
        res = runs[r]
        if isinstance(res, Exception):
            errors[r] = repr(res)
            continue
        _, snaps = res
        best_a = best_d = 0.0
        for s in snaps:
            if s.t < cfg.c3 * r * r * (1 - 1e-12) or s.t <= 0:
                continue
            root = math.sqrt(s.t)
            main = s.curve.vertices
            centers = main[rng.choice(len(main), size=min(16, len(main)), replace=False)]
            frac = decomposition_fraction(s.components, root, centers)
            a, d = s.sup_A * root, s.dist_to_reference / root
            best_a, best_d = max(best_a, a), max(best_d, d)
            rows.append((r, s.t, s.sup_A, a, s.dist_to_reference, d, frac))
        if snaps.extinction_time is not None:
            errors[r] = f"flow extinct at t = {snaps.extinction_time:.6g}"
        summary[r] = {"max_sup_A_sqrt_t": best_a, "max_d_H_over_sqrt_t": best_d}
    done = [r for r in cfg.scales if r in summary and summary[r]["max_sup_A_sqrt_t"] > 0]
    ya = [summary[r]["max_sup_A_sqrt_t"] for r in done]
    yd = [summary[r]["max_d_H_over_sqrt_t"] for r in done]
    summary["variation_sup_A_sqrt_t"] = max(ya) / min(ya) if ya else math.nan
    summary["variation_d_H_over_sqrt_t"] = max(yd) / min(yd) if yd else math.nan
    return Report(
        "uniform",
        ["r", "t", "sup_A", "sup_A_sqrt_t", "d_H", "d_H_over_sqrt_t", "decomposition_fraction"],
        rows,
        [("max sup|A| sqrt(t)", done, ya, _fit_or_none(done, ya)), ("max d_H/sqrt(t)", done, yd, _fit_or_none(done, yd))],
        "r",
        "normalized estimate",
        summary,
        errors,
    )


# ---------------------------------------------------------------------------
# separation


@numba.njit(cache=True, nogil=True)
def _normal_hits(px, py, nx, ny, ax, ay, bx, by, umax, tol, out_u, out_count):
    for k in range(px.shape[0]):
        count = 0
        first = 0.0
        for s in range(ax.shape[0]):
            ex = bx[s] - ax[s]
            ey = by[s] - ay[s]
            den = nx[k] * ey - ny[k] * ex
            if den == 0.0:
                continue
            wx = ax[s] - px[k]
            wy = ay[s] - py[k]
            u = (wx * ey - wy * ex) / den
            t = (wx * ny[k] - wy * nx[k]) / den
            if t < -1e-12 or t > 1.0 + 1e-12 or abs(u) >= umax:
                continue
            if count == 0:
                first = u
                count = 1
            elif abs(u - first) > tol:
                count += 1
        out_u[k] = first
        out_count[k] = count


def graph_representation(y: Curve, z: Curve) -> list[tuple[float, float]]:
    """Write ``z`` as a normal graph over ``y``: ``(arclength, u)`` per vertex of ``y``.

    ``u`` is the signed distance along the outward normal at each vertex to
    the crossing with ``z``, searched within the tubular radius
    ``1 / (2 sup|A|(y))``.

    Raises
    ------
    DomainError
        If ``z`` leaves the tubular neighbourhood of ``y``.
    NotAGraphError
        If some normal meets ``z`` zero or several times.
    """
    k = sup_curvature(y)
    tube = 0.5 / k if k > 0 else 10 * y.diameter()
    zs = z.densified(max(z.perimeter() / 20000, 1e-12))
    reach = float(np.max(_points_to_polyline(zs, y.vertices, y.closed)))
    if reach >= tube:
        raise DomainError(f"z reaches {reach:.6g} from y, beyond the tubular radius {tube:.6g}")
    v = y.vertices
    n = vertex_normals(y)
    a, b = z.segments()
    u = np.empty(len(v))
    count = np.empty(len(v), dtype=np.int64)
    tol = 1e-9 * max(y.diameter(), 1e-300)
    _normal_hits(np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1]),
                 np.ascontiguousarray(n[:, 0]), np.ascontiguousarray(n[:, 1]),
                 np.ascontiguousarray(a[:, 0]), np.ascontiguousarray(a[:, 1]),
                 np.ascontiguousarray(b[:, 0]), np.ascontiguousarray(b[:, 1]), tube, tol, u, count)
    bad = np.flatnonzero(count != 1)
    if len(bad):
        i = int(bad[0])
        what = "no crossing" if count[i] == 0 else f"{count[i]} crossings"
        raise NotAGraphError(f"normal at vertex {i} has {what} within the tubular radius")
    s = np.concatenate([[0.0], np.cumsum(y.segment_lengths())[:-1]])
    return list(zip(s.tolist(), u.tolist()))


def run_separation(cfg: ExperimentConfig, runs: dict | None = None, x: Curve | None = None) -> Report:
    """d_H(X^r_t, X^s_t) / (sqrt(r) t^(1/4)) for consecutive scales r > s."""
    if len(cfg.scales) < 3:
        raise DomainError("scales: separation needs at least 3 scales")
    x = build_shape(cfg) if x is None else x
    runs = evolve_scales(cfg, x) if runs is None else runs
    rows, errors = [], {}
    final = []
    for r, s in zip(cfg.scales, cfg.scales[1:]):
        ra, rb = runs[r], runs[s]
        if isinstance(ra, Exception) or isinstance(rb, Exception):
            errors[(r, s)] = repr(ra if isinstance(ra, Exception) else rb)
            continue
        by_t = {snap.t: snap for snap in rb[1]}
        for snap in ra[1]:
            other = by_t.get(snap.t)
            if other is None or snap.t < cfg.c3 * r * r * (1 - 1e-12) or snap.t <= 0:
                continue
            d = hausdorff_distance(snap.components, other.components)
            try:
                sup_u = max(abs(u) for _, u in graph_representation(snap.curve, other.curve))
            except DomainError:
                sup_u = math.nan
            rho = d / (math.sqrt(r) * snap.t**0.25)
            rows.append((r, s, snap.t, d, rho, sup_u))
            if abs(snap.t - cfg.T) <= 1e-12:
                final.append((r, d, rho))
    summary: dict[str, Any] = {"final": final}
    if final:
        rhos = [f[2] for f in final]
        # the estimate is an upper bound, so growth relative to the largest scale is what matters
        summary["rho_growth"] = max(rhos) / rhos[0] if rhos[0] > 0 else math.inf
        summary["rho_spread"] = max(rhos) / min(rhos) if min(rhos) > 0 else math.inf
    fit = _fit_or_none([f[0] for f in final], [f[1] for f in final]) if len(final) >= 3 else None
    summary["exponent"] = fit.exponent if fit else math.nan
    return Report(
        "separation",
        ["r", "s", "t", "d_H", "rho", "sup_abs_u"],
        rows,
        [("d_H(X^r_T, X^r/2_T)", [f[0] for f in final], [f[1] for f in final], fit)],
        "r",
        "d_H at final time",
        summary,
        errors,
    )


# ---------------------------------------------------------------------------
# non-fattening


def run_nonfattening(cfg: ExperimentConfig, x: Curve | None = None) -> Report:
    """Gap between the flows of the barriers X^r offset by -+ 10 sin(beta) r."""
    x = build_shape(cfg) if x is None else x
    cfg.require_resolved(10 * math.sin(cfg.beta) * min(cfg.scales), "smallest barrier offset")
    offset_max = 10 * math.sin(cfg.beta) * max(cfg.scales)
    grid = _flow_grid(cfg, x, extra=offset_max)

    def one(r):
        xr = approximate(x, r, build_scale_grid(r, cfg.h))
        sdf = signed_distance(xr, grid)
        d = 10 * math.sin(cfg.beta) * r
        inner = LevelSetState(sdf.with_values(sdf.values + d))
        outer = LevelSetState(sdf.with_values(sdf.values - d))
        return fattening_gap(inner, outer, cfg.T, cfg.h, cfg.dt, cfg.snapshots)

    results = dict(zip(cfg.scales, _pmap(one, cfg.scales)))
    rows, errors = [], {}
    gaps: dict[float, dict[float, float]] = {}
    for r in cfg.scales:
        res = results[r]
        if isinstance(res, Exception):
            errors[r] = repr(res)
            continue
        gaps[r] = dict(res)
    times = sorted({t for g in gaps.values() for t in g})
    for i, r in enumerate(cfg.scales):
        if r not in gaps:
            continue
        bigger = cfg.scales[i - 1] if i > 0 else None
        for t in times:
            if t not in gaps[r]:
                continue
            ratio = gaps[r][t] / gaps[bigger][t] if bigger in gaps and t in gaps[bigger] else math.nan
            rows.append((r, t, gaps[r][t], ratio))
    mid = min(times, key=lambda t: abs(t - cfg.T / 2)) if times else math.nan
    done = [r for r in cfg.scales if r in gaps and mid in gaps[r]]
    ratios = [gaps[b][mid] / gaps[a][mid] for a, b in zip(done, done[1:])]
    growth = {}
    for r in done:
        late = [gaps[r][t] for t in sorted(gaps[r]) if t >= cfg.c3 * r * r]
        growth[r] = max(late) / late[0] - 1 if late and late[0] > 0 else math.nan
    summary = {
        "mid_t": mid,
        "mid_ratios": ratios,
        "containment_ok": not any("AvoidanceFailure" in e for e in errors.values()),
        "max_relative_growth": growth,
    }
    return Report(
        "nonfattening",
        ["r", "t", "gap", "ratio_to_double_scale"],
        rows,
        [("gap at mid-run t", done, [gaps[r][mid] for r in done], _fit_or_none(done, [gaps[r][mid] for r in done]))],
        "r",
        "barrier gap",
        summary,
        errors,
    )


# ---------------------------------------------------------------------------
# graph experiments


def run_kernel_constant(cfg: ExperimentConfig) -> Report:
    g = cfg.data["graph"]
    taus = [float(t) for t in g["taus"]]
    checks = _pmap(lambda tau: flow_graph.kernel_constant_experiment(g["de"], g["L"], tau, g["h"]), taus)
    rows, errors = [], {}
    for tau, c in zip(taus, checks):
        if isinstance(c, Exception):
            errors[tau] = repr(c)
            continue
        rows.append((tau, c.lhs, c.rhs, c.margin, c.passed, c.lhs * math.sqrt(math.pi * tau) / g["de"]))
    ts = [row[0] for row in rows]
    ys = [row[1] for row in rows]
    return Report(
        "kernel_constant",
        ["tau", "lhs", "rhs", "margin", "passed", "lhs_sqrt_pi_tau_over_de"],
        rows,
        [("|u_x(0, tau)|", ts, ys, _fit_or_none(ts, ys))],
        "tau",
        "|u_x(0, tau)|",
        {"all_passed": all(row[4] for row in rows) if rows else False},
        errors,
    )


def ecker_huisken_runs(n_runs: int = 5, seed: int = 0, modes: int = 4, T: float = 0.1):
    """Gradient-estimate checks on randomized periodic graph flows.

    Each run draws a random trigonometric polynomial with ``sup|u_x| <= 1``,
    evolves it on ``[-pi, pi]`` and checks every snapshot against ``t0 = 0``
    over a ball of radius ``pi/2`` about a random graph point.  Returns the
    honest checks and the doubled-``v`` controls.
    """
    rng = np.random.default_rng(seed)
    honest, controls = [], []
    h = 2 * math.pi / 256
    for _ in range(n_runs):
        k = np.arange(1, modes + 1)
        a = rng.normal(size=modes) / k**2
        b = rng.normal(size=modes) / k**2
        scale = 1.0 / np.sum((np.abs(a) + np.abs(b)) * k)

        def u0(x, a=a, b=b, k=k, scale=scale):
            return scale * (np.cos(np.outer(x, k)) @ a + np.sin(np.outer(x, k)) @ b)

        state = flow_graph.GraphState.sample(u0, math.pi, h, "periodic")
        times = np.linspace(0, T, 6)
        snaps = flow_graph.evolve_graph(state, T, snapshot_times=times)
        i = int(rng.integers(len(state.u)))
        x0 = (float(state.x[i]), float(state.u[i]))
        honest.append(flow_graph.ecker_huisken_check(snaps, math.pi / 2, x0))
        controls.append(flow_graph.ecker_huisken_check(snaps, math.pi / 2, x0, adversarial=True))
    return honest, controls


def run_interior(cfg: ExperimentConfig) -> Report:
    """Interior curvature checks over a sweep of slope bounds, plus gradient-estimate runs."""
    g = cfg.data["graph"]
    des = [float(d) for d in g["interior_de"]]

    def one(de):
        return flow_graph.interior_curvature_experiment(
            de, g["beta"] * de / des[0], g["M"], g["lambda"], g["tau"], g["L"])

    rows, errors = [], {}
    xs, ys = [], []
    for de, res in zip(des, _pmap(one, des)):
        if isinstance(res, Exception):
            errors[de] = repr(res)
            continue
        for c in res:
            rows.append((c.experiment, de, c.lhs, c.rhs, c.margin, c.status))
        xs.append(de)
        ys.append(res[0].lhs)
    honest, controls = ecker_huisken_runs(int(g["eh_runs"]), cfg.seed)
    for k, (c, ctl) in enumerate(zip(honest, controls)):
        rows.append(("ecker_huisken", k, c.lhs, c.rhs, c.margin, c.status))
        rows.append(("ecker_huisken_doubled", k, ctl.lhs, ctl.rhs, ctl.margin, ctl.status))
    return Report(
        "interior",
        ["check", "param", "lhs", "rhs", "margin", "status"],
        rows,
        [("|A(0, tau)|", xs, ys, _fit_or_none(xs, ys))],
        "de",
        "|A(0, tau)|",
        {"eh_all_pass": all(c.passed for c in honest), "eh_controls_fail": not any(c.passed for c in controls)},
        errors,
    )
