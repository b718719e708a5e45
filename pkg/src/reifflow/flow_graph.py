"""Graphical curve shortening flow and the heat equation in one dimension.

Both solvers use explicit centered differences on a uniform grid over
``[-L, L]`` with either fixed (Dirichlet) ends or periodic wrap-around.  The
experiments below measure interior derivative and curvature estimates for
graphs with small gradient, where the flow is close to the heat equation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numba
import numpy as np

from .errors import DomainError, NumericalBlowupError, ResolutionError

__all__ = [
    "GraphState",
    "EstimateCheck",
    "graph_mcf_step",
    "heat_step",
    "evolve_graph",
    "kernel_constant_experiment",
    "kink_profile",
    "interior_curvature_experiment",
    "calibrate_interior_constant",
    "INTERIOR_C",
    "ecker_huisken_check",
    "checks_to_csv",
]

STABILITY = 0.4
# frozen from calibrate_interior_constant() with its default family, rounded up
INTERIOR_C = 0.04


@dataclass(frozen=True)
class GraphState:
    """Samples ``u[k] = u(-L + k h)``.

    With Dirichlet ends the grid includes both endpoints, which stay at their
    initial values.  With periodic ends the point ``x = L`` is identified
    with ``x = -L`` and not stored.
    """

    u: np.ndarray
    h: float
    L: float
    t: float = 0.0
    boundary: str = "dirichlet"
    sup0: float = field(default=float("nan"), repr=False, compare=False)

    def __post_init__(self):
        if self.boundary not in ("dirichlet", "periodic"):
            raise DomainError(f"unknown boundary mode {self.boundary!r}")
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 1 or len(u) < 3:
            raise DomainError("u must be a 1D array of at least 3 samples")
        if not np.all(np.isfinite(u)):
            raise NumericalBlowupError("non-finite graph values")
        expected = _node_count(self.L, self.h, self.boundary)
        if len(u) != expected:
            raise DomainError(f"expected {expected} samples for L={self.L}, h={self.h}, got {len(u)}")
        object.__setattr__(self, "u", u)
        if math.isnan(self.sup0):
            object.__setattr__(self, "sup0", float(np.max(np.abs(u))))

    @classmethod
    def sample(cls, f: Callable[[np.ndarray], np.ndarray], L: float, h: float, boundary: str = "dirichlet"):
        n = _node_count(L, h, boundary)
        x = -L + h * np.arange(n)
        return cls(np.asarray(f(x), dtype=float) * np.ones(n), h, L, 0.0, boundary)

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(len(self.u))

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def ux(self) -> np.ndarray:
        """Centered first difference (one-sided at Dirichlet ends)."""
        if self.periodic:
            return (np.roll(self.u, -1) - np.roll(self.u, 1)) / (2 * self.h)
        return np.gradient(self.u, self.h)

    def uxx(self) -> np.ndarray:
        """Centered second difference (zero at Dirichlet ends)."""
        u = self.u
        if self.periodic:
            return (np.roll(u, -1) - 2 * u + np.roll(u, 1)) / self.h**2
        out = np.zeros_like(u)
        out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / self.h**2
        return out

    def v(self) -> np.ndarray:
        """Gradient function sqrt(1 + u_x^2)."""
        return np.sqrt(1.0 + self.ux() ** 2)

    def curvature(self) -> np.ndarray:
        """Unsigned curvature of the graph, |u_xx| / (1 + u_x^2)^(3/2)."""
        return np.abs(self.uxx()) / (1.0 + self.ux() ** 2) ** 1.5

    def at(self, x0: float) -> int:
        """Index of the grid node nearest ``x0``."""
        return int(round((x0 + self.L) / self.h))


def _node_count(L, h, boundary):
    if not (L > 0 and h > 0):
        raise DomainError("L and h must be positive")
    cells = 2 * L / h
    n = int(round(cells))
    if abs(cells - n) > 1e-6 * max(1.0, cells):
        raise DomainError(f"2L/h = {cells:.9g} must be an integer")
    return n if boundary == "periodic" else n + 1


@dataclass
class EstimateCheck:
    """One inequality ``lhs <= rhs``; ``status`` may also be ``"inconclusive"``."""

    lhs: float
    rhs: float
    experiment: str = ""
    params: dict = field(default_factory=dict)
    status: str | None = None

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.margin >= 0.0

    def __post_init__(self):
        if self.status is None:
            self.status = "pass" if self.passed else "fail"

    def csv_row(self) -> str:
        params = json.dumps(self.params, sort_keys=True)
        return (f'{self.experiment},"{params.replace(chr(34), chr(34) * 2)}",'
                f"{self.lhs:.9g},{self.rhs:.9g},{self.margin:.9g},{self.passed}")


def checks_to_csv(checks: Sequence[EstimateCheck]) -> str:
    lines = ["experiment,param_json,lhs,rhs,margin,passed"]
    lines += [c.csv_row() for c in checks]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# solvers


@numba.njit(cache=True, nogil=True)
def _run(u, h, dt, n, nonlinear, periodic):
    m = u.shape[0]
    a = u.copy()
    b = u.copy()
    inv_h2 = 1.0 / (h * h)
    inv_2h = 0.5 / h
    for _ in range(n):
        for i in range(m):
            if periodic:
                left = a[i - 1]
                right = a[(i + 1) % m]
            else:
                if i == 0 or i == m - 1:
                    continue
                left = a[i - 1]
                right = a[i + 1]
            c = a[i]
            uxx = (right - 2.0 * c + left) * inv_h2
            if nonlinear:
                ux = (right - left) * inv_2h
                uxx /= 1.0 + ux * ux
            b[i] = c + dt * uxx
        a, b = b, a
    return a


def _check_dt(dt, h):
    if not dt > 0:
        raise DomainError("dt must be positive")
    if dt > STABILITY * h * h * (1 + 1e-12):
        raise DomainError(f"dt = {dt:.6g} violates the stability bound dt <= 0.4 h^2 = {STABILITY * h * h:.6g}")


def _advance(state: GraphState, dt: float, n: int, nonlinear: bool) -> GraphState:
    _check_dt(dt, state.h)
    u = _run(state.u, state.h, dt, n, nonlinear, state.periodic)
    if not np.all(np.isfinite(u)):
        raise NumericalBlowupError(f"non-finite values near t = {state.t + n * dt:.6g}")
    if np.max(np.abs(u)) > state.sup0 * (1 + 1e-12) + 1e-300:
        raise NumericalBlowupError("maximum principle violated: sup|u| grew")
    return replace(state, u=u, t=state.t + n * dt)


def graph_mcf_step(state: GraphState, dt: float) -> GraphState:
    """One explicit step of ``u_t = u_xx / (1 + u_x^2)``."""
    return _advance(state, dt, 1, True)


def heat_step(state: GraphState, dt: float) -> GraphState:
    """One explicit step of ``u_t = u_xx``."""
    return _advance(state, dt, 1, False)


def evolve_graph(
    state: GraphState,
    T: float,
    dt: float | None = None,
    equation: str = "mcf",
    snapshot_times: Sequence[float] = (),
) -> list[GraphState]:
    """Advance to ``T`` and return the states at ``snapshot_times`` plus ``T``.

    Steps are shortened uniformly so that every snapshot time is hit exactly.
    ``sup|u|`` must not grow; on periodic domains the graph flow must not
    grow ``sup|u_x|`` either.
    """
    if equation not in ("mcf", "heat"):
        raise DomainError("equation must be 'mcf' or 'heat'")
    dt_max = STABILITY * state.h**2 if dt is None else dt
    _check_dt(dt_max, state.h)
    targets = sorted({float(t) for t in snapshot_times} | {float(T)})
    if targets[0] < state.t - 1e-15:
        raise DomainError("snapshot times must not precede the state time")
    out = []
    grad = float(np.max(np.abs(state.ux())))
    for target in targets:
        span = target - state.t
        if span > 1e-15:
            n = max(1, math.ceil(span / dt_max - 1e-9))
            state = _advance(state, span / n, n, equation == "mcf")
            state = replace(state, t=target)
        if equation == "mcf" and state.periodic:
            g = float(np.max(np.abs(state.ux())))
            if g > grad * (1 + 1e-9) + 1e-15:
                raise NumericalBlowupError("gradient maximum principle violated: sup|u_x| grew")
            grad = g
        out.append(state)
    return out


# ---------------------------------------------------------------------------
# experiments


def kernel_constant_experiment(de: float = 1.0, L: float = 1.0, tau: float = 0.01,
                               h: float = 1 / 2000, dt: float | None = None) -> EstimateCheck:
    """Heat flow of the step ``de * sign(x)``: compare ``|u_x(0, tau)|`` with ``de / sqrt(pi tau)``.

    The step is the extremal datum for the interior gradient bound; the exact
    solution is ``de * erf(x / (2 sqrt(t)))``, so the margin against the
    bound ``1.02 de / sqrt(pi tau)`` is small but positive.
    """
    if not (de > 0 and tau > 0):
        raise DomainError("de and tau must be positive")
    if h > math.sqrt(tau) / 10:
        raise ResolutionError(f"h = {h:.6g} too coarse; need h <= sqrt(tau)/10 = {math.sqrt(tau) / 10:.6g}")
    if L < 5 * math.sqrt(tau):
        raise DomainError(f"L = {L:.6g} too small; need L >= 5 sqrt(tau) = {5 * math.sqrt(tau):.6g}")
    state = GraphState.sample(lambda x: de * np.sign(np.where(np.abs(x) < 0.5 * h, 0.0, x)), L, h)
    final = evolve_graph(state, tau, dt, equation="heat")[-1]
    i = final.at(0.0)
    lhs = abs(final.u[i + 1] - final.u[i - 1]) / (2 * h)
    rhs = 1.02 * de / math.sqrt(math.pi * tau)
    return EstimateCheck(lhs, rhs, "kernel_constant", {"de": de, "L": L, "tau": tau, "h": h})


def kink_profile(de: float, beta: float) -> Callable[[np.ndarray], np.ndarray]:
    """``beta (1 - exp(-de |x| / beta))``: sup ``beta``, slope jumping by ``2 de`` at 0."""
    return lambda x: beta * (1.0 - np.exp(-de * np.abs(x) / beta))


def interior_curvature_experiment(
    de: float = 0.01,
    beta: float = 0.001,
    M: float = 2.0,
    lam: float = 0.5,
    tau: float = 0.04,
    L: float = 1.0,
    h: float = 1 / 400,
    dt: float | None = None,
    u0: Callable[[np.ndarray], np.ndarray] | None = None,
    c: float = INTERIOR_C,
    batches: int = 20,
) -> tuple[EstimateCheck, EstimateCheck]:
    """Curvature at ``x = 0`` after graph flow for time ``tau``.

    Check A compares ``|A(0, tau)|`` with ``1.1 de / sqrt(pi tau)``; check B
    with ``c beta / tau + 0.1 de / sqrt(tau)``.  The data must satisfy
    ``|u0| <= beta`` and ``|u0_x| <= de``, and along the run ``sup|u_x|``
    must stay below ``M de`` (below ``de`` up to ``lam tau``); otherwise both
    checks come back with status ``"inconclusive"``.
    """
    if not (de > 0 and beta > 0 and tau > 0 and M >= 1 and 0 <= lam <= 1):
        raise DomainError("need de, beta, tau > 0, M >= 1 and lam in [0, 1]")
    if h > math.sqrt(tau) / 10:
        raise ResolutionError(f"h = {h:.6g} too coarse; need h <= sqrt(tau)/10")
    if L < 2 * math.sqrt(tau):
        raise DomainError("L must be at least 2 sqrt(tau)")
    f = kink_profile(de, beta) if u0 is None else u0
    state = GraphState.sample(f, L, h)
    params = {"de": de, "beta": beta, "M": M, "lambda": lam, "tau": tau, "L": L, "h": h}
    ok = np.max(np.abs(state.u)) <= beta * (1 + 1e-9) and np.max(np.abs(np.diff(state.u))) / h <= de * (1 + 1e-9)
    times = tau * np.arange(1, batches + 1) / batches
    for s in evolve_graph(state, tau, dt, "mcf", times):
        limit = de if s.t <= lam * tau + 1e-15 else M * de
        ok = ok and float(np.max(np.abs(np.diff(s.u)))) / h <= limit * (1 + 1e-9)
        state = s
    i = state.at(0.0)
    lhs = float(state.curvature()[i])
    status = None if ok else "inconclusive"
    a = EstimateCheck(lhs, 1.1 * de / math.sqrt(math.pi * tau), "interior_A", params, status)
    b = EstimateCheck(lhs, c * beta / tau + 0.1 * de / math.sqrt(tau), "interior_B", dict(params, c=c), status)
    return a, b


def calibrate_interior_constant(
    family: Sequence[tuple[float, float, float]] = (
        (0.01, 0.001, 0.04),
        (0.01, 0.0005, 0.04),
        (0.02, 0.001, 0.04),
        (0.01, 0.001, 0.02),
        (0.005, 0.001, 0.04),
    ),
    h: float = 1 / 400,
) -> float:
    """Smallest ``c`` making check B hold on a family of ``(de, beta, tau)`` runs."""
    worst = 0.0
    for de, beta, tau in family:
        a, _ = interior_curvature_experiment(de, beta, tau=tau, h=h, c=0.0)
        worst = max(worst, (a.lhs - 0.1 * de / math.sqrt(tau)) * tau / beta)
    return worst


def ecker_huisken_check(
    snapshots: Sequence[GraphState],
    r: float,
    x0: tuple[float, float] | None = None,
    t0: float | None = None,
    adversarial: bool = False,
) -> EstimateCheck:
    """Gradient estimate over the ball ``B(x0, r)`` in the plane.

    ``lhs`` is the largest ``(1 - (|x - x0|^2 + 2 (t - t0)) / r^2) v(x, t)``
    over graph points of the later snapshots inside the shrunken ball, and
    ``rhs`` the largest ``v`` on the graph at ``t0`` inside ``B(x0, r)``.
    The first snapshot is taken as time ``t0`` unless given.  With
    ``adversarial`` the later ``v`` are doubled, which should fail.
    """
    if not snapshots:
        raise DomainError("need at least one snapshot")
    first = snapshots[0]
    t0 = first.t if t0 is None else t0
    if x0 is None:
        x0 = (0.0, float(first.u[first.at(0.0)]))
    x0 = np.asarray(x0, float)

    def dist2(s):
        return (s.x - x0[0]) ** 2 + (s.u - x0[1]) ** 2

    base = [s for s in snapshots if abs(s.t - t0) <= 1e-12]
    if not base:
        raise DomainError("no snapshot at t0")
    d0 = dist2(base[0])
    in_ball = d0 < r * r
    rhs = float(np.max(base[0].v()[in_ball])) if in_ball.any() else 1.0
    lhs = -math.inf
    for s in snapshots:
        if s.t <= t0:
            continue
        if 2 * (s.t - t0) >= r * r:
            raise DomainError("t - t0 must be below r^2 / 2")
        w = 1.0 - (dist2(s) + 2 * (s.t - t0)) / (r * r)
        inside = w > 0
        if inside.any():
            v = s.v() * (2.0 if adversarial else 1.0)
            lhs = max(lhs, float(np.max(w[inside] * v[inside])))
    if lhs == -math.inf:
        lhs = 0.0
    return EstimateCheck(lhs, rhs, "ecker_huisken", {"r": r, "t0": t0, "adversarial": adversarial})
