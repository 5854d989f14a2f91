"""
Trajectory-level geometry on charted manifolds

Geodesics (fixed-step RK4), exponential and logarithm maps, parallel
transport, geodesic curvature and distance from a point to a curve.
Curves are stored unwrapped so periodic axes stay continuous.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.optimize import minimize_scalar

from app.config import get_settings
from app.services.errors import (
    ChartDomainError,
    ContractError,
    EscapeError,
    NoConvergenceError,
    OutOfRangeError,
)
from app.services.geometry import ChartedManifold, christoffel_symbols, metric_at, norm

settings = get_settings()


@dataclass(eq=False)
class DiscreteCurve:
    """
    Sampled curve on a charted manifold.

    Times are non-decreasing; a repeated time marks a corner (two nodes,
    same position, different velocities).
    """
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    manifold: ChartedManifold

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        self.velocities = np.asarray(self.velocities, dtype=float)
        count = self.times.shape[0]
        shape = (count, self.manifold.dim)
        if count < 1 or self.points.shape != shape or self.velocities.shape != shape:
            raise ContractError(
                f"curve arrays must have shape {shape}, got points {self.points.shape} "
                f"and velocities {self.velocities.shape}"
            )
        if np.any(np.diff(self.times) < 0):
            raise ContractError("curve times must be non-decreasing")

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def start(self) -> np.ndarray:
        return self.manifold.domain.wrap(self.points[0])

    @property
    def end(self) -> np.ndarray:
        return self.manifold.domain.wrap(self.points[-1])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def _interval(self, t: float) -> int:
        """Index k of a positive-length interval [t_k, t_{k+1}] containing t"""
        if len(self) == 1:
            return 0
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), len(self) - 2)
        while k > 0 and self.times[k + 1] == self.times[k]:
            k -= 1
        while k < len(self) - 2 and self.times[k + 1] == self.times[k]:
            k += 1
        return k

    def state_at(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Unwrapped point and velocity at time t by cubic Hermite interpolation"""
        if len(self) == 1:
            return self.points[0].copy(), self.velocities[0].copy()
        k = self._interval(t)
        dt = self.times[k + 1] - self.times[k]
        if dt == 0:
            return self.points[k].copy(), self.velocities[k].copy()
        theta = (t - self.times[k]) / dt
        return hermite(
            self.points[k], self.velocities[k], self.points[k + 1], self.velocities[k + 1], dt, theta
        )

    def point_at(self, t: float, wrap: bool = True) -> np.ndarray:
        point = self.state_at(t)[0]
        return self.manifold.domain.wrap(point) if wrap else point


def hermite(p0, v0, p1, v1, dt: float, theta: float) -> Tuple[np.ndarray, np.ndarray]:
    t2, t3 = theta * theta, theta ** 3
    point = (
        (2 * t3 - 3 * t2 + 1) * p0
        + (t3 - 2 * t2 + theta) * dt * v0
        + (-2 * t3 + 3 * t2) * p1
        + (t3 - t2) * dt * v1
    )
    velocity = (
        (6 * t2 - 6 * theta) * p0
        + (3 * t2 - 4 * theta + 1) * dt * v0
        + (-6 * t2 + 6 * theta) * p1
        + (3 * t2 - 2 * theta) * dt * v1
    ) / dt
    return point, velocity


def default_steps(length: float, per_unit: Optional[int] = None) -> int:
    per_unit = per_unit or settings.steps_per_unit
    return max(settings.min_steps, int(math.ceil(per_unit * abs(length))))


# ── Geodesics ─────────────────────────────────────────────────

def _acceleration(M: ChartedManifold, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return -np.einsum("kij,i,j->k", christoffel_symbols(M, x), v, v)


def integrate_geodesic(M: ChartedManifold, x0, v0, T: float, steps: Optional[int] = None) -> DiscreteCurve:
    """Fixed-step RK4 solution of x'' + Γ(x', x') = 0 on [0, T]"""
    x = M.domain.check(x0, what="geodesic start")
    v = np.array(v0, dtype=float)
    if steps is None:
        steps = default_steps(T * norm(M, x, v))
    if steps < 1:
        raise ContractError("steps must be a positive integer")
    h = T / steps
    times = np.linspace(0.0, T, steps + 1)
    points = np.empty((steps + 1, M.dim))
    velocities = np.empty((steps + 1, M.dim))
    points[0], velocities[0] = x, v

    for n in range(steps):
        try:
            k1x, k1v = v, _acceleration(M, x, v)
            k2x = v + 0.5 * h * k1v
            k2v = _acceleration(M, x + 0.5 * h * k1x, k2x)
            k3x = v + 0.5 * h * k2v
            k3v = _acceleration(M, x + 0.5 * h * k2x, k3x)
            k4x = v + h * k3v
            k4v = _acceleration(M, x + h * k3x, k4x)
        except ChartDomainError:
            raise EscapeError(f"geodesic left the chart of {M.name}", exit_time=float(times[n]))
        x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not M.domain.contains(x):
            raise EscapeError(f"geodesic left the chart of {M.name}", exit_time=float(times[n + 1]))
        points[n + 1], velocities[n + 1] = x, v

    return DiscreteCurve(times=times, points=points, velocities=velocities, manifold=M)


def exp_map(M: ChartedManifold, x, v, steps: Optional[int] = None) -> np.ndarray:
    return integrate_geodesic(M, x, v, 1.0, steps).end


def log_map(M: ChartedManifold, p, q, trust_radius: float, steps_per_unit: Optional[int] = None) -> np.ndarray:
    """
    Initial velocity v at q of the geodesic reaching p at time 1.

    Damped Newton shooting on the endpoint residual, seeded with the
    chart straight line. The step count is fixed from the seed length so
    the residual is a smooth function of v.
    """
    p = M.domain.check(p, what="log_map target")
    q = M.domain.check(q, what="log_map base")
    v = M.domain.wrapped_difference(p, q)
    if not np.any(v):
        return np.zeros(M.dim)

    steps = default_steps(min(norm(M, q, v), trust_radius), steps_per_unit)

    def residual(w: np.ndarray) -> np.ndarray:
        end = integrate_geodesic(M, q, w, 1.0, steps).points[-1]
        return M.domain.wrapped_difference(end, p)

    F = residual(v)
    size = float(np.linalg.norm(F))
    for _ in range(settings.newton_max_iter):
        if size < settings.newton_tol:
            break
        eps = 1e-7 * max(1.0, float(np.linalg.norm(v)))
        jac = np.empty((M.dim, M.dim))
        for j in range(M.dim):
            e = np.zeros(M.dim)
            e[j] = eps
            jac[:, j] = (residual(v + e) - residual(v - e)) / (2 * eps)
        try:
            dv = np.linalg.solve(jac, -F)
        except np.linalg.LinAlgError:
            raise NoConvergenceError("singular shooting Jacobian", residual=size)

        damping = 1.0
        while True:
            trial = v + damping * dv
            try:
                F_trial = residual(trial)
                trial_size = float(np.linalg.norm(F_trial))
            except EscapeError:
                trial_size = math.inf
            if trial_size < size:
                v, F, size = trial, F_trial, trial_size
                break
            damping *= 0.5
            if damping < 1.0 / 1024:
                raise NoConvergenceError("line search stalled in log_map shooting", residual=size)

    if size >= settings.newton_tol:
        raise NoConvergenceError(
            f"log_map did not converge in {settings.newton_max_iter} iterations", residual=size
        )
    length = norm(M, q, v)
    if length >= trust_radius:
        raise OutOfRangeError(f"target at distance {length:.6g} beyond trust radius {trust_radius:g}")
    return v


def geodesic_distance(M: ChartedManifold, p, q, trust_radius: float) -> float:
    """Length of the connecting geodesic; exactly symmetric in (p, q)"""
    a = M.domain.check(p)
    b = M.domain.check(q)
    if tuple(a) > tuple(b):
        a, b = b, a
    return norm(M, a, log_map(M, b, a, trust_radius))


# ── Curve helpers ─────────────────────────────────────────────

def sample_curve(
    M: ChartedManifold,
    path: Callable[[float], Sequence[float]],
    velocity: Callable[[float], Sequence[float]],
    t0: float,
    t1: float,
    steps: int,
) -> DiscreteCurve:
    times = np.linspace(t0, t1, steps + 1)
    return DiscreteCurve(
        times=times,
        points=np.array([path(t) for t in times], dtype=float),
        velocities=np.array([velocity(t) for t in times], dtype=float),
        manifold=M,
    )


def unit_speed_curve(
    M: ChartedManifold,
    path: Callable[[float], np.ndarray],
    dpath: Callable[[float], np.ndarray],
    length: float,
    steps: int,
    u0: float = 0.0,
) -> DiscreteCurve:
    """Arc-length reparametrization of a chart path, sampled at `steps` + 1 nodes"""

    def rate(_s, u):
        return [1.0 / norm(M, path(u[0]), dpath(u[0]))]

    arclength = np.linspace(0.0, length, steps + 1)
    solution = solve_ivp(rate, (0.0, length), [u0], t_eval=arclength, method="DOP853", rtol=1e-12, atol=1e-12)
    if not solution.success:
        raise ContractError(f"arc-length reparametrization failed: {solution.message}")
    params = solution.y[0]
    points = np.array([path(u) for u in params], dtype=float)
    velocities = np.array(
        [np.asarray(dpath(u)) * rate(0.0, [u])[0] for u in params], dtype=float
    )
    return DiscreteCurve(times=arclength, points=points, velocities=velocities, manifold=M)


def curve_length(curve: DiscreteCurve) -> float:
    M = curve.manifold
    speeds = np.array([norm(M, x, v) for x, v in zip(curve.points, curve.velocities)])
    return float(trapezoid(speeds, curve.times))


def reversed_curve(curve: DiscreteCurve) -> DiscreteCurve:
    return DiscreteCurve(
        times=curve.times[-1] - curve.times[::-1],
        points=curve.points[::-1].copy(),
        velocities=-curve.velocities[::-1],
        manifold=curve.manifold,
    )


def concatenate(curves: Sequence[DiscreteCurve]) -> DiscreteCurve:
    """Join curves end to start; periodic offsets are aligned, times shifted"""
    if not curves:
        raise ContractError("concatenate needs at least one curve")
    M = curves[0].manifold
    periods = M.domain.periods
    times, points, velocities = [curves[0].times], [curves[0].points], [curves[0].velocities]
    for curve in curves[1:]:
        previous_end = points[-1][-1]
        gap = M.domain.wrapped_difference(curve.points[0], previous_end)
        if np.max(np.abs(gap)) > 1e-8:
            raise ContractError(f"curves do not connect (gap {np.max(np.abs(gap)):.3e})")
        shift = np.zeros(M.dim)
        for i, period in enumerate(periods):
            if period > 0:
                shift[i] = np.round((previous_end[i] - curve.points[0][i]) / period) * period
        times.append(curve.times - curve.times[0] + times[-1][-1])
        points.append(curve.points + shift)
        velocities.append(curve.velocities)
    return DiscreteCurve(
        times=np.concatenate(times),
        points=np.concatenate(points),
        velocities=np.concatenate(velocities),
        manifold=M,
    )


def geodesic_polygon(
    M: ChartedManifold, vertices: Sequence[Sequence[float]], trust_radius: float, steps: Optional[int] = None
) -> DiscreteCurve:
    """Closed loop of connecting geodesics through the vertices (corners at each vertex)"""
    vertices = [M.domain.check(v, what="polygon vertex") for v in vertices]
    if len(vertices) < 2:
        raise ContractError("a geodesic polygon needs at least two vertices")
    sides = []
    for i, start in enumerate(vertices):
        target = vertices[(i + 1) % len(vertices)]
        v = log_map(M, target, start, trust_radius)
        sides.append(integrate_geodesic(M, start, v, 1.0, steps))
    return concatenate(sides)


# ── Parallel transport ────────────────────────────────────────

@dataclass(eq=False)
class TransportResult:
    field: np.ndarray
    end: np.ndarray


def _transport_rate(M: ChartedManifold, x: np.ndarray, dx: np.ndarray, v: np.ndarray) -> np.ndarray:
    return -np.einsum("kij,i,j->k", christoffel_symbols(M, x), dx, v)


def parallel_transport(M: ChartedManifold, curve: DiscreteCurve, v0) -> TransportResult:
    """RK4 for v' + Γ(γ', v) = 0 along the curve, Hermite midpoints between nodes"""
    v = np.array(v0, dtype=float)
    field = np.empty_like(curve.points)
    field[0] = v
    for k in range(len(curve) - 1):
        dt = curve.times[k + 1] - curve.times[k]
        if dt > 0:
            x0, dx0 = curve.points[k], curve.velocities[k]
            x1, dx1 = curve.points[k + 1], curve.velocities[k + 1]
            xm, dxm = hermite(x0, dx0, x1, dx1, dt, 0.5)
            k1 = _transport_rate(M, x0, dx0, v)
            k2 = _transport_rate(M, xm, dxm, v + 0.5 * dt * k1)
            k3 = _transport_rate(M, xm, dxm, v + 0.5 * dt * k2)
            k4 = _transport_rate(M, x1, dx1, v + dt * k3)
            v = v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        field[k + 1] = v
    return TransportResult(field=field, end=v.copy())


# ── Geodesic curvature ────────────────────────────────────────

def _node_acceleration(curve: DiscreteCurve, k: int) -> np.ndarray:
    """Second-order finite difference of velocities, one-sided at ends and corners"""
    t, vel = curve.times, curve.velocities
    n = len(curve)
    has_left = k >= 2 and t[k] > t[k - 1] and t[k - 1] > t[k - 2]
    has_right = k + 2 < n and t[k + 1] > t[k] and t[k + 2] > t[k + 1]
    if k >= 1 and k + 1 < n and t[k] > t[k - 1] and t[k + 1] > t[k]:
        return (vel[k + 1] - vel[k - 1]) / (t[k + 1] - t[k - 1])
    if has_right:
        dt = t[k + 1] - t[k]
        return (-3 * vel[k] + 4 * vel[k + 1] - vel[k + 2]) / (2 * dt)
    if has_left:
        dt = t[k] - t[k - 1]
        return (3 * vel[k] - 4 * vel[k - 1] + vel[k - 2]) / (2 * dt)
    raise ContractError("geodesic curvature needs at least three nodes on a smooth piece")


def geodesic_curvature(M: ChartedManifold, curve: DiscreteCurve, t: float) -> float:
    """|∇_γ' γ'|_g at the node nearest t; requires unit g-speed there"""
    k = int(np.argmin(np.abs(curve.times - t)))
    x, v = curve.points[k], curve.velocities[k]
    speed = norm(M, x, v)
    if abs(speed - 1.0) > 1e-6:
        raise ContractError(f"geodesic curvature needs a unit-speed curve (speed {speed:.9f} at t={t:g})")
    covariant = _node_acceleration(curve, k) + np.einsum("kij,i,j->k", christoffel_symbols(M, x), v, v)
    return norm(M, x, covariant)


def geodesic_curvature_profile(M: ChartedManifold, curve: DiscreteCurve, t_max: Optional[float] = None) -> np.ndarray:
    times = curve.times if t_max is None else curve.times[curve.times <= t_max + 1e-12]
    return np.array([geodesic_curvature(M, curve, t) for t in times])


# ── Distance to a curve ───────────────────────────────────────

@dataclass(eq=False)
class CurveDistance:
    r: float
    foot: float
    geodesic: DiscreteCurve


def distance_to_curve(M: ChartedManifold, x, target: DiscreteCurve, trust_radius: float) -> CurveDistance:
    """
    min_t d(x, target(t)).

    Chart-metric prefilter over all nodes, exact distances near the best
    candidate, then bounded scalar refinement over the two adjacent cells.
    """
    x = M.domain.check(x)
    g = metric_at(M, x).g
    diffs = M.domain.wrapped_difference(target.points, x)
    approx = np.sqrt(np.einsum("ni,ij,nj->n", diffs, g, diffs))
    if approx.min() >= trust_radius:
        raise OutOfRangeError(f"no point of the target curve within trust radius {trust_radius:g}")

    def distance(point) -> float:
        try:
            return norm(M, x, log_map(M, point, x, trust_radius))
        except OutOfRangeError:
            return math.inf

    best = int(np.argmin(approx))
    window = range(max(best - 2, 0), min(best + 3, len(target)))
    exact = {k: distance(target.points[k]) for k in window}
    k_best = min(exact, key=lambda k: (exact[k], k))
    r, foot = exact[k_best], float(target.times[k_best])
    if not math.isfinite(r):
        raise OutOfRangeError(f"no foot point within trust radius {trust_radius:g}")

    lo = target.times[max(k_best - 1, 0)]
    hi = target.times[min(k_best + 1, len(target) - 1)]
    if hi > lo:
        refined = minimize_scalar(
            lambda t: distance(target.point_at(t)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if refined.fun < r or (refined.fun == r and refined.x < foot):
            r, foot = float(refined.fun), float(refined.x)

    v = log_map(M, target.point_at(foot), x, trust_radius)
    geodesic = integrate_geodesic(M, x, v, 1.0, default_steps(r))
    return CurveDistance(r=r, foot=foot, geodesic=geodesic)
