"""
Horizontal lifting and the bundle map between two nearby submersions

Φ(x) is the endpoint of the f2-horizontal lift, starting at x, of the
base geodesic from f2(x) to f1(x); so f2 ∘ Φ = f1. Its differential is
taken by central differences of Φ itself.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from app.config import get_settings
from app.models.report import PhiDiagnostics
from app.services.errors import ChartDomainError, ConditioningError, ContractError, EscapeError
from app.services.geometry import metric_at, norm
from app.services.submersion import (
    SubmersionMap,
    _raw_differential,
    delta_at,
    split_at,
    vertical_projector,
)
from app.services.transport import (
    DiscreteCurve,
    default_steps,
    hermite,
    integrate_geodesic,
    log_map,
)

settings = get_settings()


# ── Horizontal lifts ──────────────────────────────────────────

def horizontal_velocity(f: SubmersionMap, y, w) -> np.ndarray:
    """Unique f-horizontal u at y with df(u) = w: u = g⁻¹Jᵀ(J g⁻¹ Jᵀ)⁻¹ w"""
    y = f.total.domain.check(y)
    J = _raw_differential(f, y)
    g = f.total.metric(y)
    gi_JT = np.linalg.solve(g, J.T)
    restricted = J @ gi_JT
    condition = np.linalg.cond(restricted)
    if not math.isfinite(condition) or condition > settings.conditioning_limit:
        raise ConditioningError(f"horizontal restriction of d{f.name} is near-singular at {y}")
    return gi_JT @ np.linalg.solve(restricted, np.asarray(w, dtype=float))


def horizontal_lift(f: SubmersionMap, base_curve: DiscreteCurve, start) -> DiscreteCurve:
    """RK4 lift of base_curve through start; base velocities interpolated by Hermite cubics"""
    x = f.total.domain.check(start, what="lift start")
    offset = f.base.domain.wrapped_difference(f.evaluate(x), base_curve.points[0])
    if norm(f.base, base_curve.start, offset) > 1e-6:
        raise ContractError(f"lift start does not lie over the base curve start (offset {offset})")

    times = base_curve.times
    points = np.empty((len(base_curve), f.total.dim))
    velocities = np.empty_like(points)
    points[0] = x
    k = 0
    try:
        velocities[0] = horizontal_velocity(f, x, base_curve.velocities[0])
        for k in range(len(base_curve) - 1):
            dt = times[k + 1] - times[k]
            w0, w1 = base_curve.velocities[k], base_curve.velocities[k + 1]
            if dt > 0:
                _, wm = hermite(base_curve.points[k], w0, base_curve.points[k + 1], w1, dt, 0.5)
                k1 = velocities[k]
                k2 = horizontal_velocity(f, x + 0.5 * dt * k1, wm)
                k3 = horizontal_velocity(f, x + 0.5 * dt * k2, wm)
                k4 = horizontal_velocity(f, x + dt * k3, w1)
                x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            points[k + 1] = x
            velocities[k + 1] = horizontal_velocity(f, x, w1)
    except ChartDomainError:
        raise EscapeError(f"horizontal lift left the chart of {f.total.name}", exit_time=float(times[k]))
    return DiscreteCurve(times=times, points=points, velocities=velocities, manifold=f.total)


def lift_tracking_error(f: SubmersionMap, lift: DiscreteCurve, base_curve: DiscreteCurve) -> float:
    """sup over nodes of |f(c(t)) - γ(t)|_h"""
    worst = 0.0
    for c, gamma in zip(lift.points, base_curve.points):
        image = f.evaluate(c)
        worst = max(worst, norm(f.base, image, f.base.domain.wrapped_difference(gamma, image)))
    return worst


# ── The bundle map ────────────────────────────────────────────

def _connecting_geodesic(f: SubmersionMap, source, target, trust_radius: float) -> DiscreteCurve:
    # the lift inherits these nodes
    density = settings.lift_steps_per_unit
    v = log_map(f.base, target, source, trust_radius, density)
    return integrate_geodesic(f.base, source, v, 1.0, default_steps(norm(f.base, source, v), density))


def phi_lift(f1: SubmersionMap, f2: SubmersionMap, x, trust_radius: float) -> DiscreteCurve:
    """The whole f2-horizontal path from x to Φ(x)"""
    x = f1.total.domain.check(x)
    geodesic = _connecting_geodesic(f2, f2.evaluate(x), f1.evaluate(x), trust_radius)
    return horizontal_lift(f2, geodesic, x)


def construct_phi(f1: SubmersionMap, f2: SubmersionMap, x, trust_radius: float) -> np.ndarray:
    if f1.total.dim != f2.total.dim or f1.base.dim != f2.base.dim:
        raise ContractError("bundle map needs submersions sharing total and base")
    return f2.total.domain.wrap(phi_lift(f1, f2, x, trust_radius).points[-1])


@dataclass(eq=False)
class LocalTrivialization:
    """x ↦ (f2(x), φ2(x)) near the fiber over center; φ2 is the identity on that fiber"""
    submersion: SubmersionMap
    center: np.ndarray
    radius: float
    trust_radius: float

    def fiber_point(self, x) -> np.ndarray:
        f = self.submersion
        x = f.total.domain.check(x)
        geodesic = _connecting_geodesic(f, f.evaluate(x), self.center, self.trust_radius)
        if norm(f.base, geodesic.start, geodesic.velocities[0]) >= self.radius:
            raise ContractError(f"{x} lies outside the trivialized neighbourhood of radius {self.radius:g}")
        return f.total.domain.wrap(horizontal_lift(f, geodesic, x).points[-1])

    def __call__(self, x) -> Tuple[np.ndarray, np.ndarray]:
        return self.submersion.evaluate(x), self.fiber_point(x)


def local_trivialization(f2: SubmersionMap, p, r: float, trust_radius: Optional[float] = None) -> LocalTrivialization:
    trust_radius = trust_radius if trust_radius is not None else r
    if r > trust_radius:
        raise ContractError(f"trivialization radius {r:g} exceeds trust radius {trust_radius:g}")
    return LocalTrivialization(
        submersion=f2, center=f2.base.domain.check(p), radius=r, trust_radius=trust_radius
    )


# ── Differential diagnostics ──────────────────────────────────

def phi_jacobian(f1: SubmersionMap, f2: SubmersionMap, x, trust_radius: float, fd_step: Optional[float] = None) -> np.ndarray:
    """dΦ at x by central differences of construct_phi"""
    M = f1.total
    x = M.domain.check(x)
    h = fd_step or M.fd_step
    columns = []
    for c in range(M.dim):
        e = np.zeros(M.dim)
        e[c] = h
        plus = construct_phi(f1, f2, M.domain.check(x + e, what="finite-difference stencil point"), trust_radius)
        minus = construct_phi(f1, f2, M.domain.check(x - e, what="finite-difference stencil point"), trust_radius)
        columns.append(M.domain.wrapped_difference(plus, minus) / (2 * h))
    return np.stack(columns, axis=1)


def phi_diagnostics(
    f1: SubmersionMap,
    f2: SubmersionMap,
    x,
    trust_radius: float,
    fd_step: Optional[float] = None,
    c0: Optional[float] = None,
) -> PhiDiagnostics:
    """
    dΦ decomposition at x: singular values in the g metrics, the f2-vertical
    (top) and f2-horizontal (bottom) parts of dΦ on f1-horizontal vectors,
    and leakage of f1-vertical vectors out of the f2-vertical space.
    """
    M = f1.total
    x = M.domain.check(x)
    phi_x = construct_phi(f1, f2, x, trust_radius)
    dphi = phi_jacobian(f1, f2, x, trust_radius, fd_step)

    L_x = metric_at(M, x).factor
    L_phi = metric_at(M, phi_x).factor
    normalized = L_phi.T @ linalg.solve_triangular(L_x, dphi.T, lower=True).T
    singular_values = np.linalg.svd(normalized, compute_uv=False)

    split1 = split_at(f1, x)
    P_vertical = vertical_projector(f2, phi_x)
    P_horizontal = np.eye(M.dim) - P_vertical

    horizontal_images = dphi @ split1.horizontal.T
    top = np.linalg.svd(L_phi.T @ (P_vertical @ horizontal_images), compute_uv=False)
    bottom = np.linalg.svd(L_phi.T @ (P_horizontal @ horizontal_images), compute_uv=False)
    if split1.vertical.shape[0]:
        leakage = np.linalg.svd(L_phi.T @ (P_horizontal @ dphi @ split1.vertical.T), compute_uv=False)[0]
    else:
        leakage = 0.0

    p = f1.evaluate(x)
    residual = norm(f1.base, p, f1.base.domain.wrapped_difference(f2.evaluate(phi_x), p))
    offset = f1.base.domain.wrapped_difference(f2.evaluate(x), p)
    epsilon = max(delta_at(f1, x), delta_at(f2, phi_x), norm(f1.base, p, offset))

    top_norm = float(top[0]) if top.size else 0.0
    fitted = None
    if c0:
        fitted = top_norm / (2.0 * math.exp(4 * epsilon + math.exp(epsilon) * c0) * c0)

    return PhiDiagnostics(
        point=x.tolist(),
        phi_point=phi_x.tolist(),
        commutation_residual=float(residual),
        singular_values=[float(s) for s in singular_values],
        vertical_leakage=float(leakage),
        horizontal_top_norm=top_norm,
        horizontal_bot_range=(float(bottom[-1]), float(bottom[0])),
        measured_epsilon=float(epsilon),
        fitted_top_constant=fitted,
        jacobian=dphi.tolist(),
    )


def transversality_check(
    f1: SubmersionMap, f2: SubmersionMap, p, x, trust_radius: float, fd_step: Optional[float] = None
) -> float:
    """Min singular value of dφ2 on the f1-vertical space at x (0 iff dΦ singular there)"""
    M = f1.total
    x = M.domain.check(x)
    trivialization = local_trivialization(f2, p, trust_radius, trust_radius)
    vertical = split_at(f1, x).vertical
    if vertical.shape[0] == 0:
        return math.inf
    h = fd_step or M.fd_step
    images = []
    for v in vertical:
        plus = trivialization.fiber_point(M.domain.check(x + h * v, what="finite-difference stencil point"))
        minus = trivialization.fiber_point(M.domain.check(x - h * v, what="finite-difference stencil point"))
        images.append(M.domain.wrapped_difference(plus, minus) / (2 * h))
    y = trivialization.fiber_point(x)
    factor = metric_at(M, y).factor
    return float(np.linalg.svd(factor.T @ np.stack(images, axis=1), compute_uv=False)[-1])


@dataclass(eq=False)
class BijectivityReport:
    min_separation_ratio: float
    covering_gap: float
    points: int


def bijectivity_check(
    f1: SubmersionMap, f2: SubmersionMap, grid_points: np.ndarray, trust_radius: float, grid_shape: Sequence[int]
) -> BijectivityReport:
    """
    Grid consequences of Φ being a bijection: neighbouring grid points keep
    a positive image separation, and every grid point has a nearby image.
    """
    M = f1.total
    grid_points = np.asarray(grid_points, dtype=float)
    images = np.array([construct_phi(f1, f2, x, trust_radius) for x in grid_points])
    shaped = np.arange(len(grid_points)).reshape(tuple(grid_shape))

    ratio = math.inf
    for axis in range(shaped.ndim):
        first = np.take(shaped, range(shaped.shape[axis] - 1), axis=axis).ravel()
        second = np.take(shaped, range(1, shaped.shape[axis]), axis=axis).ravel()
        for a, b in zip(first, second):
            step = norm(M, grid_points[a], M.domain.wrapped_difference(grid_points[b], grid_points[a]))
            moved = norm(M, images[a], M.domain.wrapped_difference(images[b], images[a]))
            ratio = min(ratio, moved / step)

    gap = 0.0
    for y in grid_points:
        g = metric_at(M, y).g
        diffs = M.domain.wrapped_difference(images, y)
        gap = max(gap, float(np.sqrt(np.min(np.einsum("ni,ij,nj->n", diffs, g, diffs)))))
    return BijectivityReport(min_separation_ratio=float(ratio), covering_gap=gap, points=len(grid_points))
