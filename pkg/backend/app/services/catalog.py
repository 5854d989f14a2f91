"""
Catalog of closed-form charted manifolds and submersions

Every manifold here ships a closed-form Christoffel field; the finite
difference path in geometry.py is exercised by the tests against these.
"""

import math
from typing import Callable

import numpy as np

from app.services.geometry import ChartDomain, ChartedManifold
from app.services.submersion import SubmersionMap

TWO_PI = 2.0 * math.pi


# ── Flat spaces ───────────────────────────────────────────────

def flat_torus(dim: int = 2) -> ChartedManifold:
    return ChartedManifold(
        name=f"flat_torus{dim}",
        domain=ChartDomain(lower=(0.0,) * dim, upper=(TWO_PI,) * dim, periodic=(True,) * dim),
        metric_field=lambda x: np.eye(dim),
        christoffel_field=lambda x: np.zeros((dim, dim, dim)),
    )


def circle() -> ChartedManifold:
    return flat_torus(1)


def flat_plane(half_width: float = 10.0) -> ChartedManifold:
    return ChartedManifold(
        name="flat_plane",
        domain=ChartDomain(lower=(-half_width,) * 2, upper=(half_width,) * 2, periodic=(False, False)),
        metric_field=lambda x: np.eye(2),
        christoffel_field=lambda x: np.zeros((2, 2, 2)),
    )


def real_interval(lower: float, upper: float) -> ChartedManifold:
    return ChartedManifold(
        name="interval",
        domain=ChartDomain(lower=(lower,), upper=(upper,), periodic=(False,)),
        metric_field=lambda x: np.eye(1),
        christoffel_field=lambda x: np.zeros((1, 1, 1)),
    )


# ── Spheres ───────────────────────────────────────────────────

def round_sphere(radius: float = 1.0) -> ChartedManifold:
    """S²(radius) in colatitude/longitude (θ, φ), θ ∈ (0, π)"""

    def metric(x):
        return radius ** 2 * np.diag([1.0, math.sin(x[0]) ** 2])

    def christoffel(x):
        s, c = math.sin(x[0]), math.cos(x[0])
        gamma = np.zeros((2, 2, 2))
        gamma[0, 1, 1] = -s * c
        gamma[1, 0, 1] = gamma[1, 1, 0] = c / s
        return gamma

    return ChartedManifold(
        name=f"sphere_r{radius:g}",
        domain=ChartDomain(lower=(0.0, 0.0), upper=(math.pi, TWO_PI), periodic=(False, True)),
        metric_field=metric,
        christoffel_field=christoffel,
    )


def sphere_embedding(radius: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    def embed(x):
        theta, phi = x
        return radius * np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])

    return embed


def sphere_chart(point) -> np.ndarray:
    """Inverse of the unit sphere embedding"""
    p = np.asarray(point, dtype=float)
    p = p / np.linalg.norm(p)
    return np.array([math.acos(max(-1.0, min(1.0, p[2]))), math.atan2(p[1], p[0]) % TWO_PI])


def rotation_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotate_sphere_point(x, angle: float) -> np.ndarray:
    """Chart point of R_x(angle) applied to the unit-sphere point with chart x"""
    return sphere_chart(rotation_x(angle) @ sphere_embedding(1.0)(x))


# ── Curved tori and warped products ───────────────────────────

def perturbed_torus(amplitude: float) -> ChartedManifold:
    """T² with e^{2ψ}(dθ₁² + dθ₂²), ψ = amplitude·sin θ₁ sin θ₂"""

    def psi_gradient(x):
        return amplitude * np.array([math.cos(x[0]) * math.sin(x[1]), math.sin(x[0]) * math.cos(x[1])])

    def metric(x):
        return math.exp(2 * amplitude * math.sin(x[0]) * math.sin(x[1])) * np.eye(2)

    def christoffel(x):
        d = psi_gradient(x)
        eye = np.eye(2)
        return (
            np.einsum("ki,j->kij", eye, d)
            + np.einsum("kj,i->kij", eye, d)
            - np.einsum("ij,k->kij", eye, d)
        )

    return ChartedManifold(
        name=f"perturbed_torus_{amplitude:g}",
        domain=ChartDomain(lower=(0.0, 0.0), upper=(TWO_PI, TWO_PI), periodic=(True, True)),
        metric_field=metric,
        christoffel_field=christoffel,
    )


def warped_plane(b: float) -> ChartedManifold:
    """dr² + w(r)²dθ² with w = 1 + b r², r ∈ (-1, 1)"""

    def metric(x):
        w = 1.0 + b * x[0] ** 2
        return np.diag([1.0, w * w])

    def christoffel(x):
        w, dw = 1.0 + b * x[0] ** 2, 2.0 * b * x[0]
        gamma = np.zeros((2, 2, 2))
        gamma[0, 1, 1] = -w * dw
        gamma[1, 0, 1] = gamma[1, 1, 0] = dw / w
        return gamma

    return ChartedManifold(
        name=f"warped_b{b:g}",
        domain=ChartDomain(lower=(-1.0, 0.0), upper=(1.0, TWO_PI), periodic=(False, True)),
        metric_field=metric,
        christoffel_field=christoffel,
    )


# ── Hopf fibration ────────────────────────────────────────────

def hopf_total() -> ChartedManifold:
    """S³(1) in Hopf coordinates (η, ξ₁, ξ₂): (sin η e^{iξ₁}, cos η e^{iξ₂})"""

    def metric(x):
        return np.diag([1.0, math.sin(x[0]) ** 2, math.cos(x[0]) ** 2])

    def christoffel(x):
        s, c = math.sin(x[0]), math.cos(x[0])
        gamma = np.zeros((3, 3, 3))
        gamma[0, 1, 1] = -s * c
        gamma[0, 2, 2] = s * c
        gamma[1, 0, 1] = gamma[1, 1, 0] = c / s
        gamma[2, 0, 2] = gamma[2, 2, 0] = -s / c
        return gamma

    return ChartedManifold(
        name="hopf_s3",
        domain=ChartDomain(lower=(0.0, 0.0, 0.0), upper=(math.pi / 2, TWO_PI, TWO_PI), periodic=(False, True, True)),
        metric_field=metric,
        christoffel_field=christoffel,
    )


def hopf_map(total: ChartedManifold, base: ChartedManifold, rotation: float = 0.0, name: str = "hopf") -> SubmersionMap:
    """(η, ξ₁, ξ₂) ↦ (2η, ξ₁ - ξ₂) on S²(½), optionally followed by a rotation of S²"""

    def canonical(x):
        return np.array([2.0 * x[0], (x[1] - x[2]) % TWO_PI])

    if rotation == 0.0:
        return SubmersionMap(
            name=name,
            total=total,
            base=base,
            map_field=canonical,
            jacobian_field=lambda x: np.array([[2.0, 0.0, 0.0], [0.0, 1.0, -1.0]]),
        )
    return SubmersionMap(
        name=name,
        total=total,
        base=base,
        map_field=lambda x: rotate_sphere_point(canonical(x), rotation),
    )


# ── Projections ───────────────────────────────────────────────

def coordinate_projection(total: ChartedManifold, base: ChartedManifold, axes, name: str) -> SubmersionMap:
    axes = list(axes)
    jacobian = np.zeros((len(axes), total.dim))
    for row, axis in enumerate(axes):
        jacobian[row, axis] = 1.0
    return SubmersionMap(
        name=name,
        total=total,
        base=base,
        map_field=lambda x: np.asarray(x, dtype=float)[axes],
        jacobian_field=lambda x: jacobian,
    )


def twisted_projection(total: ChartedManifold, base: ChartedManifold, a: float) -> SubmersionMap:
    """(θ₁, θ₂) ↦ θ₂ + a sin θ₂"""
    return SubmersionMap(
        name=f"twisted_a{a:g}",
        total=total,
        base=base,
        map_field=lambda x: np.array([x[1] + a * math.sin(x[1])]),
        jacobian_field=lambda x: np.array([[0.0, 1.0 + a * math.cos(x[1])]]),
    )
