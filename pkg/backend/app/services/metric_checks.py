"""
Sampled metric-space checks

lcl_check: Q-Lipschitz-co-Lipschitz ball inclusions of a submersion
gha_check: ε-Gromov-Hausdorff approximation of a supplied correspondence

Both are sampled: a pass means no counterexample among the samples.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import linalg

from app.config import get_settings
from app.services.bundle_map import horizontal_lift
from app.services.errors import LabError
from app.services.geometry import ChartedManifold, metric_at
from app.services.submersion import SubmersionMap
from app.services.transport import (
    curve_length,
    default_steps,
    exp_map,
    geodesic_distance,
    integrate_geodesic,
    log_map,
)

settings = get_settings()

DistanceMatrix = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(eq=False)
class LcLReport:
    passed: bool
    Q: float
    r: float
    point: List[float]
    samples: int
    witness: Optional[List[float]] = None
    witness_kind: Optional[str] = None  # "forward" | "backward"
    worst_forward_ratio: float = 0.0
    conventions: List[str] = field(default_factory=list)


@dataclass(eq=False)
class GHAReport:
    passed: bool
    epsilon: float
    worst_distortion: float
    density_gap: float
    max_displacement: Optional[float] = None
    worst_pair: Optional[List[int]] = None


def _ball_samples(M: ChartedManifold, x: np.ndarray, r: float, budget: int, rng: np.random.Generator) -> np.ndarray:
    """Initial velocities: half uniform in the g-ball of radius r, half just inside its sphere"""
    inside = budget // 2
    directions = rng.standard_normal((budget, M.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = np.full(budget, r * (1 - 1e-9))
    radii[:inside] = r * rng.uniform(size=inside) ** (1.0 / M.dim)
    # orthonormal w ↦ chart L^{-T} w
    factor = metric_at(M, x).factor
    return linalg.solve_triangular(factor.T, (directions * radii[:, None]).T, lower=False).T


def lcl_check(
    f: SubmersionMap,
    Q: float,
    x,
    r: float,
    sample_budget: Optional[int] = None,
    seed: int = 0,
    tolerance: Optional[float] = None,
    trust_radius: Optional[float] = None,
) -> LcLReport:
    """
    Forward: f(B_r(x)) ⊂ B_{Qr}(f(x)) on exp-mapped samples of B_r(x).
    Backward: each sample z of B_{r/Q}(f(x)) is reached by a horizontal lift
    of length ≤ r from x, or lies within tolerance·r of a forward image.
    """
    if Q < 1:
        raise ValueError("Q must be at least 1")
    budget = sample_budget or settings.lcl_sample_budget
    tolerance = settings.lcl_tolerance if tolerance is None else tolerance
    trust_radius = trust_radius or 4 * Q * r
    rng = np.random.default_rng(seed)
    conventions = [
        f"backward inclusion accepts a base sample within {tolerance:g}·r of a forward image",
        "forward inclusion allows a relative slack of 1e-9",
    ]
    x = f.total.domain.check(x)
    p = f.evaluate(x)

    forward_images = []
    worst_ratio = 0.0
    for u in _ball_samples(f.total, x, r, budget, rng):
        y = exp_map(f.total, x, u, default_steps(r))
        image = f.evaluate(y)
        forward_images.append(image)
        d = geodesic_distance(f.base, p, image, trust_radius)
        worst_ratio = max(worst_ratio, d / r)
        if d > Q * r * (1 + 1e-9):
            return LcLReport(
                passed=False, Q=Q, r=r, point=x.tolist(), samples=budget,
                witness=y.tolist(), witness_kind="forward", worst_forward_ratio=worst_ratio, conventions=conventions,
            )
    forward_images = np.array(forward_images)

    h_p = metric_at(f.base, p).g
    for w in _ball_samples(f.base, p, r / Q, budget, rng):
        z = exp_map(f.base, p, w, default_steps(r / Q))
        if _lift_reaches(f, x, p, z, r, trust_radius):
            continue
        diffs = f.base.domain.wrapped_difference(forward_images, z)
        nearest = math.sqrt(float(np.min(np.einsum("ni,ij,nj->n", diffs, h_p, diffs))))
        if nearest > tolerance * r:
            return LcLReport(
                passed=False, Q=Q, r=r, point=x.tolist(), samples=2 * budget,
                witness=z.tolist(), witness_kind="backward", worst_forward_ratio=worst_ratio, conventions=conventions,
            )
    return LcLReport(
        passed=True, Q=Q, r=r, point=x.tolist(), samples=2 * budget,
        worst_forward_ratio=worst_ratio, conventions=conventions,
    )


def _lift_reaches(f: SubmersionMap, x, p, z, r: float, trust_radius: float) -> bool:
    try:
        v = log_map(f.base, z, p, trust_radius)
        geodesic = integrate_geodesic(f.base, p, v, 1.0, default_steps(r))
        return curve_length(horizontal_lift(f, geodesic, x)) <= r * (1 + 1e-9)
    except LabError:
        return False


def flat_distance(periods: Sequence[float]) -> DistanceMatrix:
    """Pairwise Euclidean distance with wrap on axes of positive period"""
    periods = np.asarray(periods, dtype=float)

    def matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        diff = np.asarray(a, float)[:, None, :] - np.asarray(b, float)[None, :, :]
        safe = np.where(periods > 0, periods, 1.0)
        wrapped = np.where(periods > 0, np.mod(diff + 0.5 * safe, safe) - 0.5 * safe, diff)
        return np.linalg.norm(wrapped, axis=-1)

    return matrix


def gha_check(
    pairs_x: np.ndarray,
    pairs_y: np.ndarray,
    epsilon: float,
    dist_x: DistanceMatrix,
    dist_y: DistanceMatrix,
    y_sample: Optional[np.ndarray] = None,
    same_space: bool = False,
) -> GHAReport:
    """
    Correspondence x_i ↔ y_i: worst |d_Y(y_i, y_j) - d_X(x_i, x_j)| and
    the density gap of {y_i} in y_sample (defaults to the images).
    """
    pairs_x = np.asarray(pairs_x, dtype=float)
    pairs_y = np.asarray(pairs_y, dtype=float)
    if len(pairs_x) != len(pairs_y):
        raise ValueError("correspondence sides must have equal length")
    distortion = np.abs(dist_y(pairs_y, pairs_y) - dist_x(pairs_x, pairs_x))
    upper = np.triu(distortion, k=1)
    i, j = np.unravel_index(int(np.argmax(upper)), upper.shape)
    worst = float(upper[i, j])

    sample = pairs_y if y_sample is None else np.asarray(y_sample, dtype=float)
    gap = float(np.max(np.min(dist_y(sample, pairs_y), axis=1)))

    displacement = None
    if same_space:
        displacement = float(np.max(np.diag(dist_x(pairs_x, pairs_y))))
    return GHAReport(
        passed=bool(worst < epsilon and gap < epsilon),
        epsilon=float(epsilon),
        worst_distortion=worst,
        density_gap=gap,
        max_displacement=displacement,
        worst_pair=[int(i), int(j)],
    )
