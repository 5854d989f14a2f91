"""
Pointwise submersion invariants

Differential, vertical/horizontal splitting, δ-distortion, the second
fundamental form of the fibers, the integrability tensor of the
horizontal distribution, dihedral angles and map distance.

Norm conventions (echoed in every report):
    |II| = Euclidean norm over horizontal components of the max |eigenvalue|
           of each component restricted to g-unit vertical vectors
    |A|  = max over g-orthonormal horizontal pairs (i < j) of |A(X_i, X_j)|_g
"""

from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from app.config import get_settings
from app.services.errors import ContractError, NotASubmersionError
from app.services.geometry import (
    ChartedManifold,
    TangentVector,
    christoffel_symbols,
    metric_at,
)
from app.services.transport import geodesic_distance

settings = get_settings()

II_CONVENTION = "sup over g-unit vertical T of |II(T,T)|, per-component eigenvalue max, Euclidean across components"
A_CONVENTION = "max over g-orthonormal horizontal pairs i<j of |A(X_i,X_j)|_g"
DIHEDRAL_CONVENTION = "largest principal angle in the g inner product (angular Hausdorff metric)"


@dataclass(frozen=True, eq=False)
class SubmersionMap:
    name: str
    total: ChartedManifold
    base: ChartedManifold
    map_field: Callable[[np.ndarray], np.ndarray]
    jacobian_field: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step: float = field(default_factory=lambda: settings.fd_step)

    def __post_init__(self):
        if self.base.dim > self.total.dim:
            raise ContractError("base dimension exceeds total dimension")

    @property
    def fiber_dim(self) -> int:
        return self.total.dim - self.base.dim

    def evaluate(self, x) -> np.ndarray:
        x = self.total.domain.check(x)
        return self.base.domain.check(np.asarray(self.map_field(x), dtype=float), what=f"image under {self.name}")

    def rescaled(self, total_factor: float, base_factor: float) -> "SubmersionMap":
        return replace(self, total=self.total.rescaled(total_factor), base=self.base.rescaled(base_factor))


@dataclass(frozen=True, eq=False)
class VerticalSplit:
    point: np.ndarray
    vertical: np.ndarray    # rows: g-orthonormal basis of ker df
    horizontal: np.ndarray  # rows: g-orthonormal basis of its complement
    singular_values: np.ndarray

    @property
    def vertical_basis(self) -> List[TangentVector]:
        return [TangentVector(self.point, v) for v in self.vertical]

    @property
    def horizontal_basis(self) -> List[TangentVector]:
        return [TangentVector(self.point, h) for h in self.horizontal]


@dataclass(frozen=True, eq=False)
class TensorEvaluation:
    components: np.ndarray
    norm: float


# ── Differential and splitting ────────────────────────────────

def _raw_differential(f: SubmersionMap, x: np.ndarray) -> np.ndarray:
    if f.jacobian_field is not None:
        return np.asarray(f.jacobian_field(x), dtype=float)
    h = f.fd_step
    columns = []
    for a in range(f.total.dim):
        e = np.zeros(f.total.dim)
        e[a] = h
        plus = f.evaluate(f.total.domain.check(x + e, what="finite-difference stencil point"))
        minus = f.evaluate(f.total.domain.check(x - e, what="finite-difference stencil point"))
        columns.append(f.base.domain.wrapped_difference(plus, minus) / (2 * h))
    return np.stack(columns, axis=1)


def metric_jacobian(f: SubmersionMap, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(J, Ĵ, L_g): Ĵ = L_h^T J L_g^{-T} is df in orthonormal frames"""
    x = f.total.domain.check(x)
    J = _raw_differential(f, x)
    if J.shape != (f.base.dim, f.total.dim):
        raise ContractError(f"Jacobian of {f.name} has shape {J.shape}")
    L_g = metric_at(f.total, x).factor
    L_h = metric_at(f.base, f.evaluate(x)).factor
    J_hat = linalg.solve_triangular(L_g, J.T @ L_h, lower=True).T
    return J, J_hat, L_g


def differential_at(f: SubmersionMap, x) -> np.ndarray:
    """n×m chart Jacobian; raises NotASubmersionError below full rank"""
    J, J_hat, _ = metric_jacobian(f, x)
    sigma = np.linalg.svd(J_hat, compute_uv=False)
    if sigma.size and sigma[-1] <= 1e-8:
        raise NotASubmersionError(f"{f.name} is rank deficient at {np.asarray(x)} (σ_min {sigma[-1]:.3e})")
    return J


def singular_values_at(f: SubmersionMap, x) -> np.ndarray:
    """Singular values of df on the horizontal space, descending"""
    return split_at(f, x).singular_values


def split_at(f: SubmersionMap, x) -> VerticalSplit:
    x = f.total.domain.check(x)
    _, J_hat, L_g = metric_jacobian(f, x)
    _, sigma, Wt = np.linalg.svd(J_hat, full_matrices=True)
    n = f.base.dim
    if sigma[-1] <= 1e-8:
        raise NotASubmersionError(f"{f.name} is rank deficient at {x} (σ_min {sigma[-1]:.3e})")
    # orthonormal w ↦ chart u = L_g^{-T} w
    chart = linalg.solve_triangular(L_g.T, Wt.T, lower=False).T
    return VerticalSplit(point=x, vertical=chart[n:], horizontal=chart[:n], singular_values=sigma)


def delta_at(f: SubmersionMap, x) -> float:
    sigma = singular_values_at(f, x)
    return float(max(abs(np.log(sigma[0])), abs(np.log(sigma[-1]))))


def vertical_projector(f: SubmersionMap, x) -> np.ndarray:
    """g-orthogonal projection onto ker df as a chart matrix"""
    split = split_at(f, x)
    g = metric_at(f.total, x).g
    return split.vertical.T @ split.vertical @ g


def _projector_derivatives(f: SubmersionMap, x: np.ndarray) -> np.ndarray:
    """dP[c] = ∂_c P_V with step total.fd_step"""
    h = f.total.fd_step
    m = f.total.dim
    dP = np.empty((m, m, m))
    for c in range(m):
        e = np.zeros(m)
        e[c] = h
        plus = vertical_projector(f, f.total.domain.check(x + e, what="finite-difference stencil point"))
        minus = vertical_projector(f, f.total.domain.check(x - e, what="finite-difference stencil point"))
        dP[c] = (plus - minus) / (2 * h)
    return dP


# ── O'Neill-type tensors ──────────────────────────────────────

def second_fundamental_form_at(f: SubmersionMap, x) -> TensorEvaluation:
    """
    components[a, i, j] = <∇_{T_i} T_j, X_a>_g for the vertical frame T
    extended by T̃(y) = P_V(y) T, and horizontal frame X at x.
    """
    x = f.total.domain.check(x)
    split = split_at(f, x)
    V, H = split.vertical, split.horizontal
    k, n = V.shape[0], H.shape[0]
    if k == 0:
        return TensorEvaluation(components=np.zeros((n, 0, 0)), norm=0.0)
    g = metric_at(f.total, x).g
    dP = _projector_derivatives(f, x)
    gamma = christoffel_symbols(f.total, x)
    derivative = np.einsum("ckl,jl,ic->ijk", dP, V, V)
    covariant = derivative + np.einsum("kab,ia,jb->ijk", gamma, V, V)
    covariant = 0.5 * (covariant + covariant.transpose(1, 0, 2))
    components = np.einsum("ijk,kl,al->aij", covariant, g, H)
    per_component = [np.max(np.abs(np.linalg.eigvalsh(c))) for c in components]
    return TensorEvaluation(components=components, norm=float(np.sqrt(np.sum(np.square(per_component)))))


def integrability_tensor_at(f: SubmersionMap, x) -> TensorEvaluation:
    """
    components[i, j, b] = <[X̃_i, X̃_j], T_b>_g with X̃(y) = P_H(y) X,
    i.e. the vertical part of brackets of horizontal frame fields.
    """
    x = f.total.domain.check(x)
    split = split_at(f, x)
    V, H = split.vertical, split.horizontal
    k, n = V.shape[0], H.shape[0]
    if k == 0 or n < 2:
        return TensorEvaluation(components=np.zeros((n, n, k)), norm=0.0)
    g = metric_at(f.total, x).g
    dP_horizontal = -_projector_derivatives(f, x)
    # derivative[i, j] = ∂_{X_i} X̃_j
    derivative = np.einsum("ckl,jl,ic->ijk", dP_horizontal, H, H)
    bracket = derivative - derivative.transpose(1, 0, 2)
    components = np.einsum("ijk,kl,bl->ijb", bracket, g, V)
    pair_norms = [
        np.linalg.norm(components[i, j]) for i in range(n) for j in range(i + 1, n)
    ]
    return TensorEvaluation(components=components, norm=float(max(pair_norms)))


# ── Subspace geometry ─────────────────────────────────────────

def _orthonormal_images(M: ChartedManifold, x, basis: np.ndarray) -> np.ndarray:
    """Columns: Euclidean images L^T v of the basis rows"""
    factor = metric_at(M, x).factor
    images = factor.T @ np.atleast_2d(np.asarray(basis, dtype=float)).T
    if np.linalg.matrix_rank(images, tol=1e-10) < images.shape[1]:
        raise ContractError("subspace basis is not g-independent")
    return images


def dihedral_angle(M: ChartedManifold, x, V1, V2) -> float:
    """Largest principal angle between span(V1) and span(V2) in the g inner product"""
    V1 = np.atleast_2d(np.asarray(V1, dtype=float))
    V2 = np.atleast_2d(np.asarray(V2, dtype=float))
    if V1.shape != V2.shape:
        raise ContractError(f"subspace dimensions differ: {V1.shape[0]} vs {V2.shape[0]}")
    if V1.shape[0] == 0:
        return 0.0
    # canonical order makes the result exactly symmetric
    if V1.tobytes() > V2.tobytes():
        V1, V2 = V2, V1
    angles = linalg.subspace_angles(_orthonormal_images(M, x, V1), _orthonormal_images(M, x, V2))
    return float(np.max(angles))


def sampled_hausdorff_angle(M: ChartedManifold, x, V1, V2, samples: int = None, seed: int = 0) -> float:
    """Angular Hausdorff distance between the unit spheres of two subspaces, by sampling"""
    samples = samples or settings.hausdorff_samples
    rng = np.random.default_rng(seed)
    Q1, _ = np.linalg.qr(_orthonormal_images(M, x, V1))
    Q2, _ = np.linalg.qr(_orthonormal_images(M, x, V2))

    def one_sided(Qa: np.ndarray, Qb: np.ndarray) -> float:
        coeffs = rng.standard_normal((Qa.shape[1], samples))
        coeffs = np.hstack([np.eye(Qa.shape[1]), coeffs])
        units = Qa @ (coeffs / np.linalg.norm(coeffs, axis=0))
        cosines = np.clip(np.linalg.norm(Qb.T @ units, axis=0), 0.0, 1.0)
        return float(np.max(np.arccos(cosines)))

    return max(one_sided(Q1, Q2), one_sided(Q2, Q1))


def map_distance(f1: SubmersionMap, f2: SubmersionMap, points: Sequence[Sequence[float]], trust_radius: float) -> float:
    """max over points of d_h(f1(x), f2(x))"""
    if f1.base.dim != f2.base.dim or f1.total.dim != f2.total.dim:
        raise ContractError("map_distance needs maps sharing total and base")
    worst = 0.0
    for x in points:
        worst = max(worst, geodesic_distance(f1.base, f1.evaluate(x), f2.evaluate(x), trust_radius))
    return worst
