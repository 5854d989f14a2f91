"""
Charted Riemannian manifolds

Single-chart manifolds evaluated pointwise:
- metric g, inverse and Cholesky factor
- Christoffel symbols Γ^k_ij (closed form or central differences)
- Riemann, Ricci and sectional curvature by differencing Γ

Conventions:
    christoffel[k, i, j] = Γ^k_ij
    riemann[k, l, i, j]  = R^k_lij with R(∂_i, ∂_j)∂_l = R^k_lij ∂_k
    ricci[j, l]          = R^k_lkj
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from app.config import get_settings
from app.services.errors import ChartDomainError, ConditioningError

settings = get_settings()

MetricField = Callable[[np.ndarray], np.ndarray]
ChristoffelField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ChartDomain:
    """Axis-aligned chart box; periodic axes have period upper - lower"""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    periodic: Tuple[bool, ...]

    def __post_init__(self):
        if not (len(self.lower) == len(self.upper) == len(self.periodic)):
            raise ValueError("ChartDomain bounds and periodicity flags must have equal length")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("ChartDomain requires lower < upper on every axis")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def periods(self) -> np.ndarray:
        span = np.asarray(self.upper) - np.asarray(self.lower)
        return np.where(self.periodic, span, 0.0)

    def wrap(self, x) -> np.ndarray:
        """Map coordinates into the fundamental domain (periodic axes only)"""
        out = np.array(x, dtype=float)
        for i, is_periodic in enumerate(self.periodic):
            if is_periodic:
                lo = self.lower[i]
                out[..., i] = lo + np.mod(out[..., i] - lo, self.upper[i] - lo)
        return out

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        for i, is_periodic in enumerate(self.periodic):
            if not is_periodic and not (self.lower[i] < x[i] < self.upper[i]):
                return False
        return bool(np.all(np.isfinite(x)))

    def check(self, x, what: str = "point") -> np.ndarray:
        """Wrap x, raising ChartDomainError if it leaves a non-periodic axis"""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ChartDomainError(f"{what} has shape {x.shape}, chart dimension is {self.dim}")
        if not self.contains(x):
            raise ChartDomainError(f"{what} {np.array2string(x, precision=6)} outside chart domain")
        return self.wrap(x)

    def wrapped_difference(self, a, b) -> np.ndarray:
        """a - b, using the shortest representative on periodic axes"""
        diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        for i, is_periodic in enumerate(self.periodic):
            if is_periodic:
                period = self.upper[i] - self.lower[i]
                diff[..., i] = np.mod(diff[..., i] + 0.5 * period, period) - 0.5 * period
        return diff


@dataclass(frozen=True, eq=False)
class ChartedManifold:
    """A Riemannian manifold described by one coordinate chart"""
    name: str
    domain: ChartDomain
    metric_field: MetricField
    christoffel_field: Optional[ChristoffelField] = None
    fd_step: float = field(default_factory=lambda: settings.fd_step)
    scale: float = 1.0  # metric multiplier, see rescaled()

    @property
    def dim(self) -> int:
        return self.domain.dim

    def metric(self, x) -> np.ndarray:
        """Raw metric matrix at an already wrapped point"""
        return self.scale * np.asarray(self.metric_field(x), dtype=float)

    def rescaled(self, factor: float) -> "ChartedManifold":
        """Same chart with metric factor * g (Christoffel symbols unchanged)"""
        if factor <= 0:
            raise ValueError("rescaling factor must be positive")
        return replace(self, name=f"{self.name}*{factor:g}", scale=self.scale * factor)


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: np.ndarray
    components: np.ndarray


@dataclass(frozen=True, eq=False)
class MetricEvaluation:
    g: np.ndarray
    g_inv: np.ndarray
    factor: np.ndarray  # lower Cholesky factor, g = factor @ factor.T
    eigenvalues: np.ndarray

    @property
    def condition(self) -> float:
        return float(self.eigenvalues[-1] / self.eigenvalues[0])


@dataclass(frozen=True, eq=False)
class ChristoffelEvaluation:
    symbols: np.ndarray
    max_abs: float


@dataclass(frozen=True, eq=False)
class CurvatureReport:
    riemann: np.ndarray
    ricci: np.ndarray
    ricci_operator_norm: float
    sectional_range: Tuple[float, float]
    sectional_samples: List[float]


# ── Metric ────────────────────────────────────────────────────

def metric_at(M: ChartedManifold, x) -> MetricEvaluation:
    """Metric, inverse and Cholesky factor at x; checks symmetry and definiteness"""
    x = M.domain.check(x)
    g = M.metric(x)
    if g.shape != (M.dim, M.dim):
        raise ConditioningError(f"metric of {M.name} has shape {g.shape}, expected {(M.dim, M.dim)}")
    if np.max(np.abs(g - g.T)) > 1e-12 * max(1.0, np.max(np.abs(g))):
        raise ConditioningError(f"metric of {M.name} is not symmetric at {x}")
    g = 0.5 * (g + g.T)
    eigenvalues = np.linalg.eigvalsh(g)
    if eigenvalues[0] <= 0:
        raise ConditioningError(f"metric of {M.name} is not positive definite at {x}")
    if eigenvalues[-1] / eigenvalues[0] > settings.conditioning_limit:
        raise ConditioningError(
            f"metric of {M.name} is near-degenerate at {x} "
            f"(condition {eigenvalues[-1] / eigenvalues[0]:.3e})"
        )
    factor = np.linalg.cholesky(g)
    g_inv = linalg.cho_solve((factor, True), np.eye(M.dim))
    return MetricEvaluation(g=g, g_inv=g_inv, factor=factor, eigenvalues=eigenvalues)


def inner(M: ChartedManifold, x, u, v) -> float:
    g = metric_at(M, x).g
    return float(np.asarray(u) @ g @ np.asarray(v))


def norm(M: ChartedManifold, x, v) -> float:
    return float(np.sqrt(max(inner(M, x, v, v), 0.0)))


def orthonormal_frame(M: ChartedManifold, x) -> np.ndarray:
    """Rows form a g-orthonormal basis of T_xM (columns of factor^{-T})"""
    factor = metric_at(M, x).factor
    return linalg.solve_triangular(factor.T, np.eye(M.dim), lower=False).T


def pullback_metric(embedding: Callable[[np.ndarray], np.ndarray], fd_step: float = None) -> MetricField:
    """Metric field J^T J of an ambient embedding, J by central differences"""
    step = fd_step or settings.fd_step

    def metric(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        columns = []
        for a in range(x.shape[0]):
            e = np.zeros_like(x)
            e[a] = step
            columns.append((np.asarray(embedding(x + e)) - np.asarray(embedding(x - e))) / (2 * step))
        jac = np.stack(columns, axis=1)
        return jac.T @ jac

    return metric


# ── Christoffel symbols ───────────────────────────────────────

def _stencil_point(M: ChartedManifold, x: np.ndarray, axis: int, offset: float) -> np.ndarray:
    y = x.copy()
    y[axis] += offset
    return M.domain.check(y, what="finite-difference stencil point")


def metric_derivatives(M: ChartedManifold, x) -> np.ndarray:
    """dg[a, b, c] = ∂_a g_bc by central differences"""
    x = M.domain.check(x)
    h = M.fd_step
    dg = np.empty((M.dim, M.dim, M.dim))
    for a in range(M.dim):
        plus = M.metric(_stencil_point(M, x, a, h))
        minus = M.metric(_stencil_point(M, x, a, -h))
        dg[a] = (plus - minus) / (2 * h)
    return dg


def christoffel_symbols(M: ChartedManifold, x) -> np.ndarray:
    """Γ^k_ij array, symmetric in (i, j)"""
    x = M.domain.check(x)
    if M.christoffel_field is not None:
        gamma = np.asarray(M.christoffel_field(x), dtype=float)
    else:
        g_inv = metric_at(M, x).g_inv
        dg = metric_derivatives(M, x)
        # term[i, j, l] = ∂_i g_jl + ∂_j g_il - ∂_l g_ij
        term = dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)
        gamma = 0.5 * np.einsum("kl,ijl->kij", g_inv, term)
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def christoffel_at(M: ChartedManifold, x) -> ChristoffelEvaluation:
    gamma = christoffel_symbols(M, x)
    return ChristoffelEvaluation(symbols=gamma, max_abs=float(np.max(np.abs(gamma))))


# ── Curvature ─────────────────────────────────────────────────

def riemann_tensor(M: ChartedManifold, x) -> np.ndarray:
    x = M.domain.check(x)
    h = M.fd_step
    gamma = christoffel_symbols(M, x)
    d_gamma = np.empty((M.dim,) + gamma.shape)  # d_gamma[a, k, i, j] = ∂_a Γ^k_ij
    for a in range(M.dim):
        plus = christoffel_symbols(M, _stencil_point(M, x, a, h))
        minus = christoffel_symbols(M, _stencil_point(M, x, a, -h))
        d_gamma[a] = (plus - minus) / (2 * h)
    return (
        np.einsum("ikjl->klij", d_gamma)
        - np.einsum("jkil->klij", d_gamma)
        + np.einsum("kip,pjl->klij", gamma, gamma)
        - np.einsum("kjp,pil->klij", gamma, gamma)
    )


def _sectional(riemann: np.ndarray, g: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    # <R(u, v)v, u> / (|u|^2 |v|^2 - <u, v>^2)
    numerator = np.einsum("ka,a,klij,i,j,l->", g, u, riemann, u, v, v)
    area = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    if area <= 0:
        raise ConditioningError("sectional curvature requested on a degenerate plane")
    return float(numerator / area)


def sectional_planes(dim: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Deterministic plane sample: coordinate planes, plus span(e_i, e_j + e_k) for dim >= 3"""
    eye = np.eye(dim)
    planes = [(eye[i], eye[j]) for i in range(dim) for j in range(i + 1, dim)]
    if dim >= 3:
        for i in range(dim):
            for j in range(dim):
                for k in range(j + 1, dim):
                    if i not in (j, k):
                        planes.append((eye[i], eye[j] + eye[k]))
    return planes


def sectional_curvature(M: ChartedManifold, x, u, v) -> float:
    g = metric_at(M, x).g
    return _sectional(riemann_tensor(M, x), g, np.asarray(u, float), np.asarray(v, float))


def curvature_at(M: ChartedManifold, x) -> CurvatureReport:
    """Riemann, Ricci (contraction), Ricci operator norm and sampled sectional range"""
    evaluation = metric_at(M, x)
    riemann = riemann_tensor(M, x)
    ricci = np.einsum("klkj->jl", riemann)
    ricci = 0.5 * (ricci + ricci.T)
    # Ricci endomorphism g^{-1} Ric is g-self-adjoint: its norm is the largest |generalized eigenvalue|
    operator_eigs = linalg.eigh(ricci, evaluation.g, eigvals_only=True)
    samples = [_sectional(riemann, evaluation.g, u, v) for u, v in sectional_planes(M.dim)]
    sectional_range = (min(samples), max(samples)) if samples else (0.0, 0.0)
    return CurvatureReport(
        riemann=riemann,
        ricci=ricci,
        ricci_operator_norm=float(np.max(np.abs(operator_eigs))),
        sectional_range=(float(sectional_range[0]), float(sectional_range[1])),
        sectional_samples=samples,
    )


def metric_bounds(M: ChartedManifold, points: Iterable[Sequence[float]]) -> Tuple[float, float]:
    """(C, μ): C^{-1} I <= g <= C I and |Γ^k_ij| <= μ over the points"""
    C, mu = 1.0, 0.0
    for x in points:
        eigs = metric_at(M, x).eigenvalues
        C = max(C, float(eigs[-1]), float(1.0 / eigs[0]))
        mu = max(mu, christoffel_at(M, x).max_abs)
    return C, mu
