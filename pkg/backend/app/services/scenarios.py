"""
Scenario registry

Closed-form geometries wired into (total, base, f1, f2) with declared
trust radius, sample box, asserted hypotheses and oracles. Oracles are
checked against the generic pipeline when a scenario is built.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type

import numpy as np
from pydantic import ValidationError
from scipy.optimize import brentq

from app.config import get_settings
from app.models.scenario import (
    FlatTorusPairParams,
    HopfParams,
    PerturbedTorusParams,
    PlaneCurvesParams,
    ScenarioInfo,
    ScenarioParams,
    Torus3OrthogonalParams,
    WarpedProductParams,
)
from app.services import catalog
from app.services.bundle_map import construct_phi, phi_jacobian, transversality_check
from app.services.errors import (
    ContractError,
    OracleMismatchError,
    ScenarioNotFoundError,
    ScenarioParamsError,
)
from app.services.geometry import ChartedManifold, metric_at
from app.services.submersion import (
    SubmersionMap,
    delta_at,
    integrability_tensor_at,
    second_fundamental_form_at,
)
from app.services.transport import (
    DiscreteCurve,
    default_steps,
    integrate_geodesic,
    sample_curve,
    unit_speed_curve,
)

settings = get_settings()

Oracle = Callable[[np.ndarray], Any]


@dataclass(frozen=True, eq=False)
class OracleCheck:
    """expected(x) vs measured(x) on the validation grid, compared in max-abs"""
    name: str
    expected: Oracle
    measured: Oracle
    tolerance: float
    wrap: Optional[ChartedManifold] = None  # compare chart points with periodic wrap


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    params: Dict[str, float]
    total: ChartedManifold
    base: ChartedManifold
    f1: SubmersionMap
    f2: SubmersionMap
    trust_radius: float
    sample_lower: Tuple[float, ...]
    sample_upper: Tuple[float, ...]
    asserted: Dict[str, Any] = field(default_factory=dict)
    constants: Dict[str, float] = field(default_factory=dict)
    oracles: Dict[str, Oracle] = field(default_factory=dict)
    checks: List[OracleCheck] = field(default_factory=list)
    curve_pair: Optional[Callable[[float], Tuple[DiscreteCurve, DiscreteCurve]]] = None

    @property
    def maps(self) -> List[Tuple[str, SubmersionMap]]:
        """Distinct submersions of the pair"""
        return [("f1", self.f1)] if self.f2 is self.f1 else [("f1", self.f1), ("f2", self.f2)]

    def _full_period(self, axis: int) -> bool:
        domain = self.total.domain
        span = self.sample_upper[axis] - self.sample_lower[axis]
        return domain.periodic[axis] and abs(span - (domain.upper[axis] - domain.lower[axis])) < 1e-12

    @property
    def full_period_grid(self) -> bool:
        return all(self._full_period(i) for i in range(self.total.dim))

    def grid(self, counts: Sequence[int]) -> np.ndarray:
        """Deterministic product grid in the sample box, shape (∏counts, dim)"""
        if len(counts) != self.total.dim:
            raise ContractError(f"grid needs {self.total.dim} counts, got {len(counts)}")
        axes = []
        for i, n in enumerate(counts):
            lo, hi = self.sample_lower[i], self.sample_upper[i]
            if self._full_period(i):
                axes.append(lo + (hi - lo) * np.arange(n) / n)
            elif n == 1:
                axes.append(np.array([0.5 * (lo + hi)]))
            else:
                axes.append(np.linspace(lo, hi, n))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


# ── Closed-form helpers ───────────────────────────────────────

def twisted_root(theta: float, a: float) -> float:
    """σ with σ + a sin σ = θ"""
    if a == 0:
        return theta
    return brentq(lambda s: s + a * math.sin(s) - theta, theta - a, theta + a, xtol=1e-15)


def _plane_curves(radius: float) -> Callable[[float], Tuple[DiscreteCurve, DiscreteCurve]]:
    plane = catalog.flat_plane()

    def build(s_max: float) -> Tuple[DiscreteCurve, DiscreteCurve]:
        alpha = sample_curve(
            plane,
            lambda s: (radius * math.sin(s / radius), radius * (1 - math.cos(s / radius))),
            lambda s: (math.cos(s / radius), math.sin(s / radius)),
            0.0, s_max, 512,
        )
        beta = sample_curve(plane, lambda t: (t, 0.0), lambda t: (1.0, 0.0), 0.0, s_max + 0.5, 512)
        return alpha, beta

    return build


def _perturbed_curves(M: ChartedManifold) -> Callable[[float], Tuple[DiscreteCurve, DiscreteCurve]]:
    start = np.array([math.pi / 2, math.pi / 2])

    def build(s_max: float) -> Tuple[DiscreteCurve, DiscreteCurve]:
        alpha = unit_speed_curve(
            M,
            lambda u: start + np.array([math.sin(u), 1 - math.cos(u)]),
            lambda u: np.array([math.cos(u), math.sin(u)]),
            s_max, 512,
        )
        duration = s_max + 0.5
        beta = integrate_geodesic(M, start, alpha.velocities[0], duration, default_steps(duration))
        return alpha, beta

    return build


def _tensor_checks(f: SubmersionMap, ii: Oracle, a: Oracle, ii_tol: float, a_tol: float) -> List[OracleCheck]:
    return [
        OracleCheck(f"{f.name}.ii_norm", ii, lambda x: second_fundamental_form_at(f, x).norm, ii_tol),
        OracleCheck(f"{f.name}.a_norm", a, lambda x: integrability_tensor_at(f, x).norm, a_tol),
    ]


# ── Builders ──────────────────────────────────────────────────

def _flat_torus_pair(params: FlatTorusPairParams) -> Scenario:
    a = params.a
    total, base = catalog.flat_torus(2), catalog.circle()
    f1 = catalog.coordinate_projection(total, base, [1], "canonical")
    f2 = f1 if a == 0 else catalog.twisted_projection(total, base, a)
    trust = 1.0

    def phi_oracle(x):
        return np.array([x[0], twisted_root(x[1], a)])

    def dphi_oracle(x):
        return np.diag([1.0, 1.0 / (1.0 + a * math.cos(twisted_root(x[1], a)))])

    def delta_oracle(x):
        return abs(math.log(1.0 + a * math.cos(x[1])))

    zero = lambda x: 0.0
    checks = [
        OracleCheck("phi", phi_oracle, lambda x: construct_phi(f1, f2, x, trust), 1e-6, wrap=total),
        OracleCheck("f2.delta", delta_oracle, lambda x: delta_at(f2, x), 1e-8),
        *_tensor_checks(f2, zero, zero, 1e-5, 1e-5),
    ]
    return Scenario(
        name="flat_torus_pair",
        params=params.model_dump(),
        total=total, base=base, f1=f1, f2=f2,
        trust_radius=trust,
        sample_lower=(0.0, 0.0), sample_upper=(catalog.TWO_PI, catalog.TWO_PI),
        asserted={
            "sec_total_abs_max": 0.0,
            "sec_base_abs_max": 0.0,
            "injectivity_radius_base": math.pi,
            "fibers_compact": True,
        },
        constants={
            "delta_sup": -math.log(1.0 - a),
            "expansion_sup": math.log(1.0 + a),
            "map_distance_sup": a,
            "sharpness_gap": 1.0 / (1.0 - a) ** 2 - 1.0,
        },
        oracles={"phi": phi_oracle, "dphi": dphi_oracle, "delta": delta_oracle},
        checks=checks,
    )


def _hopf(params: HopfParams) -> Scenario:
    total, base = catalog.hopf_total(), catalog.round_sphere(0.5)
    f1 = catalog.hopf_map(total, base, 0.0, "hopf")
    f2 = f1 if params.rotation == 0 else catalog.hopf_map(total, base, params.rotation, "hopf_rotated")
    zero = lambda x: 0.0
    checks = [
        OracleCheck("hopf.delta", zero, lambda x: delta_at(f1, x), 1e-6),
        *_tensor_checks(f1, zero, lambda x: 2.0, 1e-4, 1e-3),
    ]
    if f2 is not f1:
        checks.append(OracleCheck("hopf_rotated.delta", zero, lambda x: delta_at(f2, x), 1e-5))
    return Scenario(
        name="hopf",
        params=params.model_dump(),
        total=total, base=base, f1=f1, f2=f2,
        trust_radius=0.5,
        sample_lower=(math.pi / 8, 0.0, 0.0),
        sample_upper=(3 * math.pi / 8, catalog.TWO_PI, catalog.TWO_PI),
        asserted={
            "sec_total_abs_max": 1.0,
            "sec_base_abs_max": 4.0,
            "injectivity_radius_base": math.pi / 2,
            "fibers_compact": True,
            "fibers_totally_geodesic": True,
        },
        constants={"ii_norm": 0.0, "a_norm": 2.0, "map_distance_sup": params.rotation / 2},
        oracles={"delta": zero, "ii_norm": zero, "a_norm": lambda x: 2.0},
        checks=checks,
    )


def _warped_product(params: WarpedProductParams) -> Scenario:
    b = params.b
    total, base = catalog.warped_plane(b), catalog.real_interval(-1.0, 1.0)
    f = catalog.coordinate_projection(total, base, [0], "radial")

    def ii_oracle(x):
        return abs(2 * b * x[0] / (1 + b * x[0] ** 2))

    return Scenario(
        name="warped_product",
        params=params.model_dump(),
        total=total, base=base, f1=f, f2=f,
        trust_radius=0.5,
        sample_lower=(-0.5, 0.0), sample_upper=(0.5, catalog.TWO_PI),
        asserted={"sec_base_abs_max": 0.0, "fibers_compact": True},
        oracles={"ii_norm": ii_oracle},
        checks=[
            OracleCheck("radial.delta", lambda x: 0.0, lambda x: delta_at(f, x), 1e-8),
            *_tensor_checks(f, ii_oracle, lambda x: 0.0, 1e-4, 1e-6),
        ],
    )


def _torus3_orthogonal(params: Torus3OrthogonalParams) -> Scenario:
    total, base = catalog.flat_torus(3), catalog.circle()
    f1 = catalog.coordinate_projection(total, base, [0], "first_factor")
    f2 = catalog.coordinate_projection(total, base, [1], "second_factor")
    trust = 1.0

    def phi_oracle(x):
        return np.array([x[0], x[0], x[2]])

    return Scenario(
        name="torus3_orthogonal",
        params=params.model_dump(),
        total=total, base=base, f1=f1, f2=f2,
        trust_radius=trust,
        sample_lower=(0.0, 0.0, 0.0), sample_upper=(0.5, 0.5, 0.5),
        asserted={"sec_total_abs_max": 0.0, "sec_base_abs_max": 0.0, "fibers_compact": True},
        oracles={"phi": phi_oracle, "transversality": lambda x: 0.0},
        checks=[
            OracleCheck("phi", phi_oracle, lambda x: construct_phi(f1, f2, x, trust), 1e-8, wrap=total),
            OracleCheck(
                "transversality",
                lambda x: 0.0,
                lambda x: transversality_check(f1, f2, f1.evaluate(x), x, trust),
                1e-5,
            ),
        ],
    )


def _plane_curves_scenario(params: PlaneCurvesParams) -> Scenario:
    total, base = catalog.flat_plane(), catalog.real_interval(-10.0, 10.0)
    f = catalog.coordinate_projection(total, base, [0], "abscissa")
    return Scenario(
        name="plane_curves",
        params=params.model_dump(),
        total=total, base=base, f1=f, f2=f,
        trust_radius=2.0,
        sample_lower=(-1.0, -1.0), sample_upper=(1.0, 1.0),
        asserted={"sec_total_abs_max": 0.0, "minimal_geodesics_in_chart": True},
        constants={"C": 1.0, "mu": 0.0, "delta1": 1.0 / params.radius, "delta2": 0.0},
        checks=[OracleCheck("abscissa.delta", lambda x: 0.0, lambda x: delta_at(f, x), 1e-8)],
        curve_pair=_plane_curves(params.radius),
    )


def _perturbed_torus_scenario(params: PerturbedTorusParams) -> Scenario:
    eps = params.amplitude
    total, base = catalog.perturbed_torus(eps), catalog.circle()
    f = catalog.coordinate_projection(total, base, [1], "second_angle")

    def delta_oracle(x):
        return abs(eps * math.sin(x[0]) * math.sin(x[1]))

    return Scenario(
        name="perturbed_torus",
        params=params.model_dump(),
        total=total, base=base, f1=f, f2=f,
        trust_radius=1.0,
        sample_lower=(0.0, 0.0), sample_upper=(catalog.TWO_PI, catalog.TWO_PI),
        asserted={"minimal_geodesics_in_chart": True, "fibers_compact": True},
        constants={"C": math.exp(2 * eps)},
        oracles={"delta": delta_oracle},
        checks=[OracleCheck("second_angle.delta", delta_oracle, lambda x: delta_at(f, x), 1e-8)],
        curve_pair=_perturbed_curves(total),
    )


_REGISTRY: Dict[str, Tuple[Type[ScenarioParams], Callable[[Any], Scenario], str]] = {
    "flat_torus_pair": (
        FlatTorusPairParams, _flat_torus_pair,
        "Flat T² over S¹: canonical projection vs θ₂ + a sin θ₂",
    ),
    "hopf": (HopfParams, _hopf, "Hopf fibration S³(1) → S²(½) vs its composition with a rotation of S²"),
    "warped_product": (
        WarpedProductParams, _warped_product,
        "dr² + (1 + b r²)² dθ² fibered over r (fibers with mean curvature w'/w)",
    ),
    "torus3_orthogonal": (
        Torus3OrthogonalParams, _torus3_orthogonal,
        "Flat T³ with projections onto orthogonal circle factors (singular bundle map)",
    ),
    "plane_curves": (PlaneCurvesParams, _plane_curves_scenario, "Flat plane with a circle tangent to a line"),
    "perturbed_torus": (
        PerturbedTorusParams, _perturbed_torus_scenario,
        "Conformally perturbed torus e^{2ψ}(dθ₁² + dθ₂²) with a circle/geodesic curve pair",
    ),
}


def list_scenarios() -> List[ScenarioInfo]:
    return [
        ScenarioInfo(name=name, description=description, params_schema=model.model_json_schema())
        for name, (model, _, description) in _REGISTRY.items()
    ]


def build_scenario(name: str, params: Optional[Dict[str, Any]] = None, validate: Optional[bool] = None) -> Scenario:
    if name not in _REGISTRY:
        raise ScenarioNotFoundError(f"unknown scenario '{name}' (known: {', '.join(_REGISTRY)})")
    model, builder, _ = _REGISTRY[name]
    try:
        parsed = model.model_validate(params or {})
    except ValidationError as e:
        raise ScenarioParamsError(f"invalid parameters for scenario '{name}': {e}") from e
    scenario = builder(parsed)
    if settings.validate_oracles if validate is None else validate:
        validate_oracles(scenario)
    return scenario


def validation_grid(scenario: Scenario, points: Optional[int] = None) -> np.ndarray:
    points = points or settings.oracle_grid_points
    per_axis = max(2, math.ceil(points ** (1.0 / scenario.total.dim)))
    return scenario.grid([per_axis] * scenario.total.dim)


def validate_oracles(scenario: Scenario, points: Optional[int] = None) -> Dict[str, float]:
    """Worst oracle error per check; raises OracleMismatchError beyond tolerance"""
    grid = validation_grid(scenario, points)
    errors = {}
    for check in scenario.checks:
        worst = 0.0
        for x in grid:
            expected = np.asarray(check.expected(x), dtype=float)
            measured = np.asarray(check.measured(x), dtype=float)
            diff = measured - expected
            if check.wrap is not None:
                diff = check.wrap.domain.wrapped_difference(measured, expected)
            worst = max(worst, float(np.max(np.abs(diff))))
        if worst > check.tolerance:
            raise OracleMismatchError(
                f"{scenario.name}: oracle '{check.name}' disagrees with the pipeline "
                f"by {worst:.3e} (tolerance {check.tolerance:g})"
            )
        errors[check.name] = worst
    return errors


# ── Sharpness ─────────────────────────────────────────────────

@dataclass(eq=False)
class SharpnessResult:
    gap: float
    worst_point: List[float]
    points: int
    params: Dict[str, float]


def sharpness_check(scenario: Scenario, a: Optional[float] = None, counts: Optional[Sequence[int]] = None) -> SharpnessResult:
    """max over a grid of |dΦᵀ g(Φx) dΦ - g(x)|₂"""
    if a is not None:
        if scenario.name != "flat_torus_pair":
            raise ContractError("sharpness amplitude applies to flat_torus_pair only")
        scenario = build_scenario(scenario.name, {"a": a}, validate=False)
    grid = scenario.grid(counts or [8] * scenario.total.dim)
    M = scenario.total
    gap, worst = 0.0, grid[0]
    for x in grid:
        dphi = phi_jacobian(scenario.f1, scenario.f2, x, scenario.trust_radius)
        phi_x = construct_phi(scenario.f1, scenario.f2, x, scenario.trust_radius)
        pulled = dphi.T @ metric_at(M, phi_x).g @ dphi
        distance = float(np.linalg.norm(pulled - metric_at(M, x).g, 2))
        if distance > gap:
            gap, worst = distance, x
    return SharpnessResult(gap=gap, worst_point=[float(v) for v in worst], points=len(grid), params=dict(scenario.params))
