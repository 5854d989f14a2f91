"""
Experiment runner

Executes an ExperimentConfig against one scenario. Grid work is spread
over a thread pool and gathered by index, so every numeric field is
independent of the worker count.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pydantic
import scipy

from app.config import get_settings
from app.models.experiment import ExperimentConfig, ExperimentResult, ExperimentSpec, RunReport
from app.models.report import BoundReport
from app.services import bounds
from app.services.bundle_map import bijectivity_check, phi_diagnostics, transversality_check
from app.services.errors import ContractError
from app.services.geometry import metric_at
from app.services.scenarios import Scenario, build_scenario, sharpness_check
from app.services.submersion import (
    delta_at,
    dihedral_angle,
    differential_at,
    integrability_tensor_at,
    map_distance,
    sampled_hausdorff_angle,
    second_fundamental_form_at,
    split_at,
)

settings = get_settings()

LAB_VERSION = "1.0.0"

DEFAULT_TOLERANCES: Dict[str, Optional[float]] = {
    "commutation": 1e-6,
    "leakage": 5e-4,
    "transversality": 1e-5,
    "split": 1e-8,
    "bound": None,  # each bound keeps its own default
    "invariance": settings.invariance_tolerance,
    "sharpness": 1e-3,
}

DEFAULT_GRID = {"tensors": 4, "bundle_map": 8, "bounds": 1, "sharpness": 8, "rescale": 4}


def ordered_map(fn: Callable, items: Sequence, jobs: int) -> List:
    """map() over a thread pool; results come back in input order"""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _grid(scenario: Scenario, spec: ExperimentSpec) -> np.ndarray:
    return scenario.grid(_counts(scenario, spec))


def _counts(scenario: Scenario, spec: ExperimentSpec) -> List[int]:
    return spec.grid or [DEFAULT_GRID[spec.kind]] * scenario.total.dim


def _relabel(report: BoundReport, label: str) -> BoundReport:
    return report.model_copy(update={"name": label})


def _step_sizes() -> Dict[str, float]:
    return {
        "fd_step": settings.fd_step,
        "steps_per_unit": float(settings.steps_per_unit),
        "min_steps": float(settings.min_steps),
        "newton_tol": settings.newton_tol,
    }


# ── Experiment kinds ──────────────────────────────────────────

def _tensor_row(f, label: str, x: np.ndarray) -> Dict[str, Any]:
    split = split_at(f, x)
    basis = np.vstack([split.vertical, split.horizontal])
    gram = basis @ metric_at(f.total, x).g @ basis.T
    residual = float(np.max(np.abs(gram - np.eye(len(basis)))))
    if split.vertical.shape[0]:
        residual = max(residual, float(np.max(np.abs(differential_at(f, x) @ split.vertical.T))))
    return {
        "map": label,
        "point": x.tolist(),
        "delta": delta_at(f, x),
        "ii_norm": second_fundamental_form_at(f, x).norm,
        "a_norm": integrability_tensor_at(f, x).norm,
        "sigma_min": float(split.singular_values[-1]),
        "sigma_max": float(split.singular_values[0]),
        "split_residual": residual,
    }


def _dihedral_row(scenario: Scenario, x: np.ndarray, seed: int) -> Dict[str, Any]:
    """Vertical spaces of f1 and f2: principal angle and its sampled cross-check"""
    M = scenario.total
    V1, V2 = split_at(scenario.f1, x).vertical, split_at(scenario.f2, x).vertical
    return {
        "point": x.tolist(),
        "dihedral": dihedral_angle(M, x, V1, V2),
        "sampled_hausdorff": sampled_hausdorff_angle(M, x, V1, V2, seed=seed) if V1.shape[0] else 0.0,
        "seed": seed,
    }


def _run_tensors(scenario: Scenario, spec: ExperimentSpec, tol: Dict, jobs: int, result: ExperimentResult) -> None:
    grid = _grid(scenario, spec)
    rows = []
    for label, f in scenario.maps:
        rows.extend(ordered_map(lambda x: _tensor_row(f, label, x), list(grid), jobs))
    result.tables["tensors"] = rows
    for row in rows:
        if row["split_residual"] > tol["split"]:
            result.contract_violations.append(
                f"{row['map']}: vertical/horizontal split residual {row['split_residual']:.3e} at {row['point']}"
            )

    if scenario.f2 is scenario.f1:
        return
    angles = ordered_map(
        lambda item: _dihedral_row(scenario, item[1], spec.seed + item[0]), list(enumerate(grid)), jobs
    )
    result.tables["dihedral"] = angles
    for row in angles:
        if row["sampled_hausdorff"] > row["dihedral"] + 1e-8:
            result.contract_violations.append(
                f"sampled Hausdorff angle exceeds the principal angle at {row['point']}"
            )


def _run_bundle_map(scenario: Scenario, spec: ExperimentSpec, tol: Dict, jobs: int, result: ExperimentResult) -> None:
    f1, f2, trust = scenario.f1, scenario.f2, scenario.trust_radius
    counts = _counts(scenario, spec)
    grid = list(scenario.grid(counts))

    d = map_distance(f1, f2, grid, trust)
    tensor_sup = max(
        max(second_fundamental_form_at(f, x).norm, integrability_tensor_at(f, x).norm)
        for _, f in scenario.maps
        for x in grid
    )
    c0 = tensor_sup * d
    diagnostics = ordered_map(lambda x: phi_diagnostics(f1, f2, x, trust, c0=c0 or None), grid, jobs)
    transversal = [None] * len(grid)
    if f1.fiber_dim > 0:
        transversal = ordered_map(lambda x: transversality_check(f1, f2, f1.evaluate(x), x, trust), grid, jobs)

    rows = []
    for diag, t in zip(diagnostics, transversal):
        rows.append({
            "point": diag.point,
            "phi_point": diag.phi_point,
            "commutation_residual": diag.commutation_residual,
            "vertical_leakage": diag.vertical_leakage,
            "sigma_min": diag.singular_values[-1],
            "sigma_max": diag.singular_values[0],
            "top_norm": diag.horizontal_top_norm,
            "bottom_min": diag.horizontal_bot_range[0],
            "bottom_max": diag.horizontal_bot_range[1],
            "epsilon": diag.measured_epsilon,
            "fitted_top_constant": diag.fitted_top_constant,
            "transversality": t,
        })
    result.tables["phi"] = rows
    result.tables["constants"] = [{"map_distance": d, "tensor_sup": tensor_sup, "c0": c0}]
    result.series["singular_values"] = {
        "sigma_min": [r["sigma_min"] for r in rows],
        "sigma_max": [r["sigma_max"] for r in rows],
    }

    worst_commutation = max(r["commutation_residual"] for r in rows)
    if worst_commutation > tol["commutation"]:
        result.contract_violations.append(f"f2∘Φ ≠ f1: commutation residual {worst_commutation:.3e}")
    worst_leakage = max(r["vertical_leakage"] for r in rows)
    if worst_leakage > tol["leakage"]:
        result.contract_violations.append(f"dΦ leaks f1-vertical vectors: leakage {worst_leakage:.3e}")

    singular_at = [r["point"] for r in rows if r["sigma_min"] < tol["transversality"]
                   or (r["transversality"] is not None and r["transversality"] < tol["transversality"])]
    if singular_at:
        result.flags.append(f"dΦ singular at {len(singular_at)} of {len(rows)} grid points (first {singular_at[0]})")

    if all(n >= 2 for n in counts):
        bijectivity = bijectivity_check(f1, f2, np.array(grid), trust, counts)
        result.tables["bijectivity"] = [{
            "min_separation_ratio": bijectivity.min_separation_ratio,
            "covering_gap": bijectivity.covering_gap,
            "points": bijectivity.points,
        }]
        if bijectivity.min_separation_ratio < tol["transversality"]:
            result.flags.append("Φ collapses neighbouring grid points")


def _bound_tolerance(tol: Dict) -> Dict[str, float]:
    return {} if tol["bound"] is None else {"tolerance": tol["bound"]}


def _run_bounds(scenario: Scenario, spec: ExperimentSpec, tol: Dict, jobs: int, result: ExperimentResult) -> None:
    grid = list(_grid(scenario, spec))
    extra = _bound_tolerance(tol)
    r = spec.radius

    for bound in spec.bounds:
        if bound == "deviation":
            if scenario.curve_pair is None:
                raise ContractError(f"scenario '{scenario.name}' declares no curve pair for the deviation bench")
            alpha, beta = scenario.curve_pair(spec.s_max)
            report = bounds.deviation_experiment(scenario.total, alpha, beta, trust_radius=scenario.trust_radius, **extra)
            result.bound_reports.append(_relabel(report, f"{spec.label}.deviation"))
            result.series["deviation"] = dict(report.series)
            continue

        if bound == "holonomy":
            M = scenario.total

            def holonomy_at(x):
                loop, e1 = bounds.geodesic_triangle_loop(M, x, r, scenario.trust_radius)
                return bounds.holonomy_experiment(M, loop, e1, **extra)

            reports = ordered_map(holonomy_at, grid, jobs)
            result.bound_reports.extend(
                _relabel(rep, f"{spec.label}.holonomy[{i}]") for i, rep in enumerate(reports)
            )
            continue

        for label, f in scenario.maps:
            if bound == "variation":
                def measure(x, f=f):
                    vector, geodesic = bounds.fiber_variation_setup(f, x, r)
                    return bounds.variation_bound_experiment(f, vector, geodesic, **extra)
            else:
                def measure(x, f=f):
                    variation = bounds.geodesic_variation_setup(f, x, r)
                    return bounds.vertical_component_experiment(f, variation, **extra)

            reports = ordered_map(measure, grid, jobs)
            result.bound_reports.extend(
                _relabel(rep, f"{spec.label}.{bound}[{label}:{i}]") for i, rep in enumerate(reports)
            )


def _pulled_gap_oracle(scenario: Scenario, grid: np.ndarray) -> Optional[float]:
    phi, dphi = scenario.oracles.get("phi"), scenario.oracles.get("dphi")
    if phi is None or dphi is None:
        return None
    M = scenario.total
    gap = 0.0
    for x in grid:
        D = np.asarray(dphi(x), dtype=float)
        pulled = D.T @ metric_at(M, phi(x)).g @ D
        gap = max(gap, float(np.linalg.norm(pulled - metric_at(M, x).g, 2)))
    return gap


def _run_sharpness(scenario: Scenario, spec: ExperimentSpec, tol: Dict, jobs: int, result: ExperimentResult) -> None:
    counts = _counts(scenario, spec)
    amplitudes = spec.amplitudes or [None]

    def measure(a):
        target = scenario if a is None else build_scenario(scenario.name, {**scenario.params, "a": a}, validate=False)
        measured = sharpness_check(scenario, a, counts)
        return a, measured, _pulled_gap_oracle(target, target.grid(counts)), target.constants.get("sharpness_gap")

    rows = []
    for a, measured, expected, sup in ordered_map(measure, amplitudes, jobs):
        rows.append({
            "a": a,
            "gap": measured.gap,
            "expected": expected,
            "sup_closed_form": sup,
            "worst_point": measured.worst_point,
            "points": measured.points,
        })
        if expected is not None and abs(measured.gap - expected) > tol["sharpness"]:
            result.contract_violations.append(
                f"sharpness gap {measured.gap:.6g} differs from the closed form {expected:.6g} (a = {a})"
            )
    result.tables["sharpness"] = rows
    if spec.amplitudes:
        result.series["gap"] = {"a": [r["a"] for r in rows], "gap": [r["gap"] for r in rows]}


def _run_rescale(scenario: Scenario, spec: ExperimentSpec, tol: Dict, jobs: int, result: ExperimentResult) -> None:
    points = _grid(scenario, spec)

    def measure(lam):
        return bounds.rescaling_invariance_experiment(
            scenario.f1, scenario.f2, lam, points, scenario.trust_radius, tolerance=tol["invariance"]
        )

    reports = ordered_map(measure, list(spec.scales), jobs)
    result.bound_reports.extend(
        _relabel(rep, f"{spec.label}[lambda={lam:g}]") for lam, rep in zip(spec.scales, reports)
    )


_KINDS = {
    "tensors": _run_tensors,
    "bundle_map": _run_bundle_map,
    "bounds": _run_bounds,
    "sharpness": _run_sharpness,
    "rescale": _run_rescale,
}


# ── Orchestration ─────────────────────────────────────────────

def run_experiment(scenario: Scenario, spec: ExperimentSpec, jobs: int) -> ExperimentResult:
    """One experiment; any failure is captured on the result"""
    result = ExperimentResult(name=spec.label, kind=spec.kind, status="ok", step_sizes=_step_sizes())
    tol = {**DEFAULT_TOLERANCES, **spec.tolerances}
    try:
        _KINDS[spec.kind](scenario, spec, tol, jobs, result)
    except Exception as e:
        result.status = "error"
        result.error = f"{type(e).__name__}: {e}"
        return result
    if result.contract_violations:
        result.status = "violated"
    return result


def _print_result(result: ExperimentResult) -> None:
    failed = [b for b in result.bound_reports if not b.passed]
    if result.status == "error":
        print(f"❌ {result.name}: {result.error}")
    elif result.status == "violated" or failed:
        print(f"⚠️ {result.name}: {len(failed)} failed bound(s), {len(result.contract_violations)} violation(s)")
        for b in failed:
            print(f"   • {b.name}: lhs {b.lhs:.6g} > rhs {b.rhs:.6g}")
        for v in result.contract_violations:
            print(f"   • {v}")
    else:
        print(f"✅ {result.name}: {len(result.bound_reports)} bound(s) passed")
    for flag in result.flags:
        print(f"   ℹ️ {flag}")


def scenario_summary(scenario: Scenario) -> Dict[str, Any]:
    return {
        "name": scenario.name,
        "params": dict(scenario.params),
        "total": scenario.total.name,
        "base": scenario.base.name,
        "f1": scenario.f1.name,
        "f2": scenario.f2.name,
        "trust_radius": scenario.trust_radius,
        "sample_lower": list(scenario.sample_lower),
        "sample_upper": list(scenario.sample_upper),
        "constants": dict(scenario.constants),
    }


def run(config: ExperimentConfig, jobs: Optional[int] = None, verbose: bool = True) -> RunReport:
    """
    Build the scenario and execute the experiments in config order.

    Scenario errors propagate (they are configuration errors); anything
    raised inside an experiment is recorded on its result instead.
    """
    jobs = max(1, jobs or settings.lab_jobs)
    started = time.perf_counter()
    scenario = build_scenario(config.scenario.name, config.scenario.params)
    if verbose:
        print(f"\n🔬 {scenario.name} {scenario.params}: {len(config.experiments)} experiment(s), {jobs} worker(s)")

    results = []
    for spec in config.experiments:
        result = run_experiment(scenario, spec, jobs)
        if verbose:
            _print_result(result)
        results.append(result)

    return RunReport(
        config=config,
        scenario=scenario_summary(scenario),
        assumptions=dict(scenario.asserted),
        results=results,
        versions={"lab": LAB_VERSION, "numpy": np.__version__, "scipy": scipy.__version__, "pydantic": pydantic.VERSION},
        settings=settings.model_dump(exclude={"output_dir", "lab_jobs"}),
        wall_time=time.perf_counter() - started,
    )
