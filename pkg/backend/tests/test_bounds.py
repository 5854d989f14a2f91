import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from app.services import catalog
from app.services.bounds import (
    deviation_experiment,
    deviation_rhs,
    fiber_variation_setup,
    geodesic_triangle_loop,
    geodesic_variation_setup,
    holonomy_experiment,
    rescaling_invariance_experiment,
    variation_bound_experiment,
    vertical_component_experiment,
)
from app.services.errors import ContractError
from app.services.geometry import TangentVector, orthonormal_frame
from app.services.scenarios import build_scenario
from app.services.transport import geodesic_polygon, integrate_geodesic, reversed_curve


# ── Holonomy ──────────────────────────────────────────────────

def test_flat_loop_has_no_holonomy(torus_pair):
    loop, e1 = geodesic_triangle_loop(torus_pair.total, [1.0, 1.0], 0.3, torus_pair.trust_radius)
    report = holonomy_experiment(torus_pair.total, loop, e1)
    assert report.lhs < 1e-20
    assert report.parameters["mu"] == 0.0
    assert report.passed


def _octant_vertices():
    # Octant triangle of the unit sphere turned so its centre sits on the equator at φ = π/2
    centre = np.ones(3) / math.sqrt(3)
    target = np.array([0.0, 1.0, 0.0])
    axis = np.cross(centre, target)
    angle = math.acos(float(centre @ target))
    rotation = Rotation.from_rotvec(angle * axis / np.linalg.norm(axis))
    return [catalog.sphere_chart(p) for p in rotation.apply(np.eye(3))]


def test_octant_triangle_turns_a_vector_by_a_right_angle(unit_sphere):
    loop = geodesic_polygon(unit_sphere, _octant_vertices(), trust_radius=2.0)
    v0 = orthonormal_frame(unit_sphere, loop.points[0])[0]
    report = holonomy_experiment(unit_sphere, loop, v0)
    # |v - Rv|² = 2 - 2cos(π/2)
    assert report.lhs == pytest.approx(2.0, abs=1e-3)
    assert report.parameters["l"] == pytest.approx(1.5 * math.pi, abs=1e-6)
    assert report.parameters["transported_norm"] == pytest.approx(1.0, abs=1e-8)
    assert report.passed


def test_holonomy_scales_with_enclosed_area_squared(unit_sphere):
    x = [math.pi / 2, 1.0]
    full, e1 = geodesic_triangle_loop(unit_sphere, x, 0.2, 1.0, height=0.2)
    half, _ = geodesic_triangle_loop(unit_sphere, x, 0.2, 1.0, height=0.1)
    ratio = holonomy_experiment(unit_sphere, half, e1).lhs / holonomy_experiment(unit_sphere, full, e1).lhs
    assert ratio == pytest.approx(0.25, rel=0.3)


def test_holonomy_does_not_depend_on_the_direction_of_travel(unit_sphere):
    loop, e1 = geodesic_triangle_loop(unit_sphere, [math.pi / 2, 1.0], 0.2, 1.0)
    forward = holonomy_experiment(unit_sphere, loop, e1).lhs
    backward = holonomy_experiment(unit_sphere, reversed_curve(loop), e1).lhs
    assert forward > 1e-5
    assert backward == pytest.approx(forward, rel=1e-6)


def test_holonomy_rejects_open_loops(torus_pair):
    open_curve = integrate_geodesic(torus_pair.total, [1.0, 1.0], [0.3, 0.0], 1.0)
    with pytest.raises(ContractError):
        holonomy_experiment(torus_pair.total, open_curve, [1.0, 0.0])


def test_holonomy_needs_a_unit_vector(torus_pair):
    loop, _ = geodesic_triangle_loop(torus_pair.total, [1.0, 1.0], 0.3, torus_pair.trust_radius)
    with pytest.raises(ContractError):
        holonomy_experiment(torus_pair.total, loop, [2.0, 0.0])


# ── Fiber variation ───────────────────────────────────────────

def test_hopf_lifts_preserve_fiber_lengths(hopf):
    vector, geodesic = fiber_variation_setup(hopf.f1, [0.6, 1.0, 2.0], 0.3)
    report = variation_bound_experiment(hopf.f1, vector, geodesic)
    assert report.parameters["ratio"] == pytest.approx(1.0, abs=1e-3)
    assert report.parameters["r"] == pytest.approx(0.3, abs=1e-6)
    assert report.parameters["lower"] <= report.parameters["ratio"] + 1e-3


def test_variation_needs_a_vertical_vector(torus_pair):
    f = torus_pair.f1
    geodesic = integrate_geodesic(f.base, [1.0], [0.3], 1.0)
    with pytest.raises(ContractError):
        variation_bound_experiment(f, TangentVector(np.array([0.5, 1.0]), np.array([0.0, 1.0])), geodesic)


def test_fiber_setup_rejects_point_fibers(plane):
    f = catalog.coordinate_projection(plane, plane, [0, 1], "identity")
    with pytest.raises(ContractError):
        fiber_variation_setup(f, [0.0, 0.0], 0.3)


# ── Vertical component ────────────────────────────────────────

def test_flat_product_lifts_stay_horizontal(torus_pair):
    f = torus_pair.f1
    report = vertical_component_experiment(f, geodesic_variation_setup(f, [0.5, 1.0], 0.3))
    assert report.lhs < 1e-5
    assert report.parameters["a_norm"] < 1e-8
    assert report.passed


def test_hopf_vertical_component_within_bound(hopf):
    report = vertical_component_experiment(hopf.f1, geodesic_variation_setup(hopf.f1, [0.6, 1.0, 2.0], 0.3), C=2.0)
    assert report.lhs > 1e-3
    assert report.parameters["a_norm"] == pytest.approx(2.0, abs=1e-3)
    assert report.parameters["a"] == pytest.approx(1.0, abs=1e-6)
    assert report.passed
    assert any("base |sec|" in note for note in report.notes)


def test_hopf_vertical_component_grows_linearly_in_r(hopf):
    x = [0.6, 1.0, 2.0]
    long = vertical_component_experiment(hopf.f1, geodesic_variation_setup(hopf.f1, x, 0.2)).lhs
    short = vertical_component_experiment(hopf.f1, geodesic_variation_setup(hopf.f1, x, 0.1)).lhs
    assert long / short == pytest.approx(2.0, rel=0.15)


# ── Curve deviation ───────────────────────────────────────────

def test_deviation_rhs_closed_form():
    assert float(deviation_rhs(1.0, 1.0, 0.0, 0.0, 1.0, 2)) == pytest.approx(1.0 / 3.0)
    assert float(deviation_rhs(1.0, 0.0, 0.25, 0.0, 1.0, 2)) == pytest.approx(0.4)
    np.testing.assert_allclose(deviation_rhs([0.0, 2.0], 1.0, 0.0, 0.0, 1.0, 3), [0.0, 16.0 / 3.0])


def test_deviation_rhs_grows_with_every_curvature_term():
    s, C, m = 0.7, 1.5, 3
    base = float(deviation_rhs(s, 0.2, 0.1, 0.05, C, m))
    assert float(deviation_rhs(s, 0.4, 0.1, 0.05, C, m)) > base
    assert float(deviation_rhs(s, 0.2, 0.3, 0.05, C, m)) > base
    assert float(deviation_rhs(s, 0.2, 0.1, 0.15, C, m)) > base
    values = deviation_rhs(s, np.linspace(0.0, 1.0, 11), 0.1, 0.05, C, m)
    assert np.all(np.diff(values) > 0)


def test_circle_against_tangent_line():
    scenario = build_scenario("plane_curves", validate=False)
    alpha, beta = scenario.curve_pair(1.0)
    report = deviation_experiment(scenario.total, alpha, beta, trust_radius=scenario.trust_radius)
    assert report.parameters["delta1"] == pytest.approx(1.0, abs=1e-4)
    assert report.parameters["delta2"] < 1e-6
    assert report.parameters["mu"] == 0.0
    # distance from the circle point to the line is 1 - cos s
    np.testing.assert_allclose(report.series["r"], 1.0 - np.cos(report.series["s"]), atol=1e-5)
    assert report.margin > 0
    assert report.passed


def test_perturbed_torus_deviation_is_quadratic():
    scenario = build_scenario("perturbed_torus", validate=False)
    alpha, beta = scenario.curve_pair(1.0)
    report = deviation_experiment(scenario.total, alpha, beta, trust_radius=scenario.trust_radius)
    assert report.passed
    assert 1.25 <= report.parameters["slope"] <= 2.0
    assert len(report.series["s"]) == len(report.series["r"]) == len(report.series["rhs"])


def test_deviation_needs_shared_start(plane):
    scenario = build_scenario("plane_curves", validate=False)
    alpha, _ = scenario.curve_pair(1.0)
    shifted = integrate_geodesic(plane, [0.0, 0.5], [1.0, 0.0], 1.5)
    with pytest.raises(ContractError):
        deviation_experiment(plane, alpha, shifted)


# ── Rescaling ─────────────────────────────────────────────────

def test_scale_invariant_quantities_do_not_move(torus_pair):
    points = torus_pair.grid([3, 3])
    report = rescaling_invariance_experiment(torus_pair.f1, torus_pair.f2, 10.0, points, torus_pair.trust_radius)
    assert report.parameters["lambda"] == 10.0
    assert report.parameters["delta_f2_drift"] < 1e-6
    assert report.passed


@pytest.mark.parametrize("lam", [10.0, 1 / 0.3])
def test_hopf_products_with_map_distance_are_scale_free(hopf, lam):
    points = hopf.grid([2, 2, 2])
    report = rescaling_invariance_experiment(hopf.f1, hopf.f2, lam, points, hopf.trust_radius)
    assert report.passed
    assert report.parameters["c0"] > 0.01
    assert report.parameters["c0_scaled"] == pytest.approx(report.parameters["c0"], rel=1e-6)
    assert report.parameters["a_d_f1_drift"] < 1e-6
