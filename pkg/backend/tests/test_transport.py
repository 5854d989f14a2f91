import math

import numpy as np
import pytest

from app.services import catalog
from app.services.errors import ContractError, EscapeError, OutOfRangeError
from app.services.geometry import norm
from app.services.transport import (
    concatenate,
    curve_length,
    distance_to_curve,
    exp_map,
    geodesic_curvature,
    geodesic_distance,
    geodesic_polygon,
    integrate_geodesic,
    log_map,
    parallel_transport,
    reversed_curve,
    sample_curve,
    unit_speed_curve,
)

TILT = 0.6


def _tilted_great_circle_end(T: float) -> np.ndarray:
    """Unit-speed great circle from (1, 0, 0) towards (0, cos TILT, sin TILT), in chart coordinates"""
    u = np.array([0.0, math.cos(TILT), math.sin(TILT)])
    return catalog.sphere_chart(math.cos(T) * np.array([1.0, 0.0, 0.0]) + math.sin(T) * u)


def test_geodesic_stays_on_great_circle(unit_sphere):
    x0 = np.array([math.pi / 2, 0.0])
    v0 = np.array([-math.sin(TILT), math.cos(TILT)])
    curve = integrate_geodesic(unit_sphere, x0, v0, 1.0)
    np.testing.assert_allclose(curve.end, _tilted_great_circle_end(1.0), atol=1e-9)


def test_geodesic_integration_is_fourth_order(unit_sphere):
    x0 = np.array([math.pi / 2, 0.0])
    v0 = np.array([-math.sin(TILT), math.cos(TILT)])
    exact = _tilted_great_circle_end(1.0)
    errors = [
        np.max(np.abs(integrate_geodesic(unit_sphere, x0, v0, 1.0, steps).end - exact))
        for steps in (8, 16, 32)
    ]
    assert errors[0] / errors[1] >= 8
    assert errors[1] / errors[2] >= 8


def test_equator_closes_after_one_turn(unit_sphere):
    curve = integrate_geodesic(unit_sphere, [math.pi / 2, 0.0], [0.0, 1.0], 2 * math.pi)
    np.testing.assert_allclose(curve.points[:, 0], math.pi / 2, atol=1e-9)
    gap = unit_sphere.domain.wrapped_difference(curve.end, curve.start)
    np.testing.assert_allclose(gap, 0.0, atol=1e-9)
    assert curve_length(curve) == pytest.approx(2 * math.pi, abs=1e-9)


def test_geodesic_speed_is_conserved(unit_sphere):
    curve = integrate_geodesic(unit_sphere, [1.0, 0.0], [0.3, 0.8], 2.0)
    speeds = [norm(unit_sphere, x, v) for x, v in zip(curve.points, curve.velocities)]
    assert max(speeds) - min(speeds) < 1e-9


def test_geodesic_leaving_the_chart_reports_exit_time():
    interval = catalog.real_interval(-1.0, 1.0)
    with pytest.raises(EscapeError) as excinfo:
        integrate_geodesic(interval, [0.0], [2.0], 1.0, 64)
    assert excinfo.value.exit_time == pytest.approx(0.5, abs=1.0 / 64)


def test_exp_log_inverse_on_sphere(unit_sphere):
    p, q = np.array([1.2, 0.4]), np.array([0.9, 1.0])
    v = log_map(unit_sphere, p, q, trust_radius=1.5)
    np.testing.assert_allclose(exp_map(unit_sphere, q, v), p, atol=1e-9)


def test_log_map_of_base_point_is_zero(unit_sphere):
    np.testing.assert_array_equal(log_map(unit_sphere, [1.0, 1.0], [1.0, 1.0], 1.0), np.zeros(2))


def test_log_map_beyond_trust_radius_raises(unit_sphere):
    with pytest.raises(OutOfRangeError):
        log_map(unit_sphere, [1.5, 1.0], [0.5, 1.0], trust_radius=0.5)


def test_geodesic_distance_is_exactly_symmetric(unit_sphere):
    p, q = [1.3, 0.2], [0.8, 0.9]
    assert geodesic_distance(unit_sphere, p, q, 2.0) == geodesic_distance(unit_sphere, q, p, 2.0)


def test_geodesic_distance_along_a_meridian(unit_sphere):
    assert geodesic_distance(unit_sphere, [0.5, 2.0], [1.4, 2.0], 2.0) == pytest.approx(0.9, abs=1e-9)


def test_geodesic_distance_across_the_periodic_seam():
    torus = catalog.flat_torus(2)
    assert geodesic_distance(torus, [0.1, 0.0], [2 * math.pi - 0.1, 0.0], 1.0) == pytest.approx(0.2, abs=1e-12)


def test_parallel_transport_preserves_norm(unit_sphere):
    x0 = np.array([1.0, 0.3])
    curve = integrate_geodesic(unit_sphere, x0, [0.6, 0.8 / math.sin(1.0)], 1.0)
    field = parallel_transport(unit_sphere, curve, [0.0, 1.0 / math.sin(1.0)]).field
    norms = [norm(unit_sphere, x, v) for x, v in zip(curve.points, field)]
    assert max(abs(n - 1.0) for n in norms) < 1e-8


def test_transport_along_geodesic_keeps_the_velocity(unit_sphere):
    curve = integrate_geodesic(unit_sphere, [1.0, 0.3], [0.4, 0.5], 1.0)
    transported = parallel_transport(unit_sphere, curve, curve.velocities[0]).end
    np.testing.assert_allclose(transported, curve.velocities[-1], atol=1e-8)


def test_transport_back_along_the_reversed_curve_undoes_it(unit_sphere):
    curve = integrate_geodesic(unit_sphere, [1.0, 0.3], [0.4, 0.5], 1.0)
    v0 = np.array([0.2, -0.7])
    there = parallel_transport(unit_sphere, curve, v0).end
    back = parallel_transport(unit_sphere, reversed_curve(curve), there).end
    np.testing.assert_allclose(back, v0, atol=1e-9)


def test_curve_length_of_a_circle(plane):
    circle = sample_curve(
        plane,
        lambda t: (2 * math.cos(t), 2 * math.sin(t)),
        lambda t: (-2 * math.sin(t), 2 * math.cos(t)),
        0.0, 2 * math.pi, 256,
    )
    assert curve_length(circle) == pytest.approx(4 * math.pi, rel=1e-12)


def test_geodesic_curvature_of_a_circle(plane):
    circle = sample_curve(
        plane,
        lambda s: (2 * math.cos(s / 2), 2 * math.sin(s / 2)),
        lambda s: (-math.sin(s / 2), math.cos(s / 2)),
        0.0, 3.0, 600,
    )
    assert geodesic_curvature(plane, circle, 1.5) == pytest.approx(0.5, abs=1e-4)
    assert geodesic_curvature(plane, circle, 0.0) == pytest.approx(0.5, abs=1e-4)


def test_geodesic_curvature_needs_unit_speed(plane):
    fast = sample_curve(plane, lambda t: (2 * t, 0.0), lambda t: (2.0, 0.0), 0.0, 1.0, 10)
    with pytest.raises(ContractError):
        geodesic_curvature(plane, fast, 0.5)


def test_unit_speed_reparametrization(unit_sphere):
    curve = unit_speed_curve(
        unit_sphere,
        lambda u: np.array([1.0 + 0.2 * math.sin(u), u]),
        lambda u: np.array([0.2 * math.cos(u), 1.0]),
        1.0, 64, u0=0.5,
    )
    speeds = [norm(unit_sphere, x, v) for x, v in zip(curve.points, curve.velocities)]
    np.testing.assert_allclose(speeds, 1.0, atol=1e-9)
    assert curve_length(curve) == pytest.approx(1.0, abs=1e-12)


def test_distance_to_a_line(plane):
    line = sample_curve(plane, lambda t: (t - 2.0, 0.0), lambda t: (1.0, 0.0), 0.0, 4.0, 40)
    result = distance_to_curve(plane, [0.33, 1.0], line, trust_radius=2.0)
    assert result.r == pytest.approx(1.0, abs=1e-9)
    assert result.foot == pytest.approx(2.33, abs=1e-6)
    np.testing.assert_allclose(result.geodesic.end, [0.33, 0.0], atol=1e-6)


def test_distance_to_curve_out_of_range(plane):
    line = sample_curve(plane, lambda t: (t, 0.0), lambda t: (1.0, 0.0), 0.0, 1.0, 10)
    with pytest.raises(OutOfRangeError):
        distance_to_curve(plane, [0.5, 3.0], line, trust_radius=1.0)


def test_reverse_and_concatenate(plane):
    first = sample_curve(plane, lambda t: (t, 0.0), lambda t: (1.0, 0.0), 0.0, 1.0, 4)
    second = sample_curve(plane, lambda t: (1.0, t), lambda t: (0.0, 1.0), 0.0, 1.0, 4)
    joined = concatenate([first, second])
    assert len(joined) == 10
    assert joined.times[4] == joined.times[5] == 1.0
    np.testing.assert_allclose(joined.end, [1.0, 1.0])
    back = reversed_curve(joined)
    np.testing.assert_allclose(back.start, [1.0, 1.0])
    np.testing.assert_allclose(back.velocities[0], [0.0, -1.0])
    assert curve_length(joined) == pytest.approx(2.0)


def test_concatenate_rejects_disconnected_curves(plane):
    first = sample_curve(plane, lambda t: (t, 0.0), lambda t: (1.0, 0.0), 0.0, 1.0, 4)
    with pytest.raises(ContractError):
        concatenate([first, first])


def test_geodesic_polygon_is_closed_across_the_seam():
    torus = catalog.flat_torus(2)
    loop = geodesic_polygon(torus, [[6.2, 0.0], [0.2, 0.0], [0.0, 0.3]], trust_radius=1.0)
    gap = torus.domain.wrapped_difference(loop.points[-1], loop.points[0])
    assert np.max(np.abs(gap)) < 1e-9
    sides = (2 * math.pi - 6.0) + math.hypot(0.2, 0.3) + math.hypot(2 * math.pi - 6.2, 0.3)
    assert curve_length(loop) == pytest.approx(sides, abs=1e-9)
