import math

import numpy as np
import pytest

from app.services import catalog
from app.services.errors import ChartDomainError, ConditioningError
from app.services.geometry import (
    ChartDomain,
    ChartedManifold,
    christoffel_symbols,
    curvature_at,
    inner,
    metric_at,
    metric_bounds,
    norm,
    orthonormal_frame,
    pullback_metric,
    sectional_curvature,
)


def test_flat_torus_has_vanishing_curvature():
    torus = catalog.flat_torus(3)
    report = curvature_at(torus, [0.4, 1.0, 5.0])
    assert report.ricci_operator_norm < 1e-5
    assert max(abs(v) for v in report.sectional_range) < 1e-5


def test_unit_sphere_sectional_curvature_is_one(unit_sphere):
    report = curvature_at(unit_sphere, [1.1, 0.7])
    assert report.sectional_range[0] == pytest.approx(1.0, abs=1e-3)
    assert report.sectional_range[1] == pytest.approx(1.0, abs=1e-3)
    # Ricci = g on the unit sphere: operator norm 1
    assert report.ricci_operator_norm == pytest.approx(1.0, abs=1e-3)


def test_sphere_of_radius_two_has_curvature_one_quarter():
    sphere = catalog.round_sphere(2.0)
    k = sectional_curvature(sphere, [1.0, 2.0], [1.0, 0.0], [0.0, 1.0])
    assert k == pytest.approx(0.25, abs=1e-3)


def test_pullback_metric_matches_closed_form_sphere(unit_sphere):
    embedded = ChartedManifold(
        name="sphere_pullback",
        domain=unit_sphere.domain,
        metric_field=pullback_metric(catalog.sphere_embedding(1.0)),
    )
    x = [0.9, 2.0]
    np.testing.assert_allclose(metric_at(embedded, x).g, metric_at(unit_sphere, x).g, atol=1e-7)


def test_finite_difference_christoffel_matches_closed_form(unit_sphere):
    fd_sphere = ChartedManifold(name="sphere_fd", domain=unit_sphere.domain, metric_field=unit_sphere.metric_field)
    x = [1.2, 0.3]
    np.testing.assert_allclose(christoffel_symbols(fd_sphere, x), christoffel_symbols(unit_sphere, x), atol=1e-7)
    assert curvature_at(fd_sphere, x).sectional_range[0] == pytest.approx(1.0, abs=1e-3)


def test_warped_plane_closed_form_christoffel_matches_differencing():
    warped = catalog.warped_plane(0.5)
    fd = ChartedManifold(name="warped_fd", domain=warped.domain, metric_field=warped.metric_field)
    x = [0.3, 1.0]
    np.testing.assert_allclose(christoffel_symbols(fd, x), christoffel_symbols(warped, x), atol=1e-7)


def test_metric_evaluation_factors(unit_sphere):
    evaluation = metric_at(unit_sphere, [1.0, 0.5])
    np.testing.assert_allclose(evaluation.factor @ evaluation.factor.T, evaluation.g, atol=1e-14)
    np.testing.assert_allclose(evaluation.g @ evaluation.g_inv, np.eye(2), atol=1e-12)


def test_orthonormal_frame_rows_are_g_orthonormal(unit_sphere):
    x = [0.6, 4.0]
    frame = orthonormal_frame(unit_sphere, x)
    gram = frame @ metric_at(unit_sphere, x).g @ frame.T
    np.testing.assert_allclose(gram, np.eye(2), atol=1e-12)


def test_inner_and_norm(unit_sphere):
    x = [math.pi / 6, 0.0]
    assert inner(unit_sphere, x, [0.0, 1.0], [0.0, 1.0]) == pytest.approx(0.25)
    assert norm(unit_sphere, x, [0.0, 2.0]) == pytest.approx(1.0)


def test_point_outside_chart_raises(unit_sphere):
    with pytest.raises(ChartDomainError):
        metric_at(unit_sphere, [math.pi + 0.1, 0.0])


def test_periodic_axis_wraps_instead_of_raising(unit_sphere):
    np.testing.assert_allclose(
        metric_at(unit_sphere, [1.0, 0.5 + 2 * math.pi]).g, metric_at(unit_sphere, [1.0, 0.5]).g
    )


def test_indefinite_metric_raises():
    bad = ChartedManifold(
        name="indefinite",
        domain=ChartDomain(lower=(-1.0, -1.0), upper=(1.0, 1.0), periodic=(False, False)),
        metric_field=lambda x: np.diag([1.0, -1.0]),
    )
    with pytest.raises(ConditioningError):
        metric_at(bad, [0.0, 0.0])


def test_near_degenerate_metric_raises():
    bad = ChartedManifold(
        name="degenerate",
        domain=ChartDomain(lower=(-1.0, -1.0), upper=(1.0, 1.0), periodic=(False, False)),
        metric_field=lambda x: np.diag([1.0, 1e-14]),
    )
    with pytest.raises(ConditioningError):
        metric_at(bad, [0.0, 0.0])


def test_wrapped_difference_takes_the_short_way():
    domain = catalog.flat_torus(2).domain
    diff = domain.wrapped_difference([0.1, 6.2], [6.2, 0.1])
    np.testing.assert_allclose(diff, [0.1 + 2 * math.pi - 6.2, 6.1 - 2 * math.pi], atol=1e-12)


def test_rescaled_manifold_scales_metric_only(unit_sphere):
    big = unit_sphere.rescaled(4.0)
    x = [1.0, 1.0]
    np.testing.assert_allclose(metric_at(big, x).g, 4.0 * metric_at(unit_sphere, x).g)
    np.testing.assert_allclose(christoffel_symbols(big, x), christoffel_symbols(unit_sphere, x))
    assert curvature_at(big, x).sectional_range[0] == pytest.approx(0.25, abs=1e-3)


def test_metric_bounds_flat_and_conformal():
    C, mu = metric_bounds(catalog.flat_torus(2), [[0.0, 0.0], [1.0, 2.0]])
    assert (C, mu) == (1.0, 0.0)
    perturbed = catalog.perturbed_torus(0.1)
    C, mu = metric_bounds(perturbed, [[math.pi / 2, math.pi / 2]])
    assert C == pytest.approx(math.exp(0.2))
    assert mu == pytest.approx(0.0, abs=1e-12)
