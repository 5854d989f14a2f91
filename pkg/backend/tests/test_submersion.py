import math

import numpy as np
import pytest

from app.services import catalog
from app.services.errors import NotASubmersionError
from app.services.geometry import metric_at
from app.services.metric_checks import flat_distance, gha_check, lcl_check
from app.services.submersion import (
    delta_at,
    differential_at,
    dihedral_angle,
    integrability_tensor_at,
    map_distance,
    metric_jacobian,
    sampled_hausdorff_angle,
    second_fundamental_form_at,
    singular_values_at,
    split_at,
    vertical_projector,
)

A = 0.3


def test_twisted_projection_distortion(torus_pair):
    f2 = torus_pair.f2
    for theta in np.linspace(0.0, 2 * math.pi, 13):
        assert delta_at(f2, [1.0, theta]) == pytest.approx(abs(math.log(1 + A * math.cos(theta))), abs=1e-12)


def test_twisted_projection_suprema(torus_pair):
    f2 = torus_pair.f2
    grid = torus_pair.grid([1, 64])
    deltas = [delta_at(f2, x) for x in grid]
    expansions = [math.log(singular_values_at(f2, x)[0]) for x in grid]
    assert max(deltas) == pytest.approx(torus_pair.constants["delta_sup"], abs=1e-12)
    assert max(expansions) == pytest.approx(torus_pair.constants["expansion_sup"], abs=1e-12)
    assert torus_pair.constants["expansion_sup"] == pytest.approx(math.log(1.3))
    assert torus_pair.constants["delta_sup"] == pytest.approx(-math.log(0.7))


def test_split_is_orthonormal_and_vertical_is_the_kernel(hopf):
    f = hopf.f1
    x = [0.7, 1.0, 2.0]
    split = split_at(f, x)
    basis = np.vstack([split.vertical, split.horizontal])
    np.testing.assert_allclose(basis @ metric_at(f.total, x).g @ basis.T, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(differential_at(f, x) @ split.vertical.T, 0.0, atol=1e-12)
    assert [v.components.shape for v in split.vertical_basis] == [(3,)]


def test_metric_jacobian_of_an_isometric_projection(torus_pair):
    _, J_hat, _ = metric_jacobian(torus_pair.f1, [0.4, 0.5])
    np.testing.assert_allclose(np.abs(J_hat), [[0.0, 1.0]], atol=1e-15)


def test_vertical_projector_is_an_idempotent(hopf):
    P = vertical_projector(hopf.f2, [0.9, 0.1, 0.5])
    np.testing.assert_allclose(P @ P, P, atol=1e-10)
    assert np.trace(P) == pytest.approx(1.0, abs=1e-10)


def test_hopf_tensors(hopf):
    x = [0.8, 0.3, 1.7]
    assert delta_at(hopf.f1, x) == pytest.approx(0.0, abs=1e-10)
    assert second_fundamental_form_at(hopf.f1, x).norm == pytest.approx(0.0, abs=1e-4)
    assert integrability_tensor_at(hopf.f1, x).norm == pytest.approx(2.0, abs=1e-3)


def test_rotated_hopf_is_still_a_riemannian_submersion(hopf):
    assert delta_at(hopf.f2, [0.8, 0.3, 1.7]) == pytest.approx(0.0, abs=1e-5)


def test_warped_product_fibers_have_mean_curvature():
    warped = catalog.warped_plane(0.5)
    f = catalog.coordinate_projection(warped, catalog.real_interval(-1.0, 1.0), [0], "radial")
    r = 0.3
    expected = 2 * 0.5 * r / (1 + 0.5 * r * r)
    assert second_fundamental_form_at(f, [r, 1.0]).norm == pytest.approx(expected, abs=1e-4)
    assert integrability_tensor_at(f, [r, 1.0]).norm == 0.0


def test_flat_product_tensors_vanish(torus_pair):
    assert second_fundamental_form_at(torus_pair.f2, [0.3, 2.0]).norm == pytest.approx(0.0, abs=1e-6)
    assert integrability_tensor_at(torus_pair.f2, [0.3, 2.0]).norm == 0.0


def test_rank_deficient_map_raises():
    torus = catalog.flat_torus(2)
    folded = catalog.twisted_projection(torus, catalog.circle(), 1.0)
    with pytest.raises(NotASubmersionError):
        split_at(folded, [0.0, math.pi])


def test_rescaling_keeps_distortion(torus_pair):
    scaled = torus_pair.f2.rescaled(100.0, 100.0)
    x = [0.2, 2.5]
    assert delta_at(scaled, x) == pytest.approx(delta_at(torus_pair.f2, x), abs=1e-12)


def test_dihedral_angle_between_orthogonal_factors(torus3):
    x = [0.1, 0.2, 0.3]
    V1 = split_at(torus3.f1, x).vertical
    V2 = split_at(torus3.f2, x).vertical
    angle = dihedral_angle(torus3.total, x, V1, V2)
    assert angle == pytest.approx(math.pi / 2, abs=1e-12)
    assert angle == dihedral_angle(torus3.total, x, V2, V1)
    sampled = sampled_hausdorff_angle(torus3.total, x, V1, V2, samples=10000, seed=3)
    assert sampled <= angle + 1e-12
    assert sampled == pytest.approx(angle, abs=1e-2)


def test_dihedral_angle_of_equal_spaces_is_zero(torus_pair):
    x = [0.5, 0.5]
    V = split_at(torus_pair.f1, x).vertical
    assert dihedral_angle(torus_pair.total, x, V, split_at(torus_pair.f2, x).vertical) == pytest.approx(0.0, abs=1e-12)


def test_map_distance_is_the_twist_amplitude(torus_pair):
    grid = torus_pair.grid([1, 8])
    assert map_distance(torus_pair.f1, torus_pair.f2, grid, 1.0) == pytest.approx(A, abs=1e-9)


# ── Sampled metric checks ─────────────────────────────────────

def test_isometric_projection_is_one_lipschitz_co_lipschitz(torus_pair):
    report = lcl_check(torus_pair.f1, 1.0, [1.0, 1.0], 0.3, sample_budget=64)
    assert report.passed
    assert report.worst_forward_ratio <= 1.0


def test_twisted_projection_fails_at_q_one(torus_pair):
    report = lcl_check(torus_pair.f2, 1.0, [0.0, 0.0], 0.3, sample_budget=64)
    assert not report.passed
    assert report.witness_kind == "forward"
    assert report.witness is not None


def test_twisted_projection_passes_with_room(torus_pair):
    report = lcl_check(torus_pair.f2, 1.5, [0.0, 0.0], 0.3, sample_budget=64, seed=7)
    assert report.passed
    assert 1.0 < report.worst_forward_ratio <= 1.3


def test_twisted_projection_at_the_contracting_fiber(torus_pair):
    # at θ₂ = π the co-Lipschitz constant is 1/0.7; the 0.1·r backward slack covers e^{0.27}
    x = [0.0, math.pi]
    loose = lcl_check(torus_pair.f2, math.exp(0.27), x, 0.3, sample_budget=128)
    assert loose.passed
    assert loose.worst_forward_ratio < 0.75
    assert any("0.1·r" in rule for rule in loose.conventions)

    tight = lcl_check(torus_pair.f2, math.exp(0.1), x, 0.3, sample_budget=128)
    assert not tight.passed
    assert tight.witness_kind == "backward"
    assert abs(tight.witness[0] - math.pi) > 0.8 * 0.3


def test_lcl_is_deterministic_in_the_seed(torus_pair):
    first = lcl_check(torus_pair.f2, 1.5, [0.0, 1.0], 0.2, sample_budget=32, seed=11)
    second = lcl_check(torus_pair.f2, 1.5, [0.0, 1.0], 0.2, sample_budget=32, seed=11)
    assert first.worst_forward_ratio == second.worst_forward_ratio


def test_gha_of_the_circle_twist():
    theta = 2 * math.pi * np.arange(64) / 64
    images = np.mod(theta + A * np.sin(theta), 2 * math.pi)
    distance = flat_distance([2 * math.pi])
    report = gha_check(theta[:, None], images[:, None], 0.7, distance, distance, same_space=True)
    assert report.worst_distortion == pytest.approx(2 * A, abs=1e-12)
    assert report.max_displacement == pytest.approx(A, abs=1e-12)
    assert report.density_gap == 0.0
    assert report.passed
    assert not gha_check(theta[:, None], images[:, None], 0.5, distance, distance).passed
