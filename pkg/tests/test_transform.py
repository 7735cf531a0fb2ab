import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dfrt.basis import beam_values, build_basis, build_mode_set, evaluate_beam
from dfrt.errors import ConfigurationError, DimensionError, DomainError
from dfrt.special_fn import SphericalPoint, spherical_harmonic
from dfrt.transform import (
    CoefficientVector,
    SampledField,
    build_grid,
    completeness_decay,
    forward_transform,
    inner_product,
    inverse_transform,
    parseval_report,
    real_field_projection,
    reference_grid,
)


def random_coeffs(mode_set, rng, real_field=False):
    values = rng.normal(size=len(mode_set)) + 1j * rng.normal(size=len(mode_set))
    if real_field:
        values = real_field_projection(mode_set, values)
    return CoefficientVector(mode_set, values, real_field=real_field)


def toroidal_field_a(R=1.0):
    """grad(psi) x x with psi = (R^2 - r^2)^2 z (x + i y)."""

    def u(p):
        x, y, z = p[:, 0], p[:, 1], p[:, 2]
        s = (R * R - (x * x + y * y + z * z)) ** 2
        grad = np.stack([z + 0j, 1j * z, x + 1j * y], axis=1)
        return s[:, None] * np.cross(grad, p)

    return SampledField.from_callable(u, R)


# --- grids ------------------------------------------------------------------


def test_grid_volume_and_r2():
    g = build_grid(8, 8, 16, 1.0)
    assert g.weights.sum() == pytest.approx(4 * math.pi / 3, abs=1e-12)
    r2 = np.sum(g.points**2, axis=1)
    assert np.dot(g.weights, r2) == pytest.approx(4 * math.pi / 5, abs=1e-12)
    g2 = build_grid(6, 5, 8, 2.0)
    assert np.dot(g2.weights, np.sum(g2.points**2, axis=1)) == pytest.approx(4 * math.pi * 2**5 / 5, rel=1e-12)


def test_grid_integrates_harmonic_norm():
    g = build_grid(4, 8, 16, 1.0)
    r = np.linalg.norm(g.points, axis=1)
    theta = np.arccos(np.clip(g.points[:, 2] / r, -1, 1))
    phi = np.arctan2(g.points[:, 1], g.points[:, 0])
    y = spherical_harmonic(2, 1, theta, phi)
    # divide out the radial measure: int r^2 dr over [0, 1] is 1/3
    assert np.sum(g.weights * np.abs(y) ** 2) * 3 == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("counts", [(0, 4, 8), (4, 1, 8), (4, 4, 3)])
def test_grid_rejects_small_counts(counts):
    with pytest.raises(ConfigurationError):
        build_grid(*counts)


def test_reference_grid_counts():
    g = reference_grid(3, 2)
    assert g.shape == (24, 22, 28)


# --- inner products ---------------------------------------------------------


def test_inner_product_sesquilinear(grid32, rng):
    a = rng.normal(size=(grid32.size, 3)) + 1j * rng.normal(size=(grid32.size, 3))
    b = rng.normal(size=(grid32.size, 3)) + 1j * rng.normal(size=(grid32.size, 3))
    assert inner_product(a, b, grid32) == pytest.approx(np.conj(inner_product(b, a, grid32)), rel=1e-13)
    assert inner_product(2j * a, b, grid32) == pytest.approx(2j * inner_product(a, b, grid32), rel=1e-13)


def test_inner_product_grid_mismatch(grid32):
    with pytest.raises(DimensionError):
        inner_product(np.zeros((10, 3)), np.zeros((10, 3)), grid32)
    other = build_grid(8, 8, 16)
    field = SampledField.from_grid(np.zeros((other.size, 3)), other)
    with pytest.raises(DimensionError):
        inner_product(field, field, grid32)


def test_beam_self_inner_products(basis32, grid32):
    vals = beam_values(basis32, grid32.points)
    for i in range(0, len(vals), 7):
        assert inner_product(vals[i], vals[i], grid32) == pytest.approx(1.0, abs=1e-6)
        assert abs(inner_product(vals[i], vals[(i + 1) % len(vals)], grid32)) < 1e-6


# --- forward / inverse ------------------------------------------------------


def test_forward_of_single_beam(basis32, grid32):
    field = evaluate_beam((2, 1, 1), grid32.points, basis32)
    a = forward_transform(field, basis32, grid32)
    expected = CoefficientVector.unit(basis32.mode_set, (2, 1, 1)).values
    assert np.max(np.abs(a.values - expected)) < 1e-6


def test_forward_of_zero(basis32, grid32):
    a = forward_transform(np.zeros((grid32.size, 3)), basis32, grid32)
    assert np.all(a.values == 0)


def test_forward_of_combination(basis32, grid32):
    c1, c2 = 0.3, 0.4 - 0.2j
    field = c1 * evaluate_beam((1, 0, 1), grid32.points, basis32) + c2 * evaluate_beam(
        (3, -2, 2), grid32.points, basis32
    )
    a = forward_transform(field, basis32, grid32)
    expected = np.zeros(len(basis32.mode_set), complex)
    expected[basis32.mode_set.index((1, 0, 1))] = c1
    expected[basis32.mode_set.index((3, -2, 2))] = c2
    assert np.max(np.abs(a.values - expected)) < 1e-6


def test_inverse_examples(basis32, rng):
    pts = rng.uniform(-0.5, 0.5, size=(25, 3))
    unit = CoefficientVector.unit(basis32.mode_set, (3, 2, 1))
    assert_allclose(inverse_transform(unit, basis32, pts), evaluate_beam((3, 2, 1), pts, basis32), atol=0)
    zero = CoefficientVector.zeros(basis32.mode_set)
    assert np.all(inverse_transform(zero, basis32, pts) == 0)
    with pytest.raises(DomainError):
        inverse_transform(unit, basis32, [[0.0, 0.0, 2.0]])
    sp = [SphericalPoint(0.5, 0.3, 0.2), SphericalPoint(0.1, 2.0, 4.0)]
    assert inverse_transform(unit, basis32, sp).shape == (2, 3)


def test_round_trip_in_span(basis32, grid32, rng):
    c = random_coeffs(basis32.mode_set, rng)
    field = SampledField.from_coefficients(c, basis32)
    a = forward_transform(field, basis32, grid32)
    assert np.max(np.abs(a.values - c.values)) < 1e-6
    pts = rng.uniform(-0.55, 0.55, size=(40, 3))
    direct = inverse_transform(c, basis32, pts)
    again = inverse_transform(a, basis32, pts)
    assert np.max(np.abs(direct - again)) < 1e-5 * np.max(np.abs(direct))


def test_real_field_reconstruction(basis32, rng):
    c = random_coeffs(basis32.mode_set, rng, real_field=True)
    pts = rng.uniform(-0.55, 0.55, size=(60, 3))
    u = inverse_transform(c, basis32, pts)
    assert np.max(np.abs(u.imag)) < 1e-10 * np.max(np.abs(u))


def test_real_field_flag_checks_symmetry(basis32, rng):
    values = rng.normal(size=len(basis32.mode_set)) + 1j * rng.normal(size=len(basis32.mode_set))
    with pytest.raises(ValueError):
        CoefficientVector(basis32.mode_set, values, real_field=True)
    with pytest.raises(DimensionError):
        CoefficientVector(basis32.mode_set, values[:-1])
    with pytest.raises(ValueError):
        CoefficientVector(basis32.mode_set, np.full(len(basis32.mode_set), np.nan))


def test_grid_refinement_stable(basis32, grid32, rng):
    c = random_coeffs(basis32.mode_set, rng)
    field = SampledField.from_coefficients(c, basis32)
    fine = build_grid(2 * grid32.n_r, 2 * grid32.n_theta, 2 * grid32.n_phi)
    a = forward_transform(field, basis32, grid32).values
    b = forward_transform(field, basis32, fine).values
    assert np.max(np.abs(a - b)) < 1e-8


# --- Parseval ---------------------------------------------------------------


def test_parseval_in_span(basis32, grid32, rng):
    for _ in range(5):
        c = random_coeffs(basis32.mode_set, rng)
        field = SampledField.from_coefficients(c, basis32)
        a = forward_transform(field, basis32, grid32)
        report = parseval_report(field, a, basis32, grid32)
        assert report.relative_gap < 1e-8
        assert report.norm_sq_physical == pytest.approx(c.norm_sq(), rel=1e-6)


def test_parseval_out_of_span(basis32):
    big = build_basis(build_mode_set(4, 2))
    grid = reference_grid(4, 2)
    c_in, c_out = 1.0, 0.5 - 0.25j
    field = c_in * evaluate_beam((2, 1, 1), grid.points, big) + c_out * evaluate_beam((4, 0, 1), grid.points, big)
    a = forward_transform(field, basis32, grid)
    report = parseval_report(field, a, basis32, grid)
    out_frac = abs(c_out) ** 2 / (abs(c_in) ** 2 + abs(c_out) ** 2)
    assert report.norm_sq_spectral < report.norm_sq_physical
    assert report.relative_gap == pytest.approx(out_frac, abs=1e-6)


def test_parseval_zero_field(basis32, grid32):
    zero = np.zeros((grid32.size, 3))
    a = forward_transform(zero, basis32, grid32)
    report = parseval_report(zero, a, basis32, grid32)
    assert (report.norm_sq_physical, report.norm_sq_spectral, report.relative_gap) == (0.0, 0.0, 0.0)


# --- completeness -----------------------------------------------------------


def test_completeness_in_span(basis32, rng):
    c = random_coeffs(basis32.mode_set, rng)
    field = SampledField.from_coefficients(c, basis32)
    grid = reference_grid(4, 3)
    rows = completeness_decay(field, [1, 3, 4], [1, 2, 3], grid)
    energy = rows[0]["energy"]
    assert rows[1]["residual"] < 1e-8 * energy
    assert rows[2]["residual"] < 1e-8 * energy
    assert rows[0]["residual"] > 0.1 * energy


def test_completeness_smooth_field_decreasing():
    grid = reference_grid(6, 4)
    rows = completeness_decay(toroidal_field_a(), [1, 3, 6], [1, 2, 4], grid)
    res = [row["residual"] for row in rows]
    assert res[0] > res[1] > res[2] >= -1e-12 * rows[0]["energy"]
    assert all(r >= -1e-10 * rows[0]["energy"] for r in res)
