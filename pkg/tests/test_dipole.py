from __future__ import annotations

import math

import numpy as np
import pytest

from nvpolar.dipole import (
    DipoleEmitter,
    OpticalSystem,
    PolarizerSetting,
    collection_grid,
    coherency_matrix,
    detection_curve,
    detection_probability_closed_form,
    detection_probability_projected,
    detection_rate,
    dipole_curves,
    dipole_field,
    mean_rate,
    peak_rate,
    pl_curve,
)
from nvpolar.errors import DomainError
from nvpolar.geometry import orientation
from nvpolar.photon_statistics import EmitterSystem
from tests.conftest import assert_curves_close

ANGLES = np.deg2rad(np.arange(0.0, 181.0, 10.0))


def test_beta_invariance(optics) -> None:
    rng = np.random.default_rng(20)
    for label in "ac":
        reference = detection_curve(DipoleEmitter.of(label), optics, ANGLES)
        for beta in rng.uniform(0.0, 2.0 * math.pi, size=20):
            curve = detection_curve(DipoleEmitter.of(label, beta=float(beta)), optics, ANGLES)
            assert_curves_close(curve, reference, rtol=1e-9)


def test_individual_dipoles_depend_on_beta(optics) -> None:
    first = dipole_curves(DipoleEmitter.of("a", beta=0.0), optics, ANGLES)
    rotated = dipole_curves(DipoleEmitter.of("a", beta=0.7), optics, ANGLES)
    assert not np.allclose(first[0], rotated[0])
    assert_curves_close(first.sum(axis=0), rotated.sum(axis=0), rtol=1e-9)


def test_dipole_curves_sum_to_emitter_curve(optics) -> None:
    emitter = DipoleEmitter.of("c", brightness=0.4, beta=0.3)
    curves = dipole_curves(emitter, optics, ANGLES)
    assert curves.shape == (2, len(ANGLES))
    assert_curves_close(curves.sum(axis=0), detection_curve(emitter, optics, ANGLES), rtol=1e-12)


def test_dipole_moments_are_orthonormal_and_perpendicular_to_axis() -> None:
    emitter = DipoleEmitter.of("d", beta=1.1)
    d1, d2 = emitter.dipole_moments()
    axis = orientation("d").axis.to_array()
    assert d1 @ d2 == pytest.approx(0.0, abs=1e-12)
    assert np.linalg.norm(d1) == pytest.approx(1.0)
    assert np.linalg.norm(d2) == pytest.approx(1.0)
    assert d1 @ axis == pytest.approx(0.0, abs=1e-12)
    assert d2 @ axis == pytest.approx(0.0, abs=1e-12)


def test_quarter_turn_between_orientations(optics) -> None:
    a = detection_curve(DipoleEmitter.of("a"), optics, ANGLES - math.pi / 2)
    c = detection_curve(DipoleEmitter.of("c"), optics, ANGLES)
    assert_curves_close(c, a, rtol=1e-9)


def test_opposite_azimuths_are_identical(optics) -> None:
    assert_curves_close(
        detection_curve(DipoleEmitter.of("b"), optics, ANGLES),
        detection_curve(DipoleEmitter.of("a"), optics, ANGLES),
        rtol=1e-9,
    )


def test_single_emitter_peanut(optics) -> None:
    angles = np.linspace(0.0, 2.0 * math.pi, 721)
    curve = detection_curve(DipoleEmitter.of("a"), optics, angles)
    assert np.all(curve > 0)
    assert_curves_close(curve[:361], curve[360:], rtol=1e-12)
    assert curve.min() / curve.max() == pytest.approx(0.416, abs=0.01)
    assert curve.max() == pytest.approx(peak_rate(DipoleEmitter.of("a"), optics), rel=1e-4)


def test_quadrature_has_converged() -> None:
    coarse, fine = OpticalSystem(quadrature_points=32), OpticalSystem(quadrature_points=64)
    for label in "abcd":
        emitter = DipoleEmitter.of(label, beta=0.3)
        assert_curves_close(detection_curve(emitter, coarse, ANGLES), detection_curve(emitter, fine, ANGLES), rtol=1e-6)


@pytest.mark.parametrize("label", list("abcd"))
def test_single_dipole_curves_follow_cos_squared(optics, label) -> None:
    angles = np.linspace(0.0, math.pi, 37)
    basis = np.stack([np.ones_like(angles), np.cos(2.0 * angles), np.sin(2.0 * angles)], axis=1)
    for curve in dipole_curves(DipoleEmitter.of(label, beta=0.7), optics, angles):
        coefficients, *_ = np.linalg.lstsq(basis, curve, rcond=None)
        residual = np.abs(basis @ coefficients - curve).max()
        assert residual <= 1e-6 * curve.max()


def test_mean_rate_is_polarizer_average(optics) -> None:
    emitter = DipoleEmitter.of("a")
    angles = np.linspace(0.0, math.pi, 400, endpoint=False)
    assert mean_rate(emitter, optics) == pytest.approx(detection_curve(emitter, optics, angles).mean(), rel=1e-12)


def test_rates_scale_with_brightness_and_emission_rate(optics) -> None:
    base = detection_curve(DipoleEmitter.of("a"), optics, ANGLES)
    assert_curves_close(detection_curve(DipoleEmitter.of("a", brightness=0.4), optics, ANGLES), 0.4 * base)
    brighter = OpticalSystem(emission_rate=2.0 * optics.emission_rate)
    assert_curves_close(detection_curve(DipoleEmitter.of("a"), brighter, ANGLES), 2.0 * base)


def test_detection_rate_accepts_polarizer_setting(optics) -> None:
    emitter = DipoleEmitter.of("c")
    assert detection_rate(emitter, optics, PolarizerSetting.from_degrees(30.0)) == pytest.approx(
        detection_rate(emitter, optics, math.radians(30.0))
    )


def test_collected_fraction_is_below_one(optics) -> None:
    matrix = coherency_matrix(DipoleEmitter.of("a"), optics) / optics.emission_rate
    assert np.trace(matrix) < 1.0
    assert np.all(np.linalg.eigvalsh(matrix) > 0)


def test_low_na_matches_paraxial_projection() -> None:
    optics = OpticalSystem.from_refractive_index(0.05, 1.0)
    for label in "abcd":
        nv = orientation(label)
        curve = detection_curve(DipoleEmitter(nv), optics, ANGLES)
        expected = detection_probability_projected(ANGLES, nv.polar_angle, nv.azimuth)
        assert_curves_close(curve / curve.max(), expected / expected.max(), rtol=0.0, atol=5e-3)


@pytest.mark.parametrize("phi", [0.0, math.pi / 2])
def test_closed_form_agrees_with_projection_on_axes(phi) -> None:
    gamma = math.acos(1.0 / math.sqrt(3.0))
    assert_curves_close(
        detection_probability_closed_form(ANGLES, gamma, phi),
        detection_probability_projected(ANGLES, gamma, phi),
        rtol=1e-12,
        atol=1e-15,
    )


def test_closed_form_along_optical_axis_is_flat() -> None:
    assert_curves_close(detection_probability_closed_form(ANGLES, 0.0, 0.3), np.ones_like(ANGLES), rtol=1e-12)


def test_dipole_field_is_singular_at_origin() -> None:
    with pytest.raises(DomainError):
        dipole_field(np.array([1.0, 0.0, 0.0]), np.zeros((1, 3)))


def test_far_field_is_transverse() -> None:
    points = 1e4 * np.array([[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.0, 0.6, 0.8]])
    field = dipole_field(np.array([1.0, 0.0, 0.0]), points)
    radial = np.abs(np.sum(field * points, axis=-1)) / 1e4
    assert np.all(radial < 1e-3 * np.linalg.norm(field, axis=-1))


def test_collection_grid_covers_the_cap(optics) -> None:
    grid = collection_grid(optics)
    half_angle = optics.collection_half_angle
    expected = 2.0 * math.pi * optics.far_field_radius**2 * (1.0 - math.cos(half_angle))
    assert grid.weights.sum() == pytest.approx(expected, rel=1e-10)
    with pytest.raises(ValueError):
        grid.weights[0] = 0.0


def test_aperture_beyond_index_is_clamped() -> None:
    optics = OpticalSystem.from_refractive_index(1.4, 1.0)
    assert optics.collection_half_angle == pytest.approx(math.pi / 2)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"numerical_aperture": 0.0},
        {"relative_permittivity": 0.5},
        {"quadrature_points": 30},
        {"quadrature_points": 4},
        {"quadrature_points": 12},
        {"far_field_radius": -1.0},
        {"far_field_radius": 1.0},
        {"far_field_radius": 99.0},
        {"emission_rate": 0.0},
    ],
)
def test_optical_system_validation(kwargs) -> None:
    with pytest.raises(DomainError):
        OpticalSystem(**kwargs)


def test_negative_brightness() -> None:
    with pytest.raises(DomainError):
        DipoleEmitter.of("a", brightness=-1.0)


def test_pl_curve_adds_background(optics, two_nv_truth) -> None:
    curve = pl_curve(two_nv_truth, optics, ANGLES)
    emitters = two_nv_truth.detection_rates(optics, ANGLES).sum(axis=0)
    background = 0.05 * peak_rate(DipoleEmitter.of("a"), optics)
    assert_curves_close(curve, emitters + background, rtol=1e-12)
    assert two_nv_truth.background_rate(optics) == pytest.approx(background)


def test_pl_curve_without_background(optics) -> None:
    system = EmitterSystem.from_labels(["a"])
    assert_curves_close(pl_curve(system, optics, ANGLES), detection_curve(DipoleEmitter.of("a"), optics, ANGLES))
