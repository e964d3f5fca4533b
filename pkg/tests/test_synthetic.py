from __future__ import annotations

import numpy as np
import pytest

from nvpolar.errors import DomainError
from nvpolar.photon_statistics import EmitterSystem, g2_general
from nvpolar.synthetic import (
    SweepGenerator,
    derive_seed,
    generate_sweep,
    noiseless_sweep,
    sample_counts,
)
from tests.conftest import assert_curves_close


def test_same_seed_same_sweep(two_nv_truth, optics) -> None:
    first = generate_sweep(two_nv_truth, optics, t=1000, seed=7)
    second = generate_sweep(two_nv_truth, optics, t=1000, seed=7)
    np.testing.assert_array_equal(first.intensities, second.intensities)
    np.testing.assert_array_equal(first.g2_values, second.g2_values)


def test_different_seeds_differ(two_nv_truth, optics) -> None:
    first = generate_sweep(two_nv_truth, optics, t=1000, seed=1)
    second = generate_sweep(two_nv_truth, optics, t=1000, seed=2)
    assert not np.array_equal(first.intensities, second.intensities)


def test_draws_do_not_depend_on_the_angle_grid(two_nv_truth, optics) -> None:
    full = generate_sweep(two_nv_truth, optics, t=1000, seed=3)
    prefix = generate_sweep(two_nv_truth, optics, t=1000, seed=3, angles_deg=np.arange(0.0, 91.0, 10.0))
    np.testing.assert_array_equal(prefix.intensities, full.intensities[:10])


def test_counts_are_integers(two_nv_sweep) -> None:
    np.testing.assert_array_equal(two_nv_sweep.intensities, np.round(two_nv_sweep.intensities))
    assert two_nv_sweep.acquisition_time == 1000
    assert two_nv_sweep.g2_errors is not None and np.all(two_nv_sweep.g2_errors > 0)


def test_noisy_sweep_tracks_the_noiseless_one(two_nv_sweep, two_nv_noiseless) -> None:
    relative = np.abs(two_nv_sweep.intensities / two_nv_noiseless.intensities - 1.0)
    assert relative.max() < 0.25
    assert np.abs(two_nv_sweep.g2_values - two_nv_noiseless.g2_values).max() < 0.2


def test_noiseless_sweep_is_exact(two_nv_truth, optics, two_nv_noiseless) -> None:
    angles = two_nv_noiseless.angles
    rates = two_nv_truth.detection_rates(optics, angles)
    background = two_nv_truth.background_rate(optics)
    assert_curves_close(two_nv_noiseless.g2_values, np.asarray(g2_general(rates, background)), rtol=1e-12)
    assert_curves_close(two_nv_noiseless.intensities, 1000 * (rates.sum(axis=0) + background), rtol=1e-12)


def test_noiseless_errors_shrink_with_time(two_nv_truth, optics) -> None:
    short = noiseless_sweep(two_nv_truth, optics, t=100)
    long = noiseless_sweep(two_nv_truth, optics, t=10000)
    assert_curves_close(long.g2_values, short.g2_values, rtol=1e-12)
    assert_curves_close(long.g2_errors, short.g2_errors / 10.0, rtol=1e-9)


def test_g2_error_scales_like_inverse_sqrt_counts(two_nv_truth, optics) -> None:
    g2s = np.array([generate_sweep(two_nv_truth, optics, t=1000, seed=s).g2_values for s in range(200)])
    predicted = noiseless_sweep(two_nv_truth, optics, t=1000).g2_errors
    assert_curves_close(g2s.std(axis=0), predicted, rtol=0.25)


def test_dark_angles_get_zero_g2(optics) -> None:
    dim = EmitterSystem.from_labels(["a"], [1e-9])
    sweep = generate_sweep(dim, optics, t=1.0, seed=0)
    assert np.all(sweep.intensities == 0)
    assert np.all(sweep.g2_values == 0)
    assert np.all(sweep.g2_errors == 1.0)


def test_generator_rejects_non_positive_time(two_nv_truth, optics) -> None:
    with pytest.raises(DomainError):
        SweepGenerator(two_nv_truth, optics).generate(0.0, seed=0)


def test_derive_seed() -> None:
    assert derive_seed(5, 1, 2).generate_state(2).tolist() == derive_seed(5, 1, 2).generate_state(2).tolist()
    assert derive_seed(5, 1, 2).generate_state(2).tolist() != derive_seed(5, 2, 1).generate_state(2).tolist()
    nested = derive_seed(derive_seed(5, 1), 2)
    assert nested.generate_state(2).tolist() == derive_seed(5, 1, 2).generate_state(2).tolist()


@pytest.mark.parametrize("seed", [-1, 2**64, 1.5, True, "0"])
def test_bad_seeds(seed) -> None:
    with pytest.raises(DomainError):
        derive_seed(seed)


def test_sample_counts() -> None:
    assert sample_counts(0.0, 10.0, seed=0) == 0
    assert sample_counts(3.0, 100.0, seed=11) == sample_counts(3.0, 100.0, seed=11)
    draws = sample_counts(2.0, 50.0, seed=4, size=20000)
    assert draws.mean() == pytest.approx(100.0, rel=0.01)
    assert draws.var() == pytest.approx(100.0, rel=0.05)


@pytest.mark.parametrize("rate, t", [(-1.0, 1.0), (1.0, -1.0), (np.inf, 1.0), (np.nan, 1.0)])
def test_sample_counts_domain(rate, t) -> None:
    with pytest.raises(DomainError):
        sample_counts(rate, t, seed=0)
