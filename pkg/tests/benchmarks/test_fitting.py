from __future__ import annotations

import numpy as np
import pytest

from nvpolar.dipole import DipoleEmitter, OpticalSystem, _unit_coherency, collection_grid, detection_curve
from nvpolar.estimator import FitResult, Verdict, fit_all
from nvpolar.photon_statistics import G2Map, g2_map_two
from nvpolar.sweep import PolarizationSweep
from nvpolar.synthetic import generate_sweep


@pytest.mark.benchmark(group="forward_model")
def test_detection_curve_cold_quadrature(benchmark) -> None:
    angles = np.deg2rad(np.arange(0.0, 181.0, 1.0))

    def bench_curve() -> np.ndarray:
        collection_grid.cache_clear()
        _unit_coherency.cache_clear()
        return detection_curve(DipoleEmitter.of("a"), OpticalSystem(), angles)

    curve = benchmark(bench_curve)
    assert curve.shape == (181,)


@pytest.mark.benchmark(group="forward_model")
def test_sweep_generation(two_nv_truth, optics, benchmark) -> None:
    def bench_generate() -> PolarizationSweep:
        return generate_sweep(two_nv_truth, optics, t=1000, seed=0)

    sweep = benchmark(bench_generate)
    assert len(sweep) == 19


@pytest.mark.benchmark(group="maps")
def test_two_emitter_map(benchmark) -> None:
    grid = np.round(np.linspace(0.0, 1.0, 1001), 12)

    def bench_map() -> G2Map:
        return g2_map_two(grid, grid)

    result = benchmark(bench_map)
    assert abs(result.values[0, -1] - 0.5) < 1e-12


@pytest.mark.benchmark(group="estimator")
def test_fit_all(two_nv_sweep, optics, benchmark) -> None:
    def bench_fit() -> FitResult:
        return fit_all(two_nv_sweep, optics)

    result = benchmark.pedantic(bench_fit, rounds=3, iterations=1)
    assert result.verdict is Verdict.TWO_EMITTERS
