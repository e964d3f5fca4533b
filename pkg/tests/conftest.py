from __future__ import annotations

import pytest

from nvpolar.dipole import OpticalSystem
from nvpolar.photon_statistics import EmitterSystem
from nvpolar.synthetic import generate_sweep, noiseless_sweep


def pytest_addoption(parser):
    parser.addoption("--run_slow", action="store_true", default=False, help="run long acceptance checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: mark test as long-running, needs --run_slow to run")


def pytest_collection_modifyitems(config, items):
    marks = {
        "slow": pytest.mark.skip(reason="need --run_slow option to run"),
    }
    for item in items:
        for keyword in marks:
            if keyword in item.keywords and not config.getoption(f"--run_{keyword}"):
                item.add_marker(marks[keyword])


@pytest.fixture(scope="session")
def optics() -> OpticalSystem:
    return OpticalSystem()


@pytest.fixture(scope="session")
def coarse_optics() -> OpticalSystem:
    """Smaller quadrature for tests that only need self-consistent curves"""
    return OpticalSystem(quadrature_points=16)


@pytest.fixture(scope="session")
def two_nv_truth() -> EmitterSystem:
    """Two NVs along a and c, brightness ratio 0.4, background 5% of the bright emitter's peak"""
    return EmitterSystem.from_pair("a&c", ratio=0.4, background=0.05)


@pytest.fixture(scope="session")
def two_nv_sweep(two_nv_truth, optics):
    return generate_sweep(two_nv_truth, optics, t=1000, seed=0)


@pytest.fixture(scope="session")
def two_nv_noiseless(two_nv_truth, optics):
    return noiseless_sweep(two_nv_truth, optics, t=1000)


@pytest.fixture
def caplog_loguru():
    """Messages logged at WARNING or above while the test runs"""
    from loguru import logger

    messages: list[str] = []
    handler_id = logger.add(lambda message: messages.append(message.record["message"]), level="WARNING")
    yield messages
    logger.remove(handler_id)


def assert_curves_close(actual, expected, rtol: float = 1e-9, atol: float = 0.0) -> None:
    """Compares two curves elementwise and reports the worst deviation"""
    import numpy as np

    actual, expected = np.asarray(actual, dtype=float), np.asarray(expected, dtype=float)
    assert actual.shape == expected.shape, f"shape {actual.shape} vs {expected.shape}"
    deviation = np.abs(actual - expected)
    limit = atol + rtol * np.abs(expected)
    worst = int(np.argmax(deviation - limit))
    assert np.all(deviation <= limit), f"worst at index {worst}: {actual[worst]!r} vs {expected[worst]!r}"
