from __future__ import annotations

from nvpolar.logging import setup_logger

###
# Setup logging
###


setup_logger()

###
# Version from the installed distribution metadata
###

from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as _version


def get_version() -> str:
    try:
        return _version("nvpolar")
    except PackageNotFoundError:
        return "0.0.0+dev"


__version__ = get_version()

###
# nvpolar top-level imports
###

from nvpolar.dipole import DipoleEmitter, OpticalSystem, PolarizerSetting, pl_curve
from nvpolar.estimator import FitOptions, Verdict, confidence_monte_carlo, fit_all, fit_pair
from nvpolar.geometry import OrientationPair, degeneracy_classes, enumerate_pairs, nv_axes
from nvpolar.photon_statistics import EmitterSystem, g2_angular, g2_general
from nvpolar.sweep import PolarizationSweep, read_sweep_csv, write_sweep_csv
from nvpolar.synthetic import generate_sweep, noiseless_sweep

__all__ = [
    "DipoleEmitter",
    "EmitterSystem",
    "FitOptions",
    "OpticalSystem",
    "OrientationPair",
    "PolarizationSweep",
    "PolarizerSetting",
    "Verdict",
    "confidence_monte_carlo",
    "degeneracy_classes",
    "enumerate_pairs",
    "fit_all",
    "fit_pair",
    "g2_angular",
    "g2_general",
    "generate_sweep",
    "noiseless_sweep",
    "nv_axes",
    "pl_curve",
    "read_sweep_csv",
    "write_sweep_csv",
]
