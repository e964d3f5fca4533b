"""Continuous-wave ODMR spectra of a few NV centers in a static magnetic field.

The ground-state spin-1 Hamiltonian H = D S_z² + γ_e B·S is diagonalized in each NV's own frame (z along the NV
axis). The two allowed transitions leave the ms = 0 state, and each shows up as a Lorentzian dip in the PL.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy.linalg import eigh

from nvpolar.errors import DomainError
from nvpolar.geometry import NvOrientation, UnitVector3, orientation
from nvpolar.synthetic import Seed, derive_seed

# Above this field the linear Zeeman picture used for the defaults is no longer a fair description
LINEAR_ZEEMAN_LIMIT_MT = 10.0

DEFAULT_FIELD_DIRECTION = (1.0 / 3.0, 1.0 / 3.0, 1.0)

_SQRT_HALF = math.sqrt(0.5)
_SZ = np.diag([1.0, 0.0, -1.0])
_SX = _SQRT_HALF * np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])

Axis = Union[UnitVector3, NvOrientation, str]


def _axis_vector(axis: Axis) -> np.ndarray:
    if isinstance(axis, UnitVector3):
        return axis.to_array()
    if isinstance(axis, NvOrientation):
        return axis.axis.to_array()
    return orientation(axis).axis.to_array()


@dataclasses.dataclass(frozen=True)
class OdmrConfig:
    """ODMR model parameters

    Args:
        zero_field_splitting: D in GHz.
        gyromagnetic_ratio: γ_e in GHz/T.
        b_field: lab-frame field in mT.
        linewidth: Lorentzian FWHM in MHz.
        contrast_per_nv: PL dip depth of one NV with both transitions on resonance.
        frequency_grid: microwave frequencies in GHz.
    """

    zero_field_splitting: float = 2.857
    gyromagnetic_ratio: float = 28.024
    b_field: tuple[float, float, float] = (0.0, 0.0, 0.0)
    linewidth: float = 2.0
    contrast_per_nv: float = 0.1
    frequency_grid: tuple[float, ...] = tuple(np.round(np.linspace(2.80, 2.92, 1201), 12))

    def __post_init__(self) -> None:
        object.__setattr__(self, "b_field", tuple(float(b) for b in self.b_field))
        object.__setattr__(self, "frequency_grid", tuple(float(f) for f in self.frequency_grid))
        if len(self.b_field) != 3:
            raise DomainError(f"b_field needs three components, got {len(self.b_field)}")
        if not self.zero_field_splitting > 0:
            raise DomainError(f"Zero-field splitting must be positive, got {self.zero_field_splitting}")
        if not self.linewidth > 0:
            raise DomainError(f"Linewidth must be positive, got {self.linewidth}")
        if not 0.0 < self.contrast_per_nv < 1.0:
            raise DomainError(f"contrast_per_nv must lie in (0, 1), got {self.contrast_per_nv}")
        if not self.frequency_grid:
            raise DomainError("frequency_grid is empty")

    @property
    def b_field_tesla(self) -> np.ndarray:
        return np.array(self.b_field) * 1e-3

    def with_field(self, b_field: Sequence[float]) -> OdmrConfig:
        return dataclasses.replace(self, b_field=tuple(b_field))


def default_b_field(
    config: OdmrConfig | None = None,
    outer_splitting_mhz: float = 20.0,
    direction: Sequence[float] = DEFAULT_FIELD_DIRECTION,
    reference: Axis = "a",
) -> tuple[float, float, float]:
    """Field along ``direction`` whose secular splitting of the ``reference`` orientation is ``outer_splitting_mhz``

    Returns:
        The field in mT.
    """
    config = config or OdmrConfig()
    unit = np.asarray(direction, dtype=float)
    unit = unit / np.linalg.norm(unit)
    projection = abs(float(unit @ _axis_vector(reference)))
    if projection == 0.0:
        raise DomainError("The field direction is perpendicular to the reference orientation")
    magnitude_t = 0.5 * outer_splitting_mhz * 1e-3 / (config.gyromagnetic_ratio * projection)
    return tuple(float(c) for c in unit * magnitude_t * 1e3)


def _nv_frame_field(axis: np.ndarray, b_field: np.ndarray) -> tuple[float, float]:
    parallel = float(b_field @ axis)
    perpendicular = float(np.linalg.norm(b_field - parallel * axis))
    return parallel, perpendicular


def resonance_frequencies(axis: Axis, config: OdmrConfig) -> tuple[float, float]:
    """(f_minus, f_plus) in GHz of the ms = 0 → ±1 transitions of an NV along ``axis``"""
    b_field = config.b_field_tesla
    if np.linalg.norm(b_field) * 1e3 > LINEAR_ZEEMAN_LIMIT_MT:
        logger.warning(
            f"|B| = {np.linalg.norm(b_field) * 1e3:.3g} mT exceeds {LINEAR_ZEEMAN_LIMIT_MT:g} mT, "
            "spectra beyond the low-field regime are less reliable"
        )
    parallel, perpendicular = _nv_frame_field(_axis_vector(axis), b_field)
    gamma = config.gyromagnetic_ratio
    hamiltonian = config.zero_field_splitting * _SZ @ _SZ + gamma * (parallel * _SZ + perpendicular * _SX)
    energies, states = eigh(hamiltonian)
    zero = int(np.argmax(np.abs(states[1, :]) ** 2))
    transitions = sorted(float(energies[k] - energies[zero]) for k in range(3) if k != zero)
    return transitions[0], transitions[1]


def secular_frequencies(axis: Axis, config: OdmrConfig) -> tuple[float, float]:
    """D ∓ γ_e |B·axis|, the resonances when the field component perpendicular to the axis is neglected"""
    shift = config.gyromagnetic_ratio * abs(float(config.b_field_tesla @ _axis_vector(axis)))
    return config.zero_field_splitting - shift, config.zero_field_splitting + shift


def lorentzian(frequencies: np.ndarray, center: float, fwhm_ghz: float) -> np.ndarray:
    """Unit-height Lorentzian"""
    half = 0.5 * fwhm_ghz
    return half * half / ((np.asarray(frequencies) - center) ** 2 + half * half)


@dataclasses.dataclass(frozen=True)
class Resonance:
    frequency: float
    depth: float


@dataclasses.dataclass(frozen=True)
class OdmrSpectrum:
    frequencies: np.ndarray
    normalized_pl: np.ndarray
    resonances: tuple[Resonance, ...] = ()

    def __post_init__(self) -> None:
        if len(self.frequencies) != len(self.normalized_pl):
            raise DomainError("frequencies and normalized_pl have different lengths")
        if np.any(~np.isfinite(self.normalized_pl)) or np.any(self.normalized_pl < 0):
            raise DomainError("normalized_pl must be finite and non-negative")

    def dip_frequencies(self) -> np.ndarray:
        """Frequencies of the strict local minima of the PL"""
        pl = self.normalized_pl
        minima = np.flatnonzero((pl[1:-1] < pl[:-2]) & (pl[1:-1] < pl[2:])) + 1
        return self.frequencies[minima]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"frequency_ghz": self.frequencies, "normalized_pl": self.normalized_pl})


EmitterSpec = Tuple[Axis, float]


def spectrum(emitters: Sequence[EmitterSpec | Axis], config: OdmrConfig) -> OdmrSpectrum:
    """PL versus microwave frequency for NVs given as (axis, brightness weight) pairs

    Each NV's dip depth is its share of the total weight times ``contrast_per_nv``, split evenly between its two
    transitions, so NVs sharing an orientation deepen the same pair of dips.
    """
    if not emitters:
        raise DomainError("An ODMR spectrum needs at least one emitter")
    specs = [e if isinstance(e, tuple) else (e, 1.0) for e in emitters]
    weights = np.array([float(w) for _, w in specs])
    if np.any(weights < 0) or not weights.sum() > 0:
        raise DomainError("Emitter weights must be non-negative with a positive sum")

    frequencies = np.array(config.frequency_grid)
    fwhm = config.linewidth * 1e-3
    dip = np.zeros_like(frequencies)
    resonances = []
    for (axis, _), weight in zip(specs, weights / weights.sum()):
        depth = 0.5 * weight * config.contrast_per_nv
        for f in resonance_frequencies(axis, config):
            dip += depth * lorentzian(frequencies, f, fwhm)
            resonances.append(Resonance(frequency=f, depth=depth))
    return OdmrSpectrum(frequencies=frequencies, normalized_pl=1.0 - dip, resonances=tuple(resonances))


def add_odmr_noise(spectrum: OdmrSpectrum, photons_per_point: float, seed: Seed) -> OdmrSpectrum:
    """Replaces each point with Poisson(pl · N) / N"""
    if not photons_per_point > 0:
        raise DomainError(f"photons_per_point must be positive, got {photons_per_point}")
    rng = np.random.default_rng(derive_seed(seed))
    counts = rng.poisson(spectrum.normalized_pl * photons_per_point)
    return dataclasses.replace(spectrum, normalized_pl=counts / photons_per_point)
