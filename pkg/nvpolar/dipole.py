"""Polarization-resolved detection of NV dipole emission through a high-NA objective.

Each NV center emits as two incoherent, mutually orthogonal electric dipoles lying in the plane perpendicular to its
symmetry axis. Detection integrates the dipole field over the objective's collection cone and projects it on the
transmission axis of a rotating linear polarizer.

Distances are in units of 1/k (k = 2πn/λ), so the field only depends on the product kr.
"""
from __future__ import annotations

import dataclasses
import functools
import math
from typing import Sequence

import numpy as np
from loguru import logger

from nvpolar.errors import DomainError
from nvpolar.geometry import NvLabel, NvOrientation, UnitVector3, orientation

# Power radiated over the full sphere by a unit dipole, in the field units of dipole_field
_DIPOLE_POWER = 8.0 * math.pi / 3.0


@dataclasses.dataclass(frozen=True)
class OpticalSystem:
    """Collection optics and emission model

    Args:
        numerical_aperture: objective NA, measured in the medium the emitter sits in (a solid immersion lens lets
            it exceed 1).
        relative_permittivity: ε_r of the host; the refractive index is sqrt(ε_r).
        wavelength_nm: emission wavelength. Enters only through kr, so it is informational.
        quadrature_points: nodes per dimension of the collection-cone quadrature, a multiple of 4, at least 16.
        far_field_radius: radius kr of the sphere the field is evaluated on, at least 100.
        emission_rate: detected counts per unit time from a unit-brightness emitter, up to the collection fraction.
    """

    numerical_aperture: float = 1.98
    relative_permittivity: float = 2.4**2
    wavelength_nm: float = 700.0
    quadrature_points: int = 64
    far_field_radius: float = 1.0e4
    emission_rate: float = 1000.0

    def __post_init__(self) -> None:
        if not self.numerical_aperture > 0:
            raise DomainError(f"numerical_aperture must be positive, got {self.numerical_aperture}")
        if not self.relative_permittivity >= 1.0:
            raise DomainError(f"relative_permittivity must be >= 1, got {self.relative_permittivity}")
        if not self.wavelength_nm > 0:
            raise DomainError(f"wavelength_nm must be positive, got {self.wavelength_nm}")
        if self.quadrature_points < 16 or self.quadrature_points % 4 != 0:
            raise DomainError(f"quadrature_points must be a multiple of 4 and at least 16, got {self.quadrature_points}")
        if not self.far_field_radius >= 100.0:
            raise DomainError(f"far_field_radius must be at least 100, got {self.far_field_radius}")
        if not self.emission_rate > 0:
            raise DomainError(f"emission_rate must be positive, got {self.emission_rate}")

    @classmethod
    def from_refractive_index(cls, numerical_aperture: float, refractive_index: float, **kwargs) -> OpticalSystem:
        return cls(numerical_aperture=numerical_aperture, relative_permittivity=refractive_index**2, **kwargs)

    @property
    def refractive_index(self) -> float:
        return math.sqrt(self.relative_permittivity)

    @property
    def collection_half_angle(self) -> float:
        return _collection_half_angle(self)


@functools.lru_cache(maxsize=32)
def _collection_half_angle(optics: OpticalSystem) -> float:
    ratio = optics.numerical_aperture / optics.refractive_index
    if ratio > 1.0:
        logger.warning(
            f"NA {optics.numerical_aperture} exceeds the refractive index {optics.refractive_index:.4g}, "
            "collecting the full hemisphere"
        )
        ratio = 1.0
    return math.asin(ratio)


@dataclasses.dataclass(frozen=True)
class PolarizerSetting:
    """Transmission-axis angle of the linear polarizer, in radians from lab x̂ (period π)"""

    theta: float

    @property
    def unit_vector(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    @classmethod
    def from_degrees(cls, degrees: float) -> PolarizerSetting:
        return cls(math.radians(degrees))


@dataclasses.dataclass(frozen=True)
class DipoleEmitter:
    """A single NV center

    Args:
        orientation: NV axis.
        beta: rotation of the two dipoles within the plane perpendicular to the axis. Detection does not depend
            on it since the dipoles are incoherent and orthogonal.
        brightness: P_k, the emitter's relative brightness.
    """

    orientation: NvOrientation
    beta: float = 0.0
    brightness: float = 1.0

    def __post_init__(self) -> None:
        if not self.brightness >= 0:
            raise DomainError(f"Emitter brightness must be non-negative, got {self.brightness}")

    @classmethod
    def of(cls, label: str, brightness: float = 1.0, beta: float = 0.0) -> DipoleEmitter:
        return cls(orientation=orientation(label), beta=beta, brightness=brightness)

    def dipole_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """The two orthonormal dipole moments d1, d2 ⊥ axis"""
        axis = self.orientation.axis.to_array()
        e1 = np.cross([0.0, 0.0, 1.0], axis)
        if np.linalg.norm(e1) < 1e-12:
            e1 = np.array([1.0, 0.0, 0.0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(axis, e1)
        c, s = math.cos(self.beta), math.sin(self.beta)
        return c * e1 + s * e2, -s * e1 + c * e2


def _as_vector(value: UnitVector3 | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(value, UnitVector3):
        return value.to_array()
    return np.asarray(value, dtype=float)


def dipole_field(dipole_moment: UnitVector3 | np.ndarray, points: np.ndarray) -> np.ndarray:
    """Complex electric field of an oscillating point dipole at the origin

    Far-field and near-field terms are both kept; the common 1/(4πε) prefactor is dropped.

    Args:
        dipole_moment: dipole direction.
        points: observation points of shape (..., 3), in units of 1/k.

    Returns:
        Complex field of shape (..., 3).
    """
    p = _as_vector(dipole_moment)
    r = np.asarray(points, dtype=float)
    distance = np.linalg.norm(r, axis=-1, keepdims=True)
    if np.any(distance == 0.0):
        raise DomainError("The dipole field is singular at the dipole position")
    r_dot_p = r @ p
    far = np.cross(np.cross(r, p), r) / distance**3
    near = (1.0 / distance**5 - 1j / distance**4) * (3.0 * r * r_dot_p[..., None] - distance**2 * p)
    return (far + near) * np.exp(1j * distance)


@dataclasses.dataclass(frozen=True)
class CollectionGrid:
    """Quadrature over the collection cone around +ẑ, at radius ``optics.far_field_radius``

    Gauss-Legendre nodes in polar angle and a periodic trapezoidal rule in azimuth.
    """

    points: np.ndarray
    weights: np.ndarray


@functools.lru_cache(maxsize=32)
def collection_grid(optics: OpticalSystem) -> CollectionGrid:
    half_angle = optics.collection_half_angle
    n = optics.quadrature_points
    nodes, node_weights = np.polynomial.legendre.leggauss(n)
    polar = 0.5 * half_angle * (nodes + 1.0)
    polar_weights = 0.5 * half_angle * node_weights
    azimuth = 2.0 * math.pi * np.arange(n) / n

    polar_mesh, azimuth_mesh = np.meshgrid(polar, azimuth, indexing="ij")
    radius = optics.far_field_radius
    points = radius * np.stack(
        [
            np.sin(polar_mesh) * np.cos(azimuth_mesh),
            np.sin(polar_mesh) * np.sin(azimuth_mesh),
            np.cos(polar_mesh),
        ],
        axis=-1,
    ).reshape(-1, 3)
    weights = (radius**2 * np.sin(polar_mesh) * polar_weights[:, None] * (2.0 * math.pi / n)).reshape(-1)
    points.setflags(write=False)
    weights.setflags(write=False)
    return CollectionGrid(points=points, weights=weights)


def dipole_coherency(dipole_moment: UnitVector3 | np.ndarray, optics: OpticalSystem) -> np.ndarray:
    """Collected 2x2 coherency matrix of the transverse field, as a fraction of the dipole's total power"""
    grid = collection_grid(optics)
    field = dipole_field(dipole_moment, grid.points)
    ex, ey = field[:, 0], field[:, 1]
    w = grid.weights
    jxx = float(np.sum(w * np.abs(ex) ** 2))
    jyy = float(np.sum(w * np.abs(ey) ** 2))
    jxy = float(np.sum(w * np.real(ex * np.conj(ey))))
    return np.array([[jxx, jxy], [jxy, jyy]]) / _DIPOLE_POWER


@functools.lru_cache(maxsize=256)
def _unit_coherency(label: NvLabel, beta: float, optics: OpticalSystem) -> np.ndarray:
    emitter = DipoleEmitter(orientation=orientation(label), beta=beta)
    d1, d2 = emitter.dipole_moments()
    matrix = 0.5 * optics.emission_rate * (dipole_coherency(d1, optics) + dipole_coherency(d2, optics))
    matrix.setflags(write=False)
    return matrix


def coherency_matrix(emitter: DipoleEmitter, optics: OpticalSystem) -> np.ndarray:
    """J such that the detected rate behind a polarizer at θ is uᵀ J u with u = (cos θ, sin θ)

    Includes the emitter's brightness and the optical system's emission rate.
    """
    return emitter.brightness * _unit_coherency(emitter.orientation.label, float(emitter.beta), optics)


def rate_from_coherency(matrix: np.ndarray, angles: np.ndarray | float) -> np.ndarray:
    """Evaluates uᵀ J u for every polarizer angle; broadcasts over leading dimensions of ``angles``"""
    theta = np.asarray(angles, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return matrix[0, 0] * c * c + 2.0 * matrix[0, 1] * c * s + matrix[1, 1] * s * s


def peak_rate(emitter: DipoleEmitter, optics: OpticalSystem) -> float:
    """Maximum over polarizer angle of the emitter's detection rate"""
    return float(np.linalg.eigvalsh(coherency_matrix(emitter, optics))[-1])


def mean_rate(emitter: DipoleEmitter, optics: OpticalSystem) -> float:
    """Detection rate averaged over polarizer angle, which is what an unpolarized measurement sees at half gain"""
    matrix = coherency_matrix(emitter, optics)
    return 0.5 * float(matrix[0, 0] + matrix[1, 1])


def detection_rate(
    emitter: DipoleEmitter, optics: OpticalSystem, polarizer: PolarizerSetting | float
) -> float:
    theta = polarizer.theta if isinstance(polarizer, PolarizerSetting) else float(polarizer)
    return float(rate_from_coherency(coherency_matrix(emitter, optics), theta))


def detection_curve(emitter: DipoleEmitter, optics: OpticalSystem, angles: np.ndarray) -> np.ndarray:
    return rate_from_coherency(coherency_matrix(emitter, optics), angles)


def dipole_curves(emitter: DipoleEmitter, optics: OpticalSystem, angles: np.ndarray) -> np.ndarray:
    """Per-dipole detection curves of shape (2, len(angles)); they sum to ``detection_curve``"""
    rows = []
    for moment in emitter.dipole_moments():
        matrix = 0.5 * optics.emission_rate * emitter.brightness * dipole_coherency(moment, optics)
        rows.append(rate_from_coherency(matrix, angles))
    return np.stack(rows)


def detection_probability_closed_form(theta: np.ndarray | float, gamma: float, phi: float) -> np.ndarray:
    """Low-NA analytic detection probability of an NV with polar angle γ and azimuth φ behind a polarizer at θ

    Mirrors the published two-dipole expression term by term; it carries no cross-polarized term and is therefore
    only a qualitative check on the collection integral.
    """
    theta = np.asarray(theta, dtype=float)
    return (
        np.cos(gamma) ** 2 * np.cos(theta) ** 2 * np.cos(phi) ** 2
        + np.sin(theta) ** 2 * np.cos(phi) ** 2
        + np.cos(gamma) ** 2 * np.sin(theta) ** 2 * np.sin(phi) ** 2
        + np.cos(theta) ** 2 * np.sin(phi) ** 2
    )


def detection_probability_projected(theta: np.ndarray | float, gamma: float, phi: float) -> np.ndarray:
    """Paraxial detection probability: the transverse projections of both dipoles on the polarizer axis"""
    theta = np.asarray(theta, dtype=float)
    return np.cos(gamma) ** 2 * np.cos(theta - phi) ** 2 + np.sin(theta - phi) ** 2


def pl_curve(system, optics: OpticalSystem, angles: np.ndarray) -> np.ndarray:
    """Total detected PL rate, emitters plus unpolarized background, for each polarizer angle in radians

    Args:
        system: an ``EmitterSystem``.
    """
    if not system.emitters:
        raise DomainError("pl_curve needs at least one emitter")
    return system.detection_rates(optics, angles).sum(axis=0) + system.background_rate(optics)
