"""Zero-delay second-order correlation g²(0) of a few independent single-photon emitters plus background.

With P_k the detected rate of emitter k and NP_γ the detected rate of an uncorrelated background,

    g²(0) = 1 - Σ P_k² / (Σ P_k + NP_γ)²

which reduces to 1 - 1/n for n equal emitters and to 2α/(1+α)² for two emitters of brightness ratio α.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Sequence, Union

import numpy as np
import pandas as pd

from nvpolar.dipole import (
    DipoleEmitter,
    OpticalSystem,
    coherency_matrix,
    peak_rate,
    rate_from_coherency,
)
from nvpolar.errors import DomainError
from nvpolar.geometry import NvOrientation, OrientationPair, orientation

ArrayLike = Union[float, Sequence[float], np.ndarray]


def _result(value: np.ndarray) -> float | np.ndarray:
    return float(value) if np.ndim(value) == 0 else value


def _non_negative(name: str, value: ArrayLike) -> np.ndarray:
    array = np.asarray(value, dtype=float)
    if np.any(~np.isfinite(array)) or np.any(array < 0):
        raise DomainError(f"{name} must be finite and non-negative, got {value!r}")
    return array


def g2_equal(n: int) -> float:
    """g² for n identical emitters and no background"""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError(f"Number of emitters must be a positive integer, got {n!r}")
    return 1.0 - 1.0 / int(n)


def g2_two(alpha: ArrayLike) -> float | np.ndarray:
    """g² for two emitters of brightness ratio ``alpha`` = P2/P1 and no background; symmetric under α → 1/α"""
    a = _non_negative("alpha", alpha)
    return _result(2.0 * a / (1.0 + a) ** 2)


def g2_general(rates: Sequence[ArrayLike] | np.ndarray, background: ArrayLike = 0.0) -> float | np.ndarray:
    """g² for any number of emitters with rates along the first axis of ``rates``, plus a background rate"""
    p = _non_negative("Emitter rates", rates)
    if p.ndim == 0:
        p = p[None]
    b = _non_negative("Background rate", background)
    total = p.sum(axis=0) + b
    if np.any(total <= 0):
        raise DomainError("g2 is undefined when emitters and background are all dark")
    return _result(1.0 - np.sum(p * p, axis=0) / (total * total))


def g2_two_background(p1: ArrayLike, p2: ArrayLike, background: ArrayLike) -> float | np.ndarray:
    """g² for two emitters with rates P1, P2 and background rate NP_γ"""
    p1, p2, b = (
        _non_negative("P1", p1),
        _non_negative("P2", p2),
        _non_negative("Background rate", background),
    )
    total = p1 + p2 + b
    if np.any(total <= 0):
        raise DomainError("g2 is undefined when emitters and background are all dark")
    return _result((2.0 * p1 * p2 + 2.0 * (p1 + p2) * b + b * b) / (total * total))


def g2_three(p1: ArrayLike, p2: ArrayLike, p3: ArrayLike) -> float | np.ndarray:
    """g² for three emitters and no background"""
    return g2_general(np.stack(np.broadcast_arrays(*(np.asarray(p, dtype=float) for p in (p1, p2, p3)))))


def g2_contour_two(ratios: ArrayLike, level: float = 0.5) -> float | np.ndarray:
    """Background-to-P1 ratio at which two emitters of ratio r reach g² = ``level``

    Negative where the emitters alone already exceed ``level``.
    """
    if not 0.0 <= level < 1.0:
        raise DomainError(f"g2 contour level must lie in [0, 1), got {level}")
    r = _non_negative("ratio", ratios)
    return _result(np.sqrt((1.0 + r * r) / (1.0 - level)) - (1.0 + r))


def _as_orientation(value: NvOrientation | str) -> NvOrientation:
    return value if isinstance(value, NvOrientation) else orientation(value)


@dataclasses.dataclass(frozen=True)
class EmitterSystem:
    """One to three NV emitters and an unpolarized background

    The background rate is ``background`` times the peak polarized rate of the brightest emitter, which is how
    background is quoted when fitting.
    """

    emitters: tuple[DipoleEmitter, ...]
    background: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "emitters", tuple(self.emitters))
        if not 1 <= len(self.emitters) <= 3:
            raise DomainError(f"An emitter system holds 1 to 3 emitters, got {len(self.emitters)}")
        if not (math.isfinite(self.background) and self.background >= 0):
            raise DomainError(f"Background must be finite and non-negative, got {self.background}")
        if sum(e.brightness for e in self.emitters) <= 0:
            raise DomainError("At least one emitter must have positive brightness")

    @classmethod
    def from_labels(
        cls,
        labels: Sequence[str],
        brightness: Sequence[float] | None = None,
        background: float = 0.0,
        beta: float = 0.0,
    ) -> EmitterSystem:
        brightness = [1.0] * len(labels) if brightness is None else list(brightness)
        if len(brightness) != len(labels):
            raise DomainError(f"Got {len(labels)} orientations but {len(brightness)} brightness values")
        return cls(
            emitters=tuple(DipoleEmitter.of(label, brightness=p, beta=beta) for label, p in zip(labels, brightness)),
            background=background,
        )

    @classmethod
    def from_pair(cls, pair: OrientationPair | str, ratio: float, background: float = 0.0) -> EmitterSystem:
        """Two emitters, the pair's first orientation being the brighter with unit brightness"""
        pair = OrientationPair.parse(pair)
        if not 0.0 <= ratio <= 1.0:
            raise DomainError(f"Brightness ratio must lie in [0, 1], got {ratio}")
        return cls.from_labels([pair.first.value, pair.second.value], [1.0, ratio], background)

    def background_rate(self, optics: OpticalSystem) -> float:
        """NP_γ in detected counts per unit time"""
        return self.background * max(peak_rate(e, optics) for e in self.emitters)

    def detection_rates(self, optics: OpticalSystem, angles: np.ndarray) -> np.ndarray:
        """Per-emitter detected rates of shape (n_emitters, len(angles))"""
        return np.stack([rate_from_coherency(coherency_matrix(e, optics), angles) for e in self.emitters])

    def g2_curve(self, optics: OpticalSystem, angles: np.ndarray) -> np.ndarray:
        return np.asarray(g2_general(self.detection_rates(optics, angles), self.background_rate(optics)))

    def unpolarized_g2(self, optics: OpticalSystem) -> float:
        return unpolarized_g2(self, optics)

    def pair(self) -> OrientationPair:
        if len(self.emitters) != 2:
            raise DomainError(f"Only two-emitter systems define an orientation pair, got {len(self.emitters)}")
        return OrientationPair(self.emitters[0].orientation.label, self.emitters[1].orientation.label)

    @property
    def ratio(self) -> float:
        """Dim-to-bright brightness ratio of a two-emitter system"""
        if len(self.emitters) != 2:
            raise DomainError("Brightness ratio is only defined for two emitters")
        p = sorted(e.brightness for e in self.emitters)
        return p[0] / p[1]


def unpolarized_g2(system: EmitterSystem, optics: OpticalSystem, n_angles: int = 360) -> float:
    """g² measured without a polarizer, from polarizer-averaged emitter rates and the same background rate"""
    angles = np.linspace(0.0, math.pi, n_angles, endpoint=False)
    rates = system.detection_rates(optics, angles).mean(axis=1)
    return float(g2_general(rates, system.background_rate(optics)))


def g2_angular(
    theta: ArrayLike,
    pair: OrientationPair | Sequence[NvOrientation | str],
    p_scales: Sequence[float] = (1.0, 1.0),
    background_rate: float = 0.0,
    optics: OpticalSystem | None = None,
) -> float | np.ndarray:
    """g² of two emitters behind a polarizer at ``theta`` (radians)

    Args:
        theta: polarizer angles.
        pair: the two orientations; order matters, ``p_scales`` follows it.
        p_scales: brightness of each emitter.
        background_rate: NP_γ in counts per unit time, as an absolute rate.
        optics: collection optics, defaults to ``OpticalSystem()``.
    """
    optics = OpticalSystem() if optics is None else optics
    if isinstance(pair, (OrientationPair, str)):
        pair = OrientationPair.parse(pair)
        orientations = pair.orientations
    else:
        if len(pair) != 2:
            raise DomainError(f"g2_angular needs exactly two orientations, got {len(pair)}")
        orientations = tuple(_as_orientation(o) for o in pair)
    if len(p_scales) != 2:
        raise DomainError(f"g2_angular needs two brightness values, got {len(p_scales)}")

    theta = np.asarray(theta, dtype=float)
    p1, p2 = (
        rate_from_coherency(coherency_matrix(DipoleEmitter(o, brightness=p), optics), theta)
        for o, p in zip(orientations, p_scales)
    )
    return g2_two_background(p1, p2, background_rate)


def pair_curves(
    pair: OrientationPair | str,
    ratio: float,
    background: float,
    optics: OpticalSystem,
    angles: np.ndarray,
    offset: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Unscaled PL intensity and g² of a two-emitter hypothesis

    The pair's first orientation is the bright emitter with unit brightness; ``background`` is relative to its peak
    polarized rate, and ``offset`` shifts the polarizer zero.
    """
    system = EmitterSystem.from_pair(pair, ratio, background)
    rates = system.detection_rates(optics, np.asarray(angles, dtype=float) - offset)
    npgamma = system.background_rate(optics)
    return rates.sum(axis=0) + npgamma, np.asarray(g2_general(rates, npgamma))


@dataclasses.dataclass(frozen=True)
class G2Map:
    """g² tabulated on a rectangular grid; ``values[i, j]`` belongs to ``rows[i]`` and ``columns[j]``"""

    row_name: str
    rows: np.ndarray
    column_name: str
    columns: np.ndarray
    values: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, index=pd.Index(self.rows, name=self.row_name), columns=self.columns)
        frame.columns.name = self.column_name
        return frame

    def contour(self, level: float = 0.5) -> np.ndarray:
        """For each column, the smallest row value where g² reaches ``level`` (NaN if it never does)"""
        reached = self.values >= level
        out = np.full(len(self.columns), np.nan)
        for j in range(len(self.columns)):
            hits = np.flatnonzero(reached[:, j])
            if hits.size:
                out[j] = self.rows[hits[0]]
        return out


def g2_map_two(ratios: ArrayLike, backgrounds: ArrayLike) -> G2Map:
    """g² of two emitters against brightness ratio (columns) and NP_γ/P1 (rows)"""
    r = _non_negative("ratio", ratios).ravel()
    b = _non_negative("background", backgrounds).ravel()
    values = g2_two_background(1.0, r[None, :], b[:, None])
    return G2Map(row_name="npgamma_over_p1", rows=b, column_name="p2_over_p1", columns=r, values=np.asarray(values))


def g2_map_three(ratios2: ArrayLike, ratios3: ArrayLike) -> G2Map:
    """g² of three emitters against P2/P1 (columns) and P3/P1 (rows), no background"""
    r2 = _non_negative("P2/P1", ratios2).ravel()
    r3 = _non_negative("P3/P1", ratios3).ravel()
    values = g2_three(1.0, r2[None, :], r3[:, None])
    return G2Map(row_name="p3_over_p1", rows=r3, column_name="p2_over_p1", columns=r2, values=np.asarray(values))
