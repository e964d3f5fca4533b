"""NV orientations in a [100]-oriented diamond and the two-emitter orientation hypotheses.

The lab frame has the optical axis along ẑ = [001]; azimuths and polarizer angles are both measured from x̂.
"""
from __future__ import annotations

import dataclasses
import enum
import functools
import itertools
import math
from typing import Iterable, Sequence

import numpy as np
from loguru import logger

from nvpolar.errors import DomainError

_NORM_TOLERANCE = 1e-12

# Two pairs are degenerate when their normalized intensity and g² curves agree to this level
_CURVE_TOLERANCE = 1e-9


@dataclasses.dataclass(frozen=True)
class UnitVector3:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        norm = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if abs(norm - 1.0) > _NORM_TOLERANCE:
            raise DomainError(f"UnitVector3 must have unit norm, got |v| = {norm!r}")

    @classmethod
    def from_components(cls, x: float, y: float, z: float) -> UnitVector3:
        """Normalizes (x, y, z) into a unit vector"""
        norm = math.sqrt(x * x + y * y + z * z)
        if norm == 0.0:
            raise DomainError("Cannot normalize the zero vector")
        return cls(x / norm, y / norm, z / norm)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def dot(self, other: UnitVector3) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z


OPTICAL_AXIS = UnitVector3(0.0, 0.0, 1.0)


class NvLabel(enum.Enum):
    A = "a"
    B = "b"
    C = "c"
    D = "d"

    @classmethod
    def parse(cls, value: str | NvLabel) -> NvLabel:
        if isinstance(value, NvLabel):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DomainError(f"Unknown NV orientation label: {value!r}, expected one of a, b, c, d")

    def __lt__(self, other: NvLabel) -> bool:
        return self.value < other.value

    def __str__(self) -> str:
        return self.value


_CANONICAL_AXES: dict[NvLabel, tuple[float, float, float]] = {
    NvLabel.A: (1.0, 1.0, 1.0),
    NvLabel.B: (-1.0, -1.0, 1.0),
    NvLabel.C: (1.0, -1.0, -1.0),
    NvLabel.D: (-1.0, 1.0, -1.0),
}


@dataclasses.dataclass(frozen=True)
class NvOrientation:
    label: NvLabel
    axis: UnitVector3

    def __post_init__(self) -> None:
        expected = UnitVector3.from_components(*_CANONICAL_AXES[self.label])
        if not np.allclose(self.axis.to_array(), expected.to_array(), atol=_NORM_TOLERANCE):
            raise DomainError(f"Axis {self.axis} is not the canonical axis of orientation {self.label}")

    @property
    def polar_angle(self) -> float:
        """γ_k: angle between the NV axis and the optical axis, in radians"""
        return math.acos(max(-1.0, min(1.0, self.axis.z)))

    @property
    def azimuth(self) -> float:
        """φ_k: azimuth of the axis projection onto the lab x-y plane, in radians"""
        return math.atan2(self.axis.y, self.axis.x)

    def __str__(self) -> str:
        return str(self.label)


@functools.lru_cache(maxsize=None)
def orientation(label: str | NvLabel) -> NvOrientation:
    nv_label = NvLabel.parse(label)
    return NvOrientation(label=nv_label, axis=UnitVector3.from_components(*_CANONICAL_AXES[nv_label]))


def nv_axes() -> list[NvOrientation]:
    """The four ⟨111⟩ NV orientations A, B, C, D of a [100] crystal viewed along [001]"""
    return [orientation(label) for label in NvLabel]


@functools.total_ordering
@dataclasses.dataclass(frozen=True)
class OrientationPair:
    """Unordered pair of orientation labels, repetition allowed

    Stored with labels in alphabetical order. In forward models the ``first`` emitter is the brighter one.
    """

    first: NvLabel
    second: NvLabel

    def __post_init__(self) -> None:
        first, second = NvLabel.parse(self.first), NvLabel.parse(self.second)
        if second < first:
            first, second = second, first
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)

    @classmethod
    def parse(cls, value: str | Sequence[str | NvLabel] | OrientationPair) -> OrientationPair:
        """Parses ``"a&c"``, ``"ac"`` or ``["a", "c"]``"""
        if isinstance(value, OrientationPair):
            return value
        if isinstance(value, str):
            labels = [c for c in value if not c.isspace() and c not in "&,"]
        else:
            labels = list(value)
        if len(labels) != 2:
            raise DomainError(f"An orientation pair needs exactly two labels, got {value!r}")
        return cls(NvLabel.parse(labels[0]), NvLabel.parse(labels[1]))

    @property
    def orientations(self) -> tuple[NvOrientation, NvOrientation]:
        return orientation(self.first), orientation(self.second)

    def __lt__(self, other: OrientationPair) -> bool:
        return (self.first.value, self.second.value) < (other.first.value, other.second.value)

    def __str__(self) -> str:
        return f"{self.first}&{self.second}"


def enumerate_pairs() -> list[OrientationPair]:
    """All ten unordered two-emitter orientation hypotheses, in alphabetical order"""
    return [OrientationPair(a, b) for a, b in itertools.combinations_with_replacement(list(NvLabel), 2)]


@dataclasses.dataclass(frozen=True)
class DegeneracyClass:
    id: int
    members: frozenset

    @property
    def representative(self) -> OrientationPair:
        return min(self.members)

    def __contains__(self, pair: object) -> bool:
        return pair in self.members

    def __str__(self) -> str:
        return "{" + ", ".join(str(p) for p in sorted(self.members)) + "}"


MIXED_CLASS_MEMBERS = frozenset(OrientationPair.parse(p) for p in ("a&c", "a&d", "b&c", "b&d"))

_SIGNATURE_RATIOS = (0.25, 0.5, 1.0)
_SIGNATURE_BACKGROUNDS = (0.0, 0.1)
_SIGNATURE_ANGLES = np.deg2rad(np.arange(0.0, 181.0, 10.0))


def _pair_signature(pair: OrientationPair) -> np.ndarray:
    from nvpolar.dipole import OpticalSystem
    from nvpolar.photon_statistics import pair_curves

    optics = OpticalSystem()
    rows = []
    for ratio in _SIGNATURE_RATIOS:
        for background in _SIGNATURE_BACKGROUNDS:
            intensity, g2 = pair_curves(pair, ratio, background, optics, _SIGNATURE_ANGLES)
            rows.append(intensity / intensity.max())
            rows.append(g2)
    return np.concatenate(rows)


@functools.lru_cache(maxsize=1)
def degeneracy_classes() -> tuple[DegeneracyClass, ...]:
    """Groups the ten pairs by comparing their forward-model curves

    Classes are numbered in order of first appearance in ``enumerate_pairs()``.
    """
    signatures: list[np.ndarray] = []
    groups: list[list[OrientationPair]] = []
    for pair in enumerate_pairs():
        signature = _pair_signature(pair)
        for i, reference in enumerate(signatures):
            if np.max(np.abs(signature - reference)) <= _CURVE_TOLERANCE:
                groups[i].append(pair)
                break
        else:
            signatures.append(signature)
            groups.append([pair])

    classes = tuple(DegeneracyClass(id=i, members=frozenset(members)) for i, members in enumerate(groups))
    logger.debug(f"Computed {len(classes)} degeneracy classes: {', '.join(str(c) for c in classes)}")
    if not any(c.members == MIXED_CLASS_MEMBERS for c in classes):
        raise RuntimeError(
            "Orientation conventions do not reproduce the mixed degeneracy class {a&c, a&d, b&c, b&d}: "
            f"got {[str(c) for c in classes]}"
        )
    return classes


def degeneracy_class(pair: OrientationPair | str) -> DegeneracyClass:
    pair = OrientationPair.parse(pair)
    for cls in degeneracy_classes():
        if pair in cls:
            return cls
    raise DomainError(f"{pair} is not a two-emitter orientation hypothesis")


def quarter_turn(label: NvLabel | str) -> NvLabel:
    """Orientation line obtained by rotating ``label``'s axis by +90° about the optical axis

    Axes are compared up to sign since the dipole plane of an NV does not depend on the axis sense.
    """
    axis = orientation(label).axis
    rotated = np.array([-axis.y, axis.x, axis.z])
    for candidate in nv_axes():
        if abs(abs(float(candidate.axis.to_array() @ rotated)) - 1.0) < 1e-9:
            return candidate.label
    raise RuntimeError(f"Quarter turn of {label} is not an NV orientation")


def rotation_family(cls: DegeneracyClass) -> frozenset[int]:
    """Ids of the degeneracy classes that ``cls`` maps onto under quarter turns about the optical axis

    Classes in one family give identical fits once the polarizer zero offset is a free parameter.
    """
    family = set()
    pair = cls.representative
    for _ in range(4):
        family.add(degeneracy_class(pair).id)
        pair = OrientationPair(quarter_turn(pair.first), quarter_turn(pair.second))
    return frozenset(family)


def rotation_families() -> list[frozenset[int]]:
    families: list[frozenset[int]] = []
    for cls in degeneracy_classes():
        family = rotation_family(cls)
        if family not in families:
            families.append(family)
    return families


def parse_labels(values: Iterable[str | NvLabel]) -> list[NvLabel]:
    return [NvLabel.parse(v) for v in values]
