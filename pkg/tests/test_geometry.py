from __future__ import annotations

import math

import numpy as np
import pytest

from nvpolar.errors import DomainError
from nvpolar.geometry import (
    MIXED_CLASS_MEMBERS,
    NvLabel,
    NvOrientation,
    OrientationPair,
    UnitVector3,
    degeneracy_class,
    degeneracy_classes,
    enumerate_pairs,
    nv_axes,
    orientation,
    quarter_turn,
    rotation_families,
    rotation_family,
)


def test_unit_vector_requires_unit_norm() -> None:
    with pytest.raises(DomainError):
        UnitVector3(1.0, 1.0, 0.0)
    v = UnitVector3.from_components(3.0, 0.0, 4.0)
    assert v.x == pytest.approx(0.6)
    assert v.z == pytest.approx(0.8)


def test_unit_vector_rejects_zero() -> None:
    with pytest.raises(DomainError):
        UnitVector3.from_components(0.0, 0.0, 0.0)


def test_nv_axes_are_the_four_111_directions() -> None:
    axes = nv_axes()
    assert [str(nv) for nv in axes] == ["a", "b", "c", "d"]
    for nv in axes:
        assert np.allclose(np.abs(nv.axis.to_array()), 1.0 / math.sqrt(3.0))
        assert math.cos(nv.polar_angle) == pytest.approx(nv.axis.z)
    for first in axes:
        for second in axes:
            if first is not second:
                assert abs(first.axis.dot(second.axis)) == pytest.approx(1.0 / 3.0)


def test_orientation_angles() -> None:
    a, c = orientation("a"), orientation("C")
    assert math.degrees(a.polar_angle) == pytest.approx(54.7356, abs=1e-4)
    assert math.degrees(c.polar_angle) == pytest.approx(125.2644, abs=1e-4)
    assert math.degrees(a.azimuth) == pytest.approx(45.0)
    assert math.degrees(c.azimuth) == pytest.approx(-45.0)


def test_orientation_rejects_non_canonical_axis() -> None:
    with pytest.raises(DomainError):
        NvOrientation(NvLabel.A, UnitVector3(0.0, 0.0, 1.0))


def test_unknown_label() -> None:
    with pytest.raises(DomainError):
        NvLabel.parse("e")


@pytest.mark.parametrize("text", ["a&c", "c&a", "ac", "CA", " a & c "])
def test_pair_parsing_is_unordered(text) -> None:
    pair = OrientationPair.parse(text)
    assert pair == OrientationPair(NvLabel.A, NvLabel.C)
    assert str(pair) == "a&c"


def test_pair_parsing_from_list() -> None:
    assert OrientationPair.parse(["d", "b"]) == OrientationPair.parse("b&d")


@pytest.mark.parametrize("text", ["a", "abc", "a&x", ""])
def test_bad_pairs(text) -> None:
    with pytest.raises(DomainError):
        OrientationPair.parse(text)


def test_enumerate_pairs() -> None:
    pairs = enumerate_pairs()
    assert len(pairs) == 10
    assert len(set(pairs)) == 10
    assert pairs == sorted(pairs)
    assert [str(p) for p in pairs][:4] == ["a&a", "a&b", "a&c", "a&d"]


def test_degeneracy_classes() -> None:
    classes = degeneracy_classes()
    members = [sorted(str(p) for p in cls.members) for cls in classes]
    assert members == [
        ["a&a", "a&b", "b&b"],
        ["a&c", "a&d", "b&c", "b&d"],
        ["c&c", "c&d", "d&d"],
    ]
    assert [cls.id for cls in classes] == [0, 1, 2]
    assert classes[1].members == MIXED_CLASS_MEMBERS


def test_classes_partition_the_pairs() -> None:
    seen = [p for cls in degeneracy_classes() for p in cls.members]
    assert sorted(seen) == enumerate_pairs()


def test_degeneracy_class_lookup() -> None:
    assert degeneracy_class("a&c") == degeneracy_class("b&d")
    assert degeneracy_class("a&a") != degeneracy_class("a&c")
    assert degeneracy_class("c&a").representative == OrientationPair.parse("a&c")


def test_quarter_turn() -> None:
    assert quarter_turn("a") is NvLabel.C
    assert quarter_turn("c") is NvLabel.B
    assert quarter_turn(quarter_turn("a")) is NvLabel.B


def test_rotation_families() -> None:
    aligned_ab, mixed, aligned_cd = degeneracy_classes()
    assert rotation_family(aligned_ab) == frozenset({0, 2})
    assert rotation_family(aligned_cd) == frozenset({0, 2})
    assert rotation_family(mixed) == frozenset({1})
    assert rotation_families() == [frozenset({0, 2}), frozenset({1})]
