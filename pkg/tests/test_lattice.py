import itertools

import pytest

from permflow.lattice import (
    CycleInOrder,
    NotALattice,
    UnknownLevelName,
    load_lattice,
)

from .conftest import lattice_family


def brute_lub(lat, a, b):
    """Independent least-upper-bound search by enumeration."""
    ups = [c for c in range(len(lat)) if lat.leq(a, c) and lat.leq(b, c)]
    least = [c for c in ups if all(lat.leq(c, d) for d in ups)]
    assert len(least) == 1
    return least[0]


def brute_glb(lat, a, b):
    downs = [c for c in range(len(lat)) if lat.leq(c, a) and lat.leq(c, b)]
    greatest = [c for c in downs if all(lat.leq(d, c) for d in downs)]
    assert len(greatest) == 1
    return greatest[0]


def test_two_point_chain(two_point):
    L, H = two_point.level("L"), two_point.level("H")
    assert two_point.join(L, H) == H
    assert two_point.bottom == L and two_point.top == H


def test_diamond_join_meet(diamond):
    l1, l2 = diamond.level("l1"), diamond.level("l2")
    assert diamond.name(diamond.join(l1, l2)) == "H"
    assert diamond.name(diamond.meet(l1, l2)) == "L"


def test_missing_lub_rejected():
    with pytest.raises(NotALattice):
        load_lattice(["a", "b", "c"], [("a", "b"), ("a", "c")])


def test_leq_examples(diamond):
    l1, l2, H = (diamond.level(x) for x in ("l1", "l2", "H"))
    assert diamond.leq(l1, H)
    assert not diamond.leq(l1, l2)
    for x in range(len(diamond)):
        assert diamond.leq(x, x)


def test_join_meet_against_bruteforce():
    for lat in lattice_family():
        for a, b in itertools.product(range(len(lat)), repeat=2):
            assert lat.join(a, b) == brute_lub(lat, a, b)
            assert lat.meet(a, b) == brute_glb(lat, a, b)


def test_join_bottom_identity():
    for lat in lattice_family():
        for x in range(len(lat)):
            assert lat.join(x, lat.bottom) == x
            assert lat.meet(x, lat.top) == x
            assert lat.leq(lat.bottom, x)
            assert lat.leq(x, lat.top)


def test_order_consistent_with_join():
    for lat in lattice_family():
        for a, b in itertools.product(range(len(lat)), repeat=2):
            assert lat.leq(a, b) == (lat.join(a, b) == b)
            assert lat.leq(a, b) == (lat.meet(a, b) == a)


def test_associativity_and_bounds(rng):
    for lat in lattice_family():
        for _ in range(200):
            a, b, c = (rng.randrange(len(lat)) for _ in range(3))
            assert lat.join(lat.join(a, b), c) == lat.join(a, lat.join(b, c))
            assert lat.meet(lat.meet(a, b), c) == lat.meet(a, lat.meet(b, c))
            assert lat.leq(a, lat.join(a, b))
            assert lat.leq(lat.meet(a, b), a)


def test_antisymmetry_enforced():
    with pytest.raises(CycleInOrder):
        load_lattice(["a", "b"], [("a", "b"), ("b", "a")])


def test_unknown_level_name():
    with pytest.raises(UnknownLevelName):
        load_lattice(["a", "b"], [("a", "zz")])


def test_level_cap():
    names = [f"x{i}" for i in range(65)]
    with pytest.raises(NotALattice):
        load_lattice(names, [(f"x{i}", f"x{i+1}") for i in range(64)])


def test_duplicate_level_name():
    with pytest.raises(NotALattice):
        load_lattice(["a", "a"], [])


def test_covers_roundtrip(diamond):
    names = {(diamond.name(a), diamond.name(b)) for a, b in diamond.covers()}
    assert names == {("L", "l1"), ("L", "l2"), ("l1", "H"), ("l2", "H")}
