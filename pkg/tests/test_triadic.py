from fractions import Fraction as F
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sparse_weight_lab.errors import EmptySelection, OutOfParent
from sparse_weight_lab.triadic import (
    Cone,
    TriadicAddress as T,
    cone_children,
    contains,
    corner,
    intersection_volume,
    j_cube,
    middle_child,
    min_distance,
)


def test_middle_child_of_unit_interval():
    m = middle_child(T.root(1))
    assert m == T(1, (1,))
    assert (m.low, m.high) == ((F(1, 3),), (F(2, 3),))


def test_middle_child_coordinates_2d():
    assert middle_child(T(1, (0, 2))) == T(2, (1, 7))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_nested_middle_children_share_center(d):
    m = middle_child(middle_child(T.root(d)))
    assert m.side == F(1, 9)
    assert m.center == (F(1, 2),) * d


@pytest.mark.parametrize(
    "hat,sigma,level,expect",
    [
        (T(1, (1,)), (1,), 2, ((F(2, 3),), (F(7, 9),))),
        (T(1, (1, 1)), (1, 1), 2, ((F(2, 3), F(2, 3)), (F(7, 9), F(7, 9)))),
        (T(1, (1,)), (-1,), 2, ((F(2, 9),), (F(1, 3),))),
    ],
)
def test_j_cube_examples(hat, sigma, level, expect):
    j = j_cube(hat, sigma, level)
    assert (j.low, j.high) == expect


def test_j_cube_touches_only_at_vertex():
    hat = T(2, (4, 4))
    for sigma in [(1, 1), (1, -1), (-1, 1), (-1, -1)]:
        j = j_cube(hat, sigma, 4)
        assert intersection_volume(hat, j) == 0
        assert min_distance(hat, j) == (0, 0)
        v = corner(hat, sigma)
        assert j.closed_contains_point(v) and hat.closed_contains_point(v)


def test_j_cube_leaving_parent_raises():
    with pytest.raises(OutOfParent):
        j_cube(T(1, (2,)), (1,), 2)


def test_half_line_cone_selects_every_child():
    hat = T(1, (1,))
    cone = Cone((F(2, 3),), (-1.0,), 1.0)
    kids = cone_children(hat, (F(2, 3),), cone, 3)
    assert [k.coords[0] for k in kids] == list(range(9, 18))


def _count_centers_in_cap(n, axis, r):
    # independent oracle: enumerate child centers of the unit square from the lower-left corner
    count = 0
    for i in range(n):
        for j in range(n):
            u = np.array([(i + 0.5) / n, (j + 0.5) / n])
            u /= np.linalg.norm(u)
            if np.linalg.norm(u - axis) < r:
                count += 1
    return count


def test_cap_cone_count_matches_enumeration_at_every_node():
    axis = np.array([1.0, 1.0]) / math.sqrt(2)
    expect = _count_centers_in_cap(3, axis, 0.3)
    counts = set()
    for c in [(1, 1), (4, 7), (13, 22)]:
        hat = T(3, c) if max(c) > 8 else T(2 if max(c) > 2 else 1, c)
        v = hat.low
        kids = cone_children(hat, v, Cone(v, tuple(axis), 0.3), hat.level + 1)
        counts.add(len(kids))
    assert counts == {expect}
    # diagonal centers plus the two next to the middle one
    assert expect == 5


def test_cone_pointing_away_is_empty():
    hat = T(1, (1, 1))
    v = hat.low
    with pytest.raises(EmptySelection):
        cone_children(hat, v, Cone(v, (-1 / math.sqrt(2), -1 / math.sqrt(2)), 0.3), 2)


def test_min_distance_examples():
    assert min_distance(T(1, (0,)), T(1, (1,)))[0] == 0
    assert min_distance(T(2, (0,)), T(2, (6,)))[0] == F(5, 9)


@given(st.integers(0, 4), st.data())
def test_children_partition_the_cube(level, data):
    d = data.draw(st.integers(1, 3))
    coords = tuple(data.draw(st.integers(0, 3**level - 1)) for _ in range(d))
    q = T(level, coords)
    kids = q.children()
    assert len(kids) == 3**d
    assert sum(k.volume for k in kids) == q.volume
    assert all(contains(q, k) and k.ancestor(level) == q for k in kids)


@given(st.integers(1, 5), st.data())
def test_min_distance_symmetric_and_zero_on_overlap(level, data):
    a = T(level, (data.draw(st.integers(0, 3**level - 1)),))
    b = T(level, (data.draw(st.integers(0, 3**level - 1)),))
    assert min_distance(a, b) == min_distance(b, a)
    if intersection_volume(a, b) > 0:
        assert min_distance(a, b) == (0, 0)
