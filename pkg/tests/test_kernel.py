from fractions import Fraction as F
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sparse_weight_lab.errors import BallNotContained, NoConeFound
from sparse_weight_lab.kernel import (
    ConeData,
    cube_integral,
    find_cones,
    kernel_value,
    parse_kernel,
    pv_self_integral,
    riesz_kernel,
    smoothness_constant,
    verify_mean_zero,
)
from sparse_weight_lab.triadic import TriadicAddress as T

C1 = 1 / math.pi
C2 = math.gamma(1.5) / math.pi**1.5


def test_riesz_constants():
    assert riesz_kernel(1, 1).normalization == pytest.approx(C1, rel=1e-15)
    assert riesz_kernel(2, 1).normalization == pytest.approx(C2, rel=1e-15)


def test_omega_values():
    h, r = parse_kernel("hilbert"), parse_kernel("riesz:d=2,j=1")
    assert h.omega([[1.0], [-1.0]]).tolist() == pytest.approx([C1, -C1])
    assert r.omega([[1.0, 0.0], [0.0, 1.0]]).tolist() == pytest.approx([C2, 0.0])


@pytest.mark.parametrize("ident", ["hilbert", "riesz:d=2,j=1", "riesz:d=2,j=2", "riesz:d=3,j=3", "cos2", "sin2"])
def test_mean_zero(ident):
    assert verify_mean_zero(parse_kernel(ident)) <= 1e-12


def test_constant_kernel_fails_mean_zero():
    assert verify_mean_zero(parse_kernel("const")) == pytest.approx(1.0)


@pytest.mark.parametrize("bad", ["", "riesz:d=2,j=3", "riesz:q=1", "foo", "cos2:d=3"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_kernel(bad)


def test_hilbert_cones():
    c = find_cones(parse_kernel("hilbert"))
    assert c.z_plus == (1.0,) and c.z_minus == (-1.0,)
    assert c.lam == pytest.approx(C1 / 2)


def test_riesz_cones_on_diagonal():
    c = find_cones(parse_kernel("riesz:d=2,j=1"))
    s = 1 / math.sqrt(2)
    assert c.z_plus == pytest.approx((s, s)) and c.z_minus == pytest.approx((-s, -s))
    assert c.tau == (-1, -1)
    spec = parse_kernel("riesz:d=2,j=1")
    assert float(spec.omega([c.z_plus])[0]) == pytest.approx(C2 / math.sqrt(2))


def test_cones_json_round_trip():
    c = find_cones(parse_kernel("riesz:d=2,j=1"))
    assert ConeData.from_json(c.to_json()) == c


def test_constant_kernel_has_no_cone():
    with pytest.raises(NoConeFound):
        find_cones(parse_kernel("const"))


def test_kernel_value_examples():
    assert kernel_value(parse_kernel("hilbert"), [0.0], [1.0]) == pytest.approx(-C1)
    assert kernel_value(parse_kernel("riesz:d=2,j=1"), [2.0, 0.0], [0.0, 0.0]) == pytest.approx(C2 / 4)


@given(st.floats(0.1, 10), st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_kernel_homogeneity(t, v):
    spec = parse_kernel("riesz:d=2,j=1")
    x, y = np.array(v[:2]), np.array(v[2:])
    if np.linalg.norm(x - y) < 1e-3:
        return
    assert kernel_value(spec, x, y) == pytest.approx(t**2 * kernel_value(spec, t * x, t * y), rel=1e-12)


def test_cube_integral_hilbert_closed_form():
    # int_0^1 Omega(2 - y)/|2 - y| dy = c log 2
    assert cube_integral(parse_kernel("hilbert"), [2.0], T(0, (0,)))[0] == pytest.approx(C1 * math.log(2), rel=1e-12)


def _midpoint(spec, x, cube, n):
    lo, s = np.array([float(v) for v in cube.low]), float(cube.side)
    g = (np.arange(n) + 0.5) / n * s
    pts = np.stack(np.meshgrid(*([g] * spec.d), indexing="ij"), -1).reshape(-1, spec.d) + lo
    u = np.asarray(x)[None, :] - pts
    return float(np.sum(spec.omega(u) / np.linalg.norm(u, axis=1) ** spec.d) * (s / n) ** spec.d)


def test_cube_integral_matches_midpoint_oracle():
    spec = parse_kernel("riesz:d=2,j=1")
    rng = np.random.default_rng(7)
    for _ in range(20):
        cube = T(2, tuple(rng.integers(0, 9, 2)))
        x = np.array([float(v) for v in cube.center]) + rng.choice([-1, 1], 2) * rng.uniform(0.4, 1.0, 2)
        ref = _midpoint(spec, x, cube, 600)
        got, err = cube_integral(spec, x, cube)
        assert err <= 1e-9 * max(1.0, abs(got))
        bound = spec.sup_abs_omega * float(cube.volume) / max(
            np.linalg.norm(np.maximum(0, np.maximum(np.array([float(v) for v in cube.low]) - x,
                                                   x - np.array([float(v) for v in cube.high])))), 1e-9) ** 2
        assert abs(got) <= bound
        assert got == pytest.approx(ref, abs=1e-8 * max(1.0, abs(ref)) + 1e-6 * abs(ref))


def test_pv_self_integral_symmetric_zero():
    assert pv_self_integral(parse_kernel("hilbert"), [F(1, 2)], T(0, (0,))) == pytest.approx(0, abs=1e-15)


def test_pv_self_integral_closed_form_1d():
    # x = 4/9 in [1/3, 2/3]: c (log(x - a) - log(b - x))
    x, a, b = 4 / 9, 1 / 3, 2 / 3
    got = pv_self_integral(parse_kernel("hilbert"), [F(4, 9)], T(1, (1,)))
    assert got == pytest.approx(C1 * (math.log(x - a) - math.log(b - x)), rel=1e-13)


def test_pv_self_integral_crude_bound_2d():
    spec = parse_kernel("riesz:d=2,j=1")
    q = T(1, (1, 1))
    v = pv_self_integral(spec, [F(4, 9), F(5, 9)], q)
    assert abs(v) <= spec.sup_abs_omega * 3**2 * float(q.volume)


def test_pv_self_integral_requires_middle_child():
    with pytest.raises(BallNotContained):
        pv_self_integral(parse_kernel("hilbert"), [F(1, 9)], T(0, (0,)))


def test_smoothness_constant_finite():
    assert 0 < smoothness_constant(parse_kernel("riesz:d=2,j=1"), samples=500) < 100


def test_reflection_invariant_kernel_has_no_paired_cone():
    # cos 2theta is unchanged by every coordinate reflection, so no tau pairs its sign cones
    with pytest.raises(NoConeFound):
        find_cones(parse_kernel("cos2"))
    c = find_cones(parse_kernel("sin2"))
    assert c.tau in {(1, -1), (-1, 1)}
