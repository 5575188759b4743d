import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from planedyn.errors import BudgetExceeded, ConfigError, Overflow
from planedyn.maps import (compose, evaluate, fixed_point_free_scan, grid, identity,
                           map_from_spec, map_to_spec, orbit, roundtrip_check, shear, translation)


def test_evaluate_examples(T, LH, g):
    assert evaluate(T, (0, 0), 5) == (5, 0)
    assert evaluate(LH, (1, 1), 1) == (2, 0.5)
    x, y = evaluate(g, (0, 0), 1)
    assert x == pytest.approx(1.0)
    assert y == pytest.approx(-0.5 * math.sin(1.0), abs=1e-15)
    assert evaluate(T, (3, 4), 0) == (3, 4)
    assert evaluate(T, (0, 0), -2) == (-2, 0)


def test_evaluate_guards(LH):
    with pytest.raises(Overflow):
        evaluate(LH, (1, 1), 1100)
    with pytest.raises(BudgetExceeded):
        evaluate(translation(), (0, 0), 10_001)


def test_roundtrip(T, LH, g):
    pts = grid((-10, 10, -10, 10), 1.0)
    assert roundtrip_check(T, pts[:100]) == 0
    assert roundtrip_check(LH, pts) <= 1e-12
    assert roundtrip_check(g, pts) <= 1e-9


def test_fixed_point_free_scan(T, LH, g):
    assert fixed_point_free_scan(T) == pytest.approx(1.0)
    assert fixed_point_free_scan(LH) == pytest.approx(0.0, abs=1e-12)
    # |g(p) - p|^2 = 1 + (0.5 (sin x - sin(x + 1)))^2 >= 1
    assert fixed_point_free_scan(g) >= 0.5


def test_orbit_is_consistent(LH):
    o = orbit(LH, (1, 1), -2, 2)
    assert [n for n, _ in o] == [-2, -1, 0, 1, 2]
    for (_, p), (_, q) in zip(o, o[1:]):
        assert np.allclose(LH(p), q)


def test_conjugate_matches_hand_composition(g):
    H = shear(0.5)
    P = grid((-3, 3, -3, 3), 0.5)
    assert np.allclose(g(P), H.inv(H(P) + [1.0, 0.0]), atol=1e-9)


def test_compose_order():
    f = compose(translation((1, 0)), shear(1.0))  # shear first, then shift
    p = np.array([1.0, 0.0])
    assert np.allclose(f(p), [2.0, math.sin(1.0)])
    assert np.allclose(f.inv(f(p)), p)


def test_spec_roundtrip():
    spec = {"kind": "translation", "params": {"v": [1.0, 0.0]},
            "conjugator": {"kind": "shear", "params": {"a": 0.5}}}
    m = map_from_spec(spec)
    assert map_to_spec(map_from_spec(map_to_spec(m))) == map_to_spec(m)
    with pytest.raises(ConfigError):
        map_from_spec({"kind": "rotation"})
    assert identity()(np.array([2.0, 3.0])).tolist() == [2.0, 3.0]


small = st.integers(-50, 50)


@given(small, small, st.floats(-3, 3), st.floats(-3, 3))
def test_iteration_is_a_group_action(n, m, x, y):
    g = map_from_spec({"kind": "translation", "conjugator": {"kind": "shear", "params": {"a": 0.5}}})
    a = evaluate(g, evaluate(g, (x, y), n), m)
    b = evaluate(g, (x, y), n + m)
    assert np.allclose(a, b, atol=1e-8)
