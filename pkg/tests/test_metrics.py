import math
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from planedyn.errors import ConfigError
from planedyn.maps import linear_hyperbolic, shear, translation
from planedyn.metrics import (LyapunovMetric, PathFamily, check_pairing, eval_components,
                              metric_axiom_scan, metric_from_spec, metric_to_spec, path_cost,
                              path_infimum_numeric, scaling_check)

from conftest import LN2

CLOSED_DS = (1 - 0.5) / LN2  # integral of 2**-x over [0, 1]


def test_mode_c_examples(mC):
    assert eval_components(mC, (0, 0), (1, 0)) == pytest.approx((CLOSED_DS, 0, CLOSED_DS))
    assert eval_components(mC, (0, 0), (0, 1)) == (0.0, 1.0, 1.0)


@pytest.mark.parametrize("mode", "ABCD")
def test_identity_of_indiscernibles(mode):
    m = LyapunovMetric(mode, 2.0, PathFamily(restarts=2, budget=2000))
    assert eval_components(m, (0.3, -1.2), (0.3, -1.2)) == (0.0, 0.0, 0.0)


def test_mode_b_and_d_closed_forms():
    b = LyapunovMetric("B", 2.0)
    Ds, Du, _ = eval_components(b, (-1, 0), (2, 3))
    assert Ds == pytest.approx((2 - 0.25) / LN2)
    assert Du == pytest.approx(0.5 * 3)
    d = LyapunovMetric("D", 2.0)
    assert eval_components(d, (0, 0), (3, -4)) == (4.0, 3.0, 7.0)


def test_mode_e_is_a_pullback(mC, mE):
    H = shear(0.5)
    p, q = np.array([0.4, 1.0]), np.array([-1.0, 2.0])
    assert mE(p, q) == pytest.approx(mC(H(p), H(q)))


def test_path_cost_segments_match_quadrature():
    pts = [(0.0, 0.0), (-1.5, 0.7), (0.8, 1.9), (0.0, 1.0)]
    t = np.linspace(0, 1, 20001)
    tot = 0.0
    for (ax, ay), (bx, by) in zip(pts, pts[1:]):
        x = ax + t * (bx - ax)
        tot += np.trapezoid(2.0 ** x * abs(by - ay), t)
    assert path_cost("unstable", 2.0, pts) == pytest.approx(tot, rel=1e-7)


def test_mode_a_stable_matches_closed_form():
    fam = PathFamily(detour=0.0)
    assert path_infimum_numeric("stable", 2.0, (0, 0), (1, 0), fam) == pytest.approx(CLOSED_DS, abs=1e-6)


@pytest.mark.parametrize("M", [0.0, 2.0, 5.0, 10.0])
def test_mode_a_unstable_collapses_with_detour(M):
    cost = path_infimum_numeric("unstable", 2.0, (0, 0), (0, 1), PathFamily(detour=M))
    # explicit three-leg detour to x1 = -M costs 2**-M; straight path costs 1
    assert cost <= 2.0 ** -M + 1e-9
    assert cost >= 2.0 ** -M - 1e-6


def test_mode_a_input_checks():
    with pytest.raises(ValueError):
        path_infimum_numeric("unstable", 2.0, (0, 0), (0, 1), PathFamily(n_points=1))
    with pytest.raises(ValueError):
        path_infimum_numeric("diagonal", 2.0, (0, 0), (0, 1))


def test_scaling_examples(mC, mD, mE, T, g):
    rng = np.random.default_rng(1)
    pairs = rng.uniform(-8, 8, (1000, 2, 2))
    assert max(scaling_check(mC, T, pairs)) <= 1e-9
    assert max(scaling_check(mD, linear_hyperbolic(2.0), pairs)) <= 1e-12
    assert max(scaling_check(mE, g, pairs)) <= 1e-9


def test_axiom_scan(mC, mD):
    rng = np.random.default_rng(2)
    sample = rng.uniform(-4, 4, (200, 2))
    rep = metric_axiom_scan(mC, sample)
    assert rep == {"symmetry_dev": 0.0, "identity_dev": 0.0, "triangle_violations": 0}
    assert metric_axiom_scan(mD, sample)["triangle_violations"] == 0


def test_mode_b_violates_the_triangle_inequality():
    b = LyapunovMetric("B", 2.0)
    p, q, r = (0, 0), (-1, 50), (0, 100)
    # oracle by hand: U(p,r) = 100; U(p,q) = U(q,r) = 1/ln2 + 25
    assert b(np.array(p), np.array(r)) == pytest.approx(100)
    assert b(np.array(p), np.array(q)) == pytest.approx(1 / LN2 + 25)
    assert metric_axiom_scan(b, [p, q, r])["triangle_violations"] >= 1


def test_pairing_and_spec():
    with pytest.raises(ConfigError):
        check_pairing(LyapunovMetric("D", 2.0), translation())
    with pytest.raises(ConfigError):
        check_pairing(LyapunovMetric("D", 3.0), linear_hyperbolic(2.0))
    with pytest.raises(ConfigError):
        LyapunovMetric("C", 1.0)
    spec = {"mode": "E", "conjugator": {"kind": "shear", "params": {"a": 0.5}},
            "base": {"mode": "C", "lambda": 2.0}}
    assert metric_to_spec(metric_from_spec(spec)) == spec


pt = st.tuples(st.floats(-6, 6), st.floats(-6, 6))


@given(pt, pt, pt)
def test_mode_c_triangle_and_b_c_agreement(p, q, r):
    c = LyapunovMetric("C", 2.0)
    b = LyapunovMetric("B", 2.0)
    P, Q, R = map(np.array, (p, q, r))
    assert c(P, R) <= c(P, Q) + c(Q, R) + 1e-9 * (1 + c(P, R))
    assert b.components(P, Q)[0] == c.components(P, Q)[0]
    Qv = np.array([p[0], q[1]])
    assert b.components(P, Qv)[1] == pytest.approx(c.components(P, Qv)[1], rel=1e-12, abs=1e-12)


@given(pt, pt)
def test_mode_a_stable_never_beats_closed_form(p, q):
    fam = PathFamily(restarts=2, budget=4000, detour=2.0)
    lower = abs(2.0 ** -p[0] - 2.0 ** -q[0]) / LN2
    assert path_infimum_numeric("stable", 2.0, p, q, fam) >= lower - 1e-6


@given(pt, pt)
def test_mode_e_positive_off_diagonal(p, q):
    m = LyapunovMetric("E", H=shear(0.5), base=LyapunovMetric("C", 2.0))
    if p != q:
        assert m(np.array(p), np.array(q)) > 0
