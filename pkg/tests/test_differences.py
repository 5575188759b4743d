import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from planedyn.differences import (V_values, W_values, component_branches,
                                  expansiveness_certificate,
                                  first_difference, orbit_distances, second_difference,
                                  sphere_sign_probe)
from planedyn.errors import NonPositiveW, ProbeFailed
from planedyn.maps import identity
from planedyn.metrics import LyapunovMetric

from conftest import LN2

DS10 = 0.5 / LN2


def test_first_difference_examples(mC, T):
    assert first_difference(mC, T, (0, 0), (0, 1)) == pytest.approx(1.0)
    assert first_difference(mC, T, (0, 0), (1, 0)) == pytest.approx(-0.5 * DS10)
    assert first_difference(mC, T, (2, 2), (2, 2)) == 0.0


def test_second_difference_examples(mC, T):
    assert second_difference(mC, T, (0, 0), (0, 1)) == pytest.approx(1.0)
    assert second_difference(mC, T, (0, 0), (1, 0)) == pytest.approx(0.25 * DS10)
    assert second_difference(mC, T, (1, 1), (1, 1)) == 0.0


def test_identity_map_has_no_positive_w(mC):
    with pytest.raises(NonPositiveW):
        second_difference(mC, identity(), (0, 0), (1, 1))


def test_sign_probe_translation(mC, T):
    r = sphere_sign_probe(mC, T, (0, 0), 1.0)
    assert r.V_plus > 0 > r.V_minus
    for w in (r.y_plus, r.z_minus):
        assert abs(mC(np.zeros(2), np.array(w)) - 1.0) <= 1e-6
    # V > 0 where Ds = 0 (vertical), V < 0 where Du = 0 (horizontal)
    assert abs(r.y_plus[0]) < 1e-6
    assert abs(r.z_minus[1]) < 1e-6


def test_sign_probe_hyperbolic(mD, LH):
    r = sphere_sign_probe(mD, LH, (3, 3), 0.5)
    assert r.y_plus[1] == pytest.approx(3.0, abs=1e-9)   # horizontal
    assert r.z_minus[0] == pytest.approx(3.0, abs=1e-9)  # vertical
    assert r.to_json()["k"] == 0.5


def test_sign_probe_finds_thin_negative_part(mC, T):
    # far right, the V < 0 part of the sphere is a sliver along the level set
    # of 2**x1 * x2 about a thousand units away, missed by any ray sampling
    x, k = (5.800022993007326, 7.251162997390857), 4.590139813136778
    r = sphere_sign_probe(mC, T, x, k)
    z = np.array(r.z_minus)
    assert r.V_minus < 0
    assert mC(np.array(x), z) == pytest.approx(k, abs=1e-6)
    phi = 2.0 ** x[0] * x[1]
    assert abs(2.0 ** z[0] * z[1] - phi) < k / 3


def test_component_branches_follow_zero_sets(mC):
    x = np.array([1.0, 2.0])
    up = component_branches(mC, x, 1.5, 0)
    assert len(up) == 2 and np.allclose(up[:, 0], 1.0, atol=1e-9)
    down = component_branches(mC, x, 1.5, 1)
    assert len(down) >= 1
    assert np.allclose(2.0 ** down[:, 0] * down[:, 1], 4.0, atol=1e-6)


def test_sign_probe_identity_fails(mC):
    with pytest.raises(ProbeFailed):
        sphere_sign_probe(mC, identity(), (0, 0), 1.0)


def test_expansiveness_examples(mC, T):
    assert expansiveness_certificate(mC, T, (0, 0), (0, 1), 3.0) == 2
    assert expansiveness_certificate(mC, T, (0, 0), (1, 0), 3.0) == -3
    with pytest.raises(ValueError):
        expansiveness_certificate(mC, T, (0, 0), (0, 0), 3.0)


def test_orbit_distances_grow_geometrically(mC, T):
    d = orbit_distances(mC, T, [0.0, 0.0], [0.0, 1.0], 5)
    assert np.allclose(d, 2.0 ** np.arange(6))


pt = st.tuples(st.floats(-6, 6), st.floats(-6, 6))


@given(pt, pt)
def test_closed_form_identities(x, y):
    m = LyapunovMetric("C", 2.0)
    from planedyn.maps import translation
    T = translation()
    X, Y = np.array(x), np.array(y)
    Ds, Du = m.components(X, Y)
    V = V_values(m, T, X, Y)
    W = W_values(m, T, X, Y)
    scale = 1 + Ds + Du
    assert V == pytest.approx(Du - 0.5 * Ds, abs=1e-9 * scale)
    assert W == pytest.approx(Du + 0.25 * Ds, abs=1e-9 * scale)
    if x != y:
        assert W > 0


@given(pt, pt)
def test_v_is_monotone_along_orbits(x, y):
    from planedyn.maps import linear_hyperbolic
    m = LyapunovMetric("D", 2.0)
    f = linear_hyperbolic(2.0)
    X, Y = np.array(x), np.array(y)
    v = [V_values(m, f, f.power(X, n), f.power(Y, n)) for n in range(6)]
    assert all(b >= a - 1e-9 * (1 + abs(a)) for a, b in zip(v, v[1:]))
