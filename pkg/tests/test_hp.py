import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from planedyn.differences import V_values
from planedyn.errors import NonPositiveW
from planedyn.hp import HPScanConfig, config_from_spec, hp_ratio, hp_scan, numerator_bound
from planedyn.maps import linear_hyperbolic, translation
from planedyn.metrics import LyapunovMetric

from conftest import LN2


def test_hp_ratio_examples(mC, T):
    # V(x,y) - V(x,z) = Du(x,y) - Du(x,z) = -1; W(x,y) = 0.25 Ds(x,y)
    w5 = 0.25 * 31 / LN2
    assert w5 == pytest.approx(11.182, abs=2e-3)
    assert hp_ratio(mC, T, (-5, 0), (0, 0), (0, 1)) == pytest.approx(1 / w5, rel=1e-12)
    assert hp_ratio(mC, T, (-5, 0), (0, 0), (0, 1)) == pytest.approx(0.0894, abs=1e-4)
    w10 = 0.25 * 1023 / LN2
    assert hp_ratio(mC, T, (-10, 0), (0, 0), (0, 1)) == pytest.approx(1 / w10, rel=1e-12)
    assert hp_ratio(mC, T, (-10, 0), (0, 0), (0, 1)) == pytest.approx(0.00271, abs=1e-5)
    assert hp_ratio(mC, T, (-5, 0), (0.3, 0.4), (0.3, 0.4)) == 0.0


def test_hp_ratio_excludes_degenerate_w(mC, T):
    with pytest.raises(NonPositiveW):
        hp_ratio(mC, T, (1, 1), (1, 1), (0, 0))


def test_metric_radius_scan_decays_like_one_over_r(mC, T):
    rep = hp_scan(mC, T, HPScanConfig())
    s = np.array(rep.sup_ratios)
    assert np.all(np.diff(s) < 0)
    # W grows linearly in the metric radius, so R * sup settles to a constant
    prod = s * np.array(rep.radii)
    assert prod[-1] == pytest.approx(prod[-2], rel=0.02)
    assert rep.excluded == [0, 0, 0, 0]
    assert rep.verdict == ("Decaying" if s[-1] < 0.05 else "NotDecaying")


def test_long_radii_reach_the_threshold(mC, T):
    rep = hp_scan(mC, T, HPScanConfig(radii=(10, 20, 40, 80, 160, 320)))
    assert rep.verdict == "Decaying"
    assert rep.sup_ratios[-1] < 0.05


def test_euclidean_ray_does_not_decay(mC, T):
    cfg = HPScanConfig(radii=(10, 20, 40, 80), radius_notion="Euclidean", angles=(0.0,))
    rep = hp_scan(mC, T, cfg)
    assert rep.verdict == "NotDecaying"
    s = np.array(rep.sup_ratios)
    # Ds(x, y) tends to 2**-y1 / ln 2 along the ray, so W stays bounded
    assert s[-1] == pytest.approx(s[-2], rel=1e-6)
    assert s[-1] > 1.0


def test_mode_d_euclidean_scan_halves(mD, LH):
    rep = hp_scan(mD, LH, HPScanConfig(radius_notion="Euclidean"))
    s = np.array(rep.sup_ratios)
    assert np.all(np.diff(s) < 0)
    assert np.allclose(s[1:] / s[:-1], 0.5, rtol=0.05)


def test_scan_is_deterministic(mC, T):
    cfg = HPScanConfig(pair_budget=100, seed=7)
    a = hp_scan(mC, T, cfg).to_json()
    b = hp_scan(mC, T, HPScanConfig(pair_budget=100, seed=7)).to_json()
    assert a == b


def test_config_validation():
    with pytest.raises(ValueError):
        HPScanConfig(radii=(10, 10))
    with pytest.raises(ValueError):
        HPScanConfig(C=np.empty((0, 2)))
    with pytest.raises(ValueError):
        HPScanConfig(radius_notion="Manhattan")
    cfg = config_from_spec({"C_grid": 3, "radii": [1, 2]})
    assert len(cfg.C) == 9 and cfg.radius_notion == "MetricU"


pt = st.tuples(st.floats(-20, 20), st.floats(-20, 20))
unit = st.tuples(st.floats(0, 1), st.floats(0, 1))


@pytest.mark.parametrize("mode", "CD")
@given(x=pt, y=unit, z=unit)
def test_numerator_bound_and_symmetry(mode, x, y, z):
    m = LyapunovMetric(mode, 2.0)
    f = translation() if mode == "C" else linear_hyperbolic(2.0)
    X = np.array([x, x])
    V = V_values(m, f, X, np.array([y, z]))
    num = abs(V[0] - V[1])
    assert num <= numerator_bound(m, y, z) + 1e-9 * (1 + np.max(np.abs(V)))
    Vs = V_values(m, f, X, np.array([z, y]))
    assert abs(Vs[0] - Vs[1]) == num
