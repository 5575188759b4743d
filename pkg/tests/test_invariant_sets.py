import math

import numpy as np
import pytest

from planedyn.errors import EmptyComponent, LeafLost
from planedyn.geometry import Polyline
from planedyn.invariant_sets import (NO_ESCAPE, escape_time, escape_time_field,
                                     k_stable_component, leaf_chain_defect,
                                     leaf_pair_intersection, singularity_scan, trace_leaf,
                                     trace_leaves)
from planedyn.translation import image_polyline

from conftest import level_curve

WIN = (-3.0, 3.0, -3.0, 3.0)


def hausdorff(leaf, oracle: Polyline, window=WIN, margin=0.1):
    """Two-sided distance; oracle vertices are only required inside the shrunk window."""
    a = float(np.max(oracle.distance(leaf.vertices)))
    V = oracle.vertices
    x0, x1, y0, y1 = window
    inside = ((V[:, 0] > x0 + margin) & (V[:, 0] < x1 - margin)
              & (V[:, 1] > y0 + margin) & (V[:, 1] < y1 - margin))
    b = float(np.max(leaf.polyline.distance(V[inside])))
    return max(a, b)


def test_escape_time_examples(mC, T):
    assert escape_time(mC, T, (0, 0), (0, 1), 3, 40) == 2
    assert escape_time(mC, T, (0, 0), (0.5, 0), 3, 40) is None
    assert escape_time(mC, T, (1, 2), (1, 2), 3, 40) is None
    # backward: U(T^-n x, T^-n y) = 2^n Ds for horizontal pairs
    ds = 0.5 / math.log(2)
    n = escape_time(mC, T, (0, 0), (1, 0), 3, 40, "backward")
    assert ds * 2 ** n > 3 >= ds * 2 ** (n - 1)
    with pytest.raises(ValueError):
        escape_time(mC, T, (0, 0), (0, 1), 0, 40)


def test_component_along_the_x_axis(mC, T):
    comp = k_stable_component(mC, T, (0, 0), 1.0, 40, WIN, 0.01)
    P = comp.points
    # exact set: y2 = 0 and |1 - 2**-y1| <= ln 2
    lo, hi = -math.log2(1 + math.log(2)), -math.log2(1 - math.log(2))
    assert lo == pytest.approx(-0.7597, abs=1e-4) and hi == pytest.approx(1.7042, abs=2e-4)
    assert P[:, 0].min() == pytest.approx(lo, abs=0.011)
    assert P[:, 0].max() == pytest.approx(hi, abs=0.011)
    assert np.max(np.abs(P[:, 1])) <= 0.011


def test_component_mode_d_is_vertical(mD, LH):
    comp = k_stable_component(mD, LH, (0, 0), 1.0, 40, WIN, 0.01)
    P = comp.points
    assert np.max(np.abs(P[:, 0])) <= 0.011
    assert P[:, 1].min() == pytest.approx(-1, abs=0.011)
    assert P[:, 1].max() == pytest.approx(1, abs=0.011)


def test_component_refinement_and_nesting(mC, T):
    box = (-2.0, 2.0, -2.0, 2.0)
    a = k_stable_component(mC, T, (0, 0), 1.0, 5, box, 0.02).mask
    b = k_stable_component(mC, T, (0, 0), 1.0, 10, box, 0.02).mask
    c = k_stable_component(mC, T, (0, 0), 0.5, 10, box, 0.02).mask
    assert np.all(a[b]) and np.all(b[c])
    tiny = k_stable_component(mC, T, (0, 0), 1e-6, 10, box, 0.02)
    assert len(tiny) == 1


def test_component_errors(mC, T):
    with pytest.raises(ValueError):
        k_stable_component(mC, T, (9, 9), 1.0, 10, WIN, 0.1)
    with pytest.raises(EmptyComponent):
        k_stable_component(mC, T, (0.005, 0.005), 1e-6, 10, WIN, 0.01)


def test_escape_field_values(mC, T):
    f = escape_time_field(mC, T, (0, 0), 3.0, 10, (-1, 1, -1, 1), 0.5)
    assert f.values.shape == (5, 5)
    i, j = list(f.ys).index(1.0), list(f.xs).index(0.0)
    assert f.values[i, j] == 2
    assert f.values[list(f.ys).index(0.0), j] == NO_ESCAPE


def test_stable_leaf_is_the_level_set(mC, T):
    leaf = trace_leaf(mC, T, (0, 1), "stable", window=WIN)
    assert hausdorff(leaf, Polyline(level_curve(1.0, -2.0, 3.5, 4001))) <= 1e-3
    assert leaf_chain_defect(leaf, mC, T) <= 1.05


def test_unstable_leaf_is_vertical(mC, T):
    leaf = trace_leaf(mC, T, (2.5, 0), "unstable", window=WIN)
    oracle = Polyline(np.column_stack([np.full(701, 2.5), np.linspace(-3.5, 3.5, 701)]))
    assert hausdorff(leaf, oracle) <= 1e-3


def test_mode_d_stable_leaf_is_vertical(mD, LH):
    leaf = trace_leaf(mD, LH, (0, 2), "stable", window=WIN)
    assert hausdorff(leaf, Polyline(np.column_stack([np.zeros(701), np.linspace(-3.5, 3.5, 701)]))) <= 1e-3


def test_leaf_pair_examples(mC, T):
    win = (-1.0, 4.0, -1.0, 4.0)
    ls = trace_leaf(mC, T, (0, 1), "stable", window=win)
    lu = trace_leaf(mC, T, (3, 0), "unstable", window=win)
    rep = leaf_pair_intersection(ls, lu)
    assert rep.count == 1
    assert np.allclose(rep.points[0], (3, 0.125), atol=1e-3)
    lu0 = trace_leaf(mC, T, (0, 0), "unstable", window=win)
    rep = leaf_pair_intersection(ls, lu0)
    assert rep.count == 1 and np.allclose(rep.points[0], (0, 1), atol=1e-3)
    ls2 = trace_leaf(mC, T, (0, 2), "stable", window=win)
    with pytest.raises(ValueError):
        leaf_pair_intersection(ls, ls2)
    assert leaf_pair_intersection(ls2, lu).count == 1


def test_image_of_a_leaf_is_a_leaf(mC, T):
    step = 0.02
    leaf = trace_leaf(mC, T, (0, 1), "stable", step=step, window=WIN)
    img = image_polyline(leaf, T)
    target = trace_leaf(mC, T, T(np.array([0.0, 1.0])), "stable", step=step,
                        window=(-2.0, 4.0, -3.0, 3.0))
    assert np.max(target.polyline.distance(img.vertices)) <= 5 * step


def test_conjugated_leaf_matches_pulled_back_level_set(mE, g):
    leaf = trace_leaf(mE, g, (0, 1), "stable", window=WIN)
    t = np.linspace(-2.0, 3.5, 4001)
    oracle = np.column_stack([t, 2.0 ** -t - 0.5 * np.sin(t)])
    assert hausdorff(leaf, Polyline(oracle)) <= 1e-3


def test_leaf_lost_when_n_max_is_too_tight(mC, T):
    # one iterate cannot tell the leaf from its neighbours
    with pytest.raises(LeafLost):
        trace_leaf(mC, T, (0, 1), "stable", n_max=1, step=0.05, window=WIN)


def test_regular_points_have_two_arcs(mC, T):
    assert singularity_scan(mC, T, (0, 1), 0.1) == 2
    assert singularity_scan(mC, T, (1, -1), 0.1, "unstable") == 2


def test_batched_tracing_matches_single(mC, T):
    xs = [(0, 1), (0, -0.5)]
    batch = trace_leaves(mC, T, xs, "stable", step=0.05, window=WIN)
    for x, leaf in zip(xs, batch):
        one = trace_leaf(mC, T, x, "stable", step=0.05, window=WIN)
        assert np.array_equal(one.vertices, leaf.vertices)
        assert one.base_index == leaf.base_index and one.stops == leaf.stops
