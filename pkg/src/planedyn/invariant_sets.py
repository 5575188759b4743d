"""k-stable sets, their components, and continuation tracing of leaves.

A point y is k-stable for x up to N iterations when U(f^n x, f^n y) <= k for
0 <= n <= N (forward for stable sets, backward for unstable ones). The escape
time is the least n at which the bound fails.

Leaves are traced by continuation. From the current vertex c with tangent t,
the tracer erects a transversal of length 2*step through c + step*t. It then
zooms in on the sub-interval where the escape time measured from c is
largest, and takes the midpoint of the maximal run (the NoEscape plateau
when one is resolved). Escape times are measured from the current vertex
rather than from the base point: far along a leaf, the base point is no
longer within distance k. The local k is raised where needed so that the
whole transversal starts inside B_k(c); the largest value used is recorded.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import EmptyComponent, LeafLost
from .geometry import (DEFAULT_WINDOW, CrossingReport, Point, Polyline, as_point,
                       crossing_points, in_window, write_points_csv)
from .maps import PlaneMap, grid
from .metrics import LyapunovMetric

NO_ESCAPE = -1
DEFAULT_K = 1.0
DEFAULT_N_MAX = 40
DEFAULT_STEP = 0.02
DEFAULT_BUDGET = 256.0

_DIRECTION = {"stable": "forward", "unstable": "backward"}


def _stepper(fmap: PlaneMap, direction: str):
    if direction == "forward":
        return fmap.forward
    if direction == "backward":
        return fmap.inverse
    raise ValueError(f"direction must be 'forward' or 'backward', not {direction!r}")


def _same_map(a: PlaneMap, b: PlaneMap) -> bool:
    # maps built from the same spec carry identical kinds and parameters
    return a is b or (a.kind == b.kind and bool(a.params) and a.params == b.params and not a.parts)


def escape_times(metric: LyapunovMetric, fmap: PlaneMap, X, Y, k, n_max: int,
                 direction: str = "forward") -> np.ndarray:
    """Vectorised escape times; ``n_max + 1`` marks NoEscape.

    ``X`` broadcasts against ``Y`` (shape ``(..., 2)``), ``k`` against the
    leading shape. Non-finite metric values count as escape.
    """
    Y = np.asarray(Y, dtype=float)
    X, Y = np.broadcast_arrays(np.asarray(X, dtype=float), Y)
    if metric.mode == "E" and fmap.kind == "Conjugated" and _same_map(fmap.parts[0], metric.H):
        # pullback metric along H^-1 f H: iterate the base pair in H coordinates
        X, Y = metric.H.forward(X), metric.H.forward(Y)
        metric, fmap = metric.base, fmap.parts[1]
    step = _stepper(fmap, direction)
    shape = Y.shape[:-1]
    Xf = X.reshape(-1, 2).copy()
    Yf = Y.reshape(-1, 2).copy()
    kf = np.broadcast_to(np.asarray(k, dtype=float), shape).reshape(-1).copy()
    out = np.full(Xf.shape[0], n_max + 1, dtype=np.int64)
    alive = np.arange(Xf.shape[0])
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_max + 1):
            if n:
                Xf = step(Xf)
                Yf = step(Yf)
            u = metric(Xf, Yf)
            esc = ~(u <= kf)
            if np.any(esc):
                out[alive[esc]] = n
                keep = ~esc
                alive, Xf, Yf, kf = alive[keep], Xf[keep], Yf[keep], kf[keep]
                if alive.size == 0:
                    break
    return out.reshape(shape)


def escape_time(metric: LyapunovMetric, fmap: PlaneMap, x, y, k: float, n_max: int,
                direction: str = "forward"):
    """Least n in [0, n_max] with U(f^n x, f^n y) > k, or None for NoEscape."""
    if not k > 0 or n_max < 1:
        raise ValueError("need k > 0 and n_max >= 1")
    n = int(escape_times(metric, fmap, np.array(as_point(x)), np.array(as_point(y)), k, n_max,
                         direction))
    return None if n > n_max else n


@dataclass
class EscapeTimeField:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # shape (len(ys), len(xs)); NO_ESCAPE where bounded
    base: Point
    k: float
    n_max: int
    direction: str

    @property
    def h(self) -> float:
        return float(self.xs[1] - self.xs[0])

    def nodes(self) -> np.ndarray:
        X, Y = np.meshgrid(self.xs, self.ys)
        return np.column_stack([X.ravel(), Y.ravel()])

    def to_csv(self, path) -> None:
        P = self.nodes()
        vals = self.values.ravel()
        with open(path, "w", newline="") as fh:
            fh.write("x1,x2,escape_n\n")
            for (a, b), v in zip(P, vals):
                fh.write(f"{a!r},{b!r},{int(v)}\n")


def escape_time_field(metric: LyapunovMetric, fmap: PlaneMap, x, k: float, n_max: int,
                      box=(-3.0, 3.0, -3.0, 3.0), h: float = 0.01,
                      direction: str = "forward") -> EscapeTimeField:
    x = as_point(x)
    P = grid(box, h)
    x0, x1, y0, y1 = box
    xs = np.unique(P[:, 0])
    ys = np.unique(P[:, 1])
    E = escape_times(metric, fmap, np.array(x), P, k, n_max, direction)
    E = np.where(E > n_max, NO_ESCAPE, E).reshape(len(ys), len(xs))
    return EscapeTimeField(xs, ys, E, x, float(k), int(n_max), direction)


@dataclass
class StableComponent:
    field: EscapeTimeField
    mask: np.ndarray

    @property
    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.field.xs, self.field.ys)
        return np.column_stack([X[self.mask], Y[self.mask]])

    def __len__(self):
        return int(self.mask.sum())


def k_stable_component(metric: LyapunovMetric, fmap: PlaneMap, x, k: float,
                       n_max: int = DEFAULT_N_MAX, box=(-3.0, 3.0, -3.0, 3.0), h: float = 0.01,
                       direction: str = "forward") -> StableComponent:
    """4-connected NoEscape component containing the node nearest x."""
    x = as_point(x)
    if not in_window(np.array(x), box):
        raise ValueError("x lies outside the grid window")
    fld = escape_time_field(metric, fmap, x, k, n_max, box, h, direction)
    i = int(np.argmin(np.abs(fld.ys - x.x2)))
    j = int(np.argmin(np.abs(fld.xs - x.x1)))
    bounded = fld.values == NO_ESCAPE
    if not bounded[i, j]:
        raise EmptyComponent("the node nearest x escapes; refine the grid")
    labels, _ = ndimage.label(bounded)
    return StableComponent(fld, labels == labels[i, j])


# ---------------------------------------------------------------------------
# leaf tracing
# ---------------------------------------------------------------------------

@dataclass
class LeafCurve:
    base: Point
    stability: str
    polyline: Polyline
    n_max: int
    k: float
    step: float
    k_used: float
    base_index: int = 0
    stops: tuple = ("", "")
    window: tuple = DEFAULT_WINDOW

    @property
    def vertices(self) -> np.ndarray:
        return self.polyline.vertices

    def truncation(self) -> dict:
        return {
            "base": list(self.base),
            "stability": self.stability,
            "n_max": self.n_max,
            "k": self.k,
            "k_used": self.k_used,
            "step": self.step,
            "base_index": self.base_index,
            "stops": list(self.stops),
            "window": list(self.window),
            "vertices": len(self.polyline),
            "length": self.polyline.length,
        }

    def signed_arclength(self, point) -> float:
        """Arclength coordinate of ``point`` along the leaf, zero at the base."""
        cum = self.polyline.cumulative_length
        return self.polyline.arclength_of(point) - float(cum[self.base_index])


def _locate(metric, fmap, C, A, B, k, n_max, direction, m=33, tol=1e-12, max_rounds=16):
    """Per-row point on segment A-B maximising escape time measured from C."""
    L = len(C)
    D = B - A
    s = np.linspace(0.0, 1.0, m)
    rows = np.arange(L)
    P0 = A[:, None, :] + s[None, :, None] * D[:, None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        u0 = metric(C[:, None, :], P0)
    kk = np.maximum(k, 4.0 * np.nanmax(np.where(np.isfinite(u0), u0, np.nan), axis=1))
    kk = np.where(np.isfinite(kk), kk, k)
    lo = np.zeros(L)
    hi = np.ones(L)
    lost = np.zeros(L, dtype=bool)
    best = np.zeros(L, dtype=np.int64)
    mid = np.full(L, 0.5)
    for r in range(max_rounds):
        S = lo[:, None] + (hi - lo)[:, None] * s[None, :]
        P = A[:, None, :] + S[..., None] * D[:, None, :]
        E = escape_times(metric, fmap, C[:, None, :], P, kk[:, None], n_max, direction)
        best = E.max(axis=1)
        mask = E == best[:, None]
        first = mask.argmax(axis=1)
        last = m - 1 - mask[:, ::-1].argmax(axis=1)
        if r == 0:
            lost = (first == 0) | (last == m - 1) | (best == 0)
        mid = 0.5 * (S[rows, first] + S[rows, last])
        lo = S[rows, np.maximum(first - 1, 0)]
        hi = S[rows, np.minimum(last + 1, m - 1)]
        if np.all(hi - lo < tol):
            break
    return A + mid[:, None] * D, lost, kk, best


def _circular_run_center(E, i0):
    n = len(E)
    v = E[i0]
    left = 0
    while left < n and E[(i0 - left - 1) % n] == v:
        left += 1
    right = 0
    while right < n and E[(i0 + right + 1) % n] == v:
        right += 1
    return i0 + 0.5 * (right - left)


def initial_directions(metric, fmap, x, stability, k, n_max, step, directions=720):
    """Two unit tangents along which the leaf through x leaves the circle of radius step."""
    direction = _DIRECTION[stability]
    x = np.asarray(x, dtype=float)
    th = 2 * np.pi * np.arange(directions) / directions
    ring = x + step * np.column_stack([np.cos(th), np.sin(th)])
    with np.errstate(over="ignore", invalid="ignore"):
        u0 = metric(np.broadcast_to(x, ring.shape), ring)
    kk = max(k, 4.0 * float(np.nanmax(u0)))
    E = escape_times(metric, fmap, x, ring, kk, n_max, direction)
    i1 = int(np.argmax(E))
    c1 = _circular_run_center(E, i1)
    t1 = 2 * np.pi * c1 / directions
    gap = np.abs(((th - t1 + np.pi) % (2 * np.pi)) - np.pi)
    E2 = np.where(gap > np.pi / 2, E, -1)
    i2 = int(np.argmax(E2))
    c2 = _circular_run_center(E2, i2)
    t2 = 2 * np.pi * c2 / directions
    return np.array([[np.cos(t1), np.sin(t1)], [np.cos(t2), np.sin(t2)]])


def trace_batch(metric: LyapunovMetric, fmap: PlaneMap, starts, tangents, stability: str,
                k: float = DEFAULT_K, n_max: int = DEFAULT_N_MAX, step: float = DEFAULT_STEP,
                budget=DEFAULT_BUDGET / 2, window=DEFAULT_WINDOW, stop_fn=None,
                check_every: int = 10):
    """Trace several half-leaves in lockstep.

    Returns ``(paths, stops, k_used)``: one vertex array per start (the start
    included), the stop reason for each ('window', 'budget', 'lost' or
    'target') and the largest local k used. ``stop_fn(i, path)`` is polled
    every ``check_every`` steps and ends half-leaf i when it returns True.
    """
    direction = _DIRECTION[stability]
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    tan = np.atleast_2d(np.asarray(tangents, dtype=float))
    tan = tan / np.linalg.norm(tan, axis=1, keepdims=True)
    L = len(starts)
    budgets = np.broadcast_to(np.asarray(budget, dtype=float), (L,))
    paths = [[starts[i].copy()] for i in range(L)]
    cur = starts.copy()
    length = np.zeros(L)
    active = np.ones(L, dtype=bool)
    stops = [""] * L
    k_used = np.full(L, float(k))
    steps = 0
    while np.any(active):
        steps += 1
        if stop_fn is not None and steps % check_every == 0:
            for i in np.nonzero(active)[0]:
                if stop_fn(i, np.array(paths[i])):
                    stops[i] = "target"
                    active[i] = False
            if not np.any(active):
                break
        idx = np.nonzero(active)[0]
        c = cur[idx]
        t = tan[idx]
        nrm = np.column_stack([-t[:, 1], t[:, 0]])
        pred = c + step * t
        P, lost, kk, _ = _locate(metric, fmap, c, pred - step * nrm, pred + step * nrm,
                                 k, n_max, direction)
        if np.any(lost):
            j = np.nonzero(lost)[0]
            P2, lost2, kk2, _ = _locate(metric, fmap, c[j], pred[j] - 4 * step * nrm[j],
                                        pred[j] + 4 * step * nrm[j], k, n_max, direction)
            P[j], lost[j], kk[j] = P2, lost2, kk2
        for a, i in enumerate(idx):
            if lost[a]:
                stops[i] = "lost"
                active[i] = False
                continue
            p = P[a]
            if not in_window(p, window):
                stops[i] = "window"
                active[i] = False
                continue
            d = p - cur[i]
            seg = float(np.hypot(d[0], d[1]))
            if seg == 0.0:
                stops[i] = "lost"
                active[i] = False
                continue
            if length[i] + seg > budgets[i]:
                stops[i] = "budget"
                active[i] = False
                continue
            paths[i].append(p)
            length[i] += seg
            tan[i] = d / seg
            cur[i] = p
            k_used[i] = max(k_used[i], kk[a])
    return [np.array(p) for p in paths], stops, k_used


def trace_leaves(metric: LyapunovMetric, fmap: PlaneMap, xs, stability: str = "stable",
                 k: float = DEFAULT_K, n_max: int = DEFAULT_N_MAX, step: float = DEFAULT_STEP,
                 budget: float = DEFAULT_BUDGET, window=DEFAULT_WINDOW) -> list:
    """Leaves through several base points, traced in lockstep."""
    if not step > 0:
        raise ValueError("step must be positive")
    if stability not in _DIRECTION:
        raise ValueError("stability must be 'stable' or 'unstable'")
    xs = [as_point(x) for x in xs]
    for x in xs:
        if not in_window(np.array(x), window):
            raise ValueError(f"base point {tuple(x)} outside the tracing window")
    tangents = np.concatenate([initial_directions(metric, fmap, x, stability, k, n_max, step)
                               for x in xs])
    starts = np.repeat(np.array(xs, dtype=float), 2, axis=0)
    paths, stops, k_used = trace_batch(metric, fmap, starts, tangents, stability, k, n_max,
                                       step, budget / 2, window)
    leaves = []
    for j, x in enumerate(xs):
        fwd, back = paths[2 * j], paths[2 * j + 1][::-1]
        if "lost" in stops[2 * j:2 * j + 2]:
            raise LeafLost(f"{stability} leaf through {tuple(x)} lost "
                           f"after {len(fwd) + len(back) - 2} steps")
        V = np.concatenate([back, fwd[1:]])
        leaves.append(LeafCurve(x, stability, Polyline(V), int(n_max), float(k), float(step),
                                float(k_used[2 * j:2 * j + 2].max()), base_index=len(back) - 1,
                                stops=(stops[2 * j + 1], stops[2 * j]), window=tuple(window)))
    return leaves


def trace_leaf(metric: LyapunovMetric, fmap: PlaneMap, x, stability: str = "stable",
               k: float = DEFAULT_K, n_max: int = DEFAULT_N_MAX, step: float = DEFAULT_STEP,
               budget: float = DEFAULT_BUDGET, window=DEFAULT_WINDOW) -> LeafCurve:
    """Stable (forward-bounded) or unstable (backward-bounded) leaf through x."""
    if not in_window(np.array(as_point(x)), window):
        raise ValueError("base point outside the tracing window")
    return trace_leaves(metric, fmap, [x], stability, k, n_max, step, budget, window)[0]


def leaf_from_polyline(poly: Polyline, stability: str, base=None, **meta) -> LeafCurve:
    """Wrap an externally built polyline (e.g. a closed-form oracle) as a leaf."""
    V = poly.vertices
    if base is None:
        bi = len(V) // 2
    else:
        bi = int(np.argmin(np.hypot(*(V - np.asarray(base, float)).T)))
    return LeafCurve(Point(*map(float, V[bi])), stability, poly,
                     meta.get("n_max", DEFAULT_N_MAX), meta.get("k", DEFAULT_K),
                     meta.get("step", float(np.median(np.hypot(*np.diff(V, axis=0).T)))),
                     meta.get("k", DEFAULT_K), base_index=bi,
                     window=meta.get("window", DEFAULT_WINDOW))


def write_leaf(leaf: LeafCurve, csv_path, json_path=None) -> None:
    import json
    write_points_csv(csv_path, leaf.vertices)
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(leaf.truncation(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def leaf_chain_defect(leaf: LeafCurve, metric: LyapunovMetric, fmap: PlaneMap) -> float:
    """Largest max_n U(f^n v_i, f^n v_{i+1}) / k_used over consecutive vertices.

    Consecutive vertices are mutually k-stable (forward for stable leaves,
    backward for unstable ones) when this is at most 1.05.
    """
    V = leaf.vertices
    step = _stepper(fmap, _DIRECTION[leaf.stability])
    X, Y = V[:-1].copy(), V[1:].copy()
    worst = metric(X, Y)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(leaf.n_max):
            X, Y = step(X), step(Y)
            worst = np.maximum(worst, metric(X, Y))
    return float(np.max(worst) / leaf.k_used)


def leaf_pair_intersection(ls: LeafCurve, lu: LeafCurve) -> CrossingReport:
    """Crossings of a stable and an unstable leaf; at most one is expected."""
    if ls.stability == lu.stability:
        raise ValueError("need one stable and one unstable leaf")
    return crossing_points(ls.polyline, lu.polyline)


def singularity_scan(metric: LyapunovMetric, fmap: PlaneMap, x, radius: float,
                     stability: str = "stable", k: float = DEFAULT_K, n_max: int = DEFAULT_N_MAX,
                     directions: int = 720, drop: int = 3) -> int:
    """Number of leaf arcs leaving x through the circle of given radius.

    Counts circular runs where the escape time is within ``drop`` of its
    maximum. A regular point gives 2; 3 or more flags a singular point.
    """
    x = np.asarray(as_point(x), dtype=float)
    th = 2 * np.pi * np.arange(directions) / directions
    ring = x + radius * np.column_stack([np.cos(th), np.sin(th)])
    with np.errstate(over="ignore", invalid="ignore"):
        kk = max(k, 4.0 * float(np.nanmax(metric(np.broadcast_to(x, ring.shape), ring))))
    E = escape_times(metric, fmap, x, ring, kk, n_max, _DIRECTION[stability])
    hot = E >= E.max() - drop
    if hot.all():
        return 0
    starts = hot & ~np.roll(hot, 1)
    return int(starts.sum())
