"""First and second differences of a Lyapunov metric along a map.

    V(x, y) = U(f x, f y) - U(x, y)
    W(x, y) = V(f x, f y) - V(x, y)
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BudgetExceeded, NonPositiveW, ProbeFailed
from .geometry import Point, as_point
from .maps import ITERATION_BUDGET, PlaneMap
from .metrics import LyapunovMetric, eval_components

W_FLOOR = 1e-12
SPHERE_TOL = 1e-6


def V_values(metric: LyapunovMetric, fmap: PlaneMap, X, Y):
    """Vectorised first difference."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    with np.errstate(invalid="ignore"):
        return metric(fmap.forward(X), fmap.forward(Y)) - metric(X, Y)


def W_values(metric: LyapunovMetric, fmap: PlaneMap, X, Y):
    """Vectorised second difference."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    with np.errstate(invalid="ignore"):
        return V_values(metric, fmap, fmap.forward(X), fmap.forward(Y)) - V_values(metric, fmap, X, Y)


def first_difference(metric: LyapunovMetric, fmap: PlaneMap, x, y) -> float:
    x, y = as_point(x), as_point(y)
    if x == y:
        return 0.0
    fx, fy = fmap.forward(np.array(x)), fmap.forward(np.array(y))
    return eval_components(metric, fx, fy)[2] - eval_components(metric, x, y)[2]


def second_difference(metric: LyapunovMetric, fmap: PlaneMap, x, y, check: bool = True) -> float:
    """W(x, y); raises NonPositiveW for x != y with W <= 0 when ``check``."""
    x, y = as_point(x), as_point(y)
    if x == y:
        return 0.0
    fx, fy = fmap.forward(np.array(x)), fmap.forward(np.array(y))
    W = first_difference(metric, fmap, fx, fy) - first_difference(metric, fmap, x, y)
    if check and not W > 0:
        raise NonPositiveW(W)
    return W


@dataclass
class SignProbeResult:
    x: Point
    k: float
    y_plus: Point
    V_plus: float
    z_minus: Point
    V_minus: float

    def to_json(self) -> dict:
        d = asdict(self)
        d["x"] = list(self.x)
        d["y_plus"] = list(self.y_plus)
        d["z_minus"] = list(self.z_minus)
        return d


def sphere_points(metric: LyapunovMetric, x, k: float, thetas, lo=1e-8, hi=1e6, iters=120):
    """Points x + r e(theta) with U(x, .) = k, found by bisection in r.

    Returns ``(points, ok)``; ``ok`` is False on rays where the bracket does not
    straddle ``k`` or the root misses the sphere by more than SPHERE_TOL.
    """
    x = np.asarray(x, dtype=float)
    E = np.column_stack([np.cos(thetas), np.sin(thetas)])

    def U_at(r):
        with np.errstate(over="ignore", invalid="ignore"):
            u = metric(np.broadcast_to(x, E.shape), x + r[:, None] * E)
        return np.where(np.isfinite(u), u, np.inf)

    r_lo = np.full(len(E), lo)
    r_hi = np.full(len(E), hi)
    ok = (U_at(r_lo) < k) & (U_at(r_hi) > k)
    for _ in range(iters):
        mid = np.sqrt(r_lo * r_hi)
        above = U_at(mid) > k
        r_hi = np.where(above, mid, r_hi)
        r_lo = np.where(above, r_lo, mid)
    r = np.where(np.abs(U_at(r_lo) - k) <= np.abs(U_at(r_hi) - k), r_lo, r_hi)
    pts = x + r[:, None] * E
    ok &= np.abs(U_at(r) - k) <= SPHERE_TOL
    return pts, ok


def _circle(x, r, th):
    """Points x + r e(th) for every radius (rows) and angle (columns)."""
    return x + np.multiply.outer(r, np.stack([np.cos(th), np.sin(th)], -1))


def _metric_values(metric, x, P):
    with np.errstate(over="ignore", invalid="ignore"):
        Ds, Du = metric.components(np.broadcast_to(x, P.shape), P)
    Ds = np.where(np.isfinite(Ds), Ds, np.inf)
    Du = np.where(np.isfinite(Du), Du, np.inf)
    return Ds, Du


def _circle_minima(metric, x, comp, r, t0, half, iters=80):
    """Golden-section minimisation of one component over angles t0 +- half, per radius."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    a = np.atleast_1d(np.asarray(t0, dtype=float)) - half
    b = a + 2 * half
    gr = (math.sqrt(5) - 1) / 2

    def f(t):
        P = x + r[:, None] * np.stack([np.cos(t), np.sin(t)], -1)
        return _metric_values(metric, x, P)[comp]

    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc <= fd
        # keep [a, d] when f(c) <= f(d), else [c, b]; reuse the surviving probe
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = np.where(left, b - gr * (b - a), d)
        d_new = np.where(left, c, a + gr * (b - a))
        fnew = f(np.where(left, c_new, d_new))
        fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
        c, d = c_new, d_new
    return 0.5 * (a + b)


def component_branches(metric: LyapunovMetric, x, k: float, comp: int, n_theta=720,
                       lo=1e-8, hi=1e6, n_radii=400, iters=60):
    """Sphere points U(x, .) = k lying on the zero set of one metric component.

    ``comp`` 0 follows Ds = 0 (where V tends to be positive), 1 follows
    Du = 0 (negative V). On each circle about x the component is minimised
    in angle; the resulting branches are bisected in radius until U = k.
    These zero sets can be far thinner than any polar sampling, which is why
    they are followed explicitly.
    """
    x = np.asarray(x, dtype=float)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    dth = 2 * np.pi / n_theta
    radii = np.geomspace(lo, hi, n_radii)
    C = _metric_values(metric, x, _circle(x, radii, th))[comp]          # (radii, theta)
    local = (C <= np.roll(C, 1, axis=1)) & (C <= np.roll(C, -1, axis=1)) & np.isfinite(C)

    def excess(r, t):
        P = x + np.atleast_1d(r)[:, None] * np.stack([np.cos(t), np.sin(t)], -1)
        Ds, Du = _metric_values(metric, x, P)
        return P, Ds + Du - k

    out = []
    for branch in range(2):
        # the two deepest local minima per circle, ordered by angle
        seeds = np.full(n_radii, np.nan)
        for i in range(n_radii):
            idx = np.nonzero(local[i])[0]
            if len(idx) == 0:
                continue
            best = np.sort(idx[np.argsort(C[i, idx])[:2]])
            seeds[i] = th[best[min(branch, len(best) - 1)]]
        have = ~np.isnan(seeds)
        T = np.full(n_radii, np.nan)
        T[have] = _circle_minima(metric, x, comp, radii[have], seeds[have], dth)
        _, g = excess(radii, np.where(have, T, 0.0))
        g = np.where(have, g, np.nan)
        for i in range(1, n_radii):
            if not (have[i - 1] and have[i]) or (g[i - 1] <= 0) == (g[i] <= 0):
                continue
            ra, rb, ta, tb, ga, gb = radii[i - 1], radii[i], T[i - 1], T[i], g[i - 1], g[i]
            side = 0
            for _ in range(iters):
                # Illinois regula falsi in log r
                la, lb = math.log(ra), math.log(rb)
                rm = math.exp(lb - gb * (lb - la) / (gb - ga)) if gb != ga else math.sqrt(ra * rb)
                if not ra < rm < rb:
                    rm = math.sqrt(ra * rb)
                tm = _circle_minima(metric, x, comp, rm, 0.5 * (ta + tb),
                                    abs(tb - ta) / 2 + dth)[0]
                gm = excess(rm, np.array([tm]))[1][0]
                if (gm <= 0) == (ga <= 0):
                    ra, ta, ga = rm, tm, gm
                    if side == -1:
                        gb *= 0.5
                    side = -1
                else:
                    rb, tb, gb = rm, tm, gm
                    if side == 1:
                        ga *= 0.5
                    side = 1
                if abs(gm) <= 0.1 * SPHERE_TOL or rb - ra <= 1e-15 * rb:
                    break
            P, gg = excess(np.array([ra, rb]), np.array([ta, tb]))
            j = int(np.argmin(np.abs(gg)))
            if abs(gg[j]) <= SPHERE_TOL:
                out.append(P[j])
                break
    return np.array(out).reshape(-1, 2)


def sphere_sign_probe(metric: LyapunovMetric, fmap: PlaneMap, x, k: float,
                      directions: int = 720) -> SignProbeResult:
    """Witnesses of both signs of V on the U-sphere of radius k about x.

    Candidates come from ray bisection in ``directions`` directions plus the
    two component zero sets through x (see :func:`component_branches`).
    """
    if not k > 0:
        raise ValueError("k must be positive")
    x = as_point(x)
    X = np.array(x)
    thetas = 2 * np.pi * np.arange(directions) / directions
    rays, ok = sphere_points(metric, X, k, thetas)
    pts = np.concatenate([rays[ok], component_branches(metric, X, k, 0),
                          component_branches(metric, X, k, 1)])
    V = V_values(metric, fmap, np.broadcast_to(X, pts.shape), pts)
    if not (len(V) and np.nanmax(V) > 0 and np.nanmin(V) < 0):
        raise ProbeFailed(f"no sign change of V on the sphere of radius {k} about {tuple(x)}")
    i = int(np.nanargmax(V))
    j = int(np.nanargmin(V))
    return SignProbeResult(x, float(k), Point(*map(float, pts[i])), float(V[i]),
                           Point(*map(float, pts[j])), float(V[j]))


def orbit_distances(metric: LyapunovMetric, fmap: PlaneMap, X, Y, n: int):
    """U(f^j x, f^j y) for j = 0..n (forward) or j = 0..-n (n < 0); rows are j."""
    X = np.array(X, dtype=float)
    Y = np.array(Y, dtype=float)
    step = fmap.forward if n >= 0 else fmap.inverse
    out = [metric(X, Y)]
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(abs(n)):
            X, Y = step(X), step(Y)
            out.append(metric(X, Y))
    return np.array(out)


def expansiveness_certificate(metric: LyapunovMetric, fmap: PlaneMap, x, y, k: float,
                              budget: int = ITERATION_BUDGET) -> int:
    """An iterate n with U(f^n x, f^n y) > k.

    Searches forward when V(x, y) >= 0 and backward otherwise. On the forward
    branch the telescoped bound U_n >= U_s + (n - s) V_s is checked at every
    step (s = 1 when V(x, y) = 0, else 0); a failure means W <= 0 somewhere.
    """
    x, y = as_point(x), as_point(y)
    if x == y:
        raise ValueError("x and y must differ")
    if not k > 0:
        raise ValueError("k must be positive")
    X, Y = np.array(x), np.array(y)
    V0 = first_difference(metric, fmap, x, y)
    if V0 >= 0:
        start = 0
        if V0 == 0:
            X, Y = fmap.forward(X), fmap.forward(Y)
            start = 1
        Us = float(metric(X, Y))
        Vs = float(metric(fmap.forward(X), fmap.forward(Y))) - Us
        U = Us
        n = start
        while not U > k:
            if n >= budget:
                raise BudgetExceeded(f"no escape within {budget} forward iterations")
            with np.errstate(over="ignore", invalid="ignore"):
                X, Y = fmap.forward(X), fmap.forward(Y)
                U = float(metric(X, Y))
            n += 1
            if not math.isfinite(U):
                break
            bound = Us + (n - start) * Vs
            if U < bound - 1e-6 * max(abs(bound), 1.0):
                raise NonPositiveW(U - bound, "growth bound U_n >= U_s + n V_s violated")
        return n
    U = float(metric(X, Y))
    n = 0
    while not U > k:
        if n >= budget:
            raise BudgetExceeded(f"no escape within {budget} backward iterations")
        with np.errstate(over="ignore", invalid="ignore"):
            X, Y = fmap.inverse(X), fmap.inverse(Y)
            U = float(metric(X, Y))
        n += 1
        if not math.isfinite(U):
            break
    return -n
