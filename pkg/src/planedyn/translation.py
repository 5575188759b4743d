"""Translation domains and a numerical conjugacy to the unit translation.

A leaf W that lies between its preimage and its image bounds, together with
f(W), a fundamental domain D. Orbits of the closure of D tile an open set on
which f acts like (x, y) -> (x + 1, y). The chart built here sends a point p
with f^-n(p) = p' in D to (n + tau(p'), sigma(p')), where sigma is the
arclength position of the opposite leaf through p' on the lower boundary and
tau the U-fraction of the way from the lower to the upper boundary.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (BoundariesCross, ChartDegenerate, DegenerateOverlap, Inconclusive,
                     InvariantLeaf, LeafLost, NotConverging)
from .geometry import (BOUNDARY_TOL, BOUNDARY, INSIDE, INCONCLUSIVE, Point, Polyline,
                       _nearest_on_polyline, as_point, classify_between, count_crossings,
                       crossing_points, in_window, region_between_membership, separates)
from .invariant_sets import (_DIRECTION, DEFAULT_BUDGET, LeafCurve, _locate, initial_directions,
                             trace_batch, trace_leaf)
from .maps import PlaneMap, grid
from .metrics import LyapunovMetric

INVARIANCE_TOL = 1e-6
FIXED_POINT_TOL = 1e-6
ORBIT_BUDGET = 16
DENOM_FLOOR = 1e-9
CONTRACTION = 0.9
NAMES = ("preimage", "leaf", "image")
OPPOSITE = {"stable": "unstable", "unstable": "stable"}


def _poly(curve) -> Polyline:
    return curve.polyline if isinstance(curve, LeafCurve) else curve


def image_polyline(curve, fmap: PlaneMap, power: int = 1) -> Polyline:
    """Pointwise image of a polyline's vertices under f^power."""
    return Polyline(fmap.power(_poly(curve).vertices, power), check=False)


def point_at_arclength(poly: Polyline, s: float) -> np.ndarray:
    cum = poly.cumulative_length
    i = int(np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(cum) - 2))
    t = (s - cum[i]) / (cum[i + 1] - cum[i])
    V = poly.vertices
    return V[i] + t * (V[i + 1] - V[i])


def leaf_invariance_check(leaf, fmap: PlaneMap, power: int = 1, window=None) -> float:
    """One-sided Hausdorff distance from the f^power-image of the vertices to the leaf.

    Only image vertices that project into the interior of the leaf count:
    the rest lie beyond the traced piece, where nothing is known. Returns
    inf when no image vertex overlaps the leaf.
    """
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    poly = _poly(leaf)
    img = fmap.power(poly.vertices, power)
    img = img[np.all(np.isfinite(img), axis=1)]
    if window is not None:
        img = img[in_window(img, window)]
    if len(img) == 0:
        return float("inf")
    d, seg, t = _nearest_on_polyline(img, poly)
    at_end = ((seg == 0) & (t == 0.0)) | ((seg == len(poly) - 2) & (t == 1.0))
    if np.all(at_end):
        return float("inf")
    return float(d[~at_end].max())


def chord_sag(curve) -> float:
    """Largest gap between a polyline's chords and the smooth curve through its vertices.

    Estimated from vertex triples: the middle vertex sits about four sags off
    the chord joining its neighbours.
    """
    V = _poly(curve).vertices
    if len(V) < 3:
        return 0.0
    a, m, b = V[:-2], V[1:-1], V[2:]
    d = b - a
    cross = np.abs(d[:, 0] * (m - a)[:, 1] - d[:, 1] * (m - a)[:, 0])
    return float(np.max(cross / np.hypot(d[:, 0], d[:, 1])) / 4.0)


def invariance_tolerance(curve, tol: float = INVARIANCE_TOL) -> float:
    """Threshold below which leaf_invariance_check reports an invariant leaf."""
    return max(tol, 4.0 * chord_sag(curve))


# ---------------------------------------------------------------------------
# separation trichotomy
# ---------------------------------------------------------------------------

@dataclass
class SeparationReport:
    separator: Optional[str]  # "preimage", "leaf", "image" or None
    evidence: dict  # name -> {"tests": [True/False/None...], "verdict": True/False/None}

    def to_json(self) -> dict:
        return {"separator": self.separator, "evidence": self.evidence}


def _rep_indices(leaf, n_reps: int) -> np.ndarray:
    poly = _poly(leaf)
    n = len(poly)
    base = leaf.base_index if isinstance(leaf, LeafCurve) else n // 2
    spread = max(n // 8, 1)
    idx = base + spread * (np.arange(n_reps) - (n_reps - 1) // 2)
    return np.unique(np.clip(idx, 0, n - 1))


def separation_trichotomy(leaf, fmap: PlaneMap, n_reps: int = 3,
                          tol: float = INVARIANCE_TOL) -> SeparationReport:
    """Which of f^-1(W), W, f(W) separates representative points of the other two."""
    if leaf_invariance_check(leaf, fmap, 1) <= invariance_tolerance(leaf, tol):
        raise InvariantLeaf("the leaf is mapped onto itself")
    W = _poly(leaf)
    curves = {"preimage": image_polyline(W, fmap, -1), "leaf": W,
              "image": image_polyline(W, fmap, 1)}
    V = W.vertices[_rep_indices(leaf, n_reps)]
    reps = {"preimage": fmap.power(V, -1), "leaf": V, "image": fmap.power(V, 1)}
    evidence = {}
    for name in NAMES:
        a, b = [reps[o] for o in NAMES if o != name]
        tests = []
        for p, q in zip(a, b):
            try:
                tests.append(separates(curves[name], p, q))
            except (Inconclusive, DegenerateOverlap):
                tests.append(None)
        decided = {t for t in tests if t is not None}
        verdict = decided.pop() if len(decided) == 1 else None
        evidence[name] = {"tests": tests, "verdict": verdict}
    if all(e["verdict"] is None for e in evidence.values()):
        raise Inconclusive("no separation test was decidable; enlarge the window")
    seps = [n for n in NAMES if evidence[n]["verdict"] is True]
    if len(seps) > 1:
        raise Inconclusive(f"several separators reported: {seps}")
    return SeparationReport(seps[0] if seps else None, evidence)


# ---------------------------------------------------------------------------
# fundamental domains and orbit unions
# ---------------------------------------------------------------------------

@dataclass
class FundamentalDomain:
    lower: LeafCurve
    upper: LeafCurve
    tol: float = BOUNDARY_TOL

    @property
    def window(self):
        return self.lower.window

    def classify(self, P) -> np.ndarray:
        return classify_between(self.lower.polyline, self.upper.polyline, P, self.tol,
                                window=self.window)

    def membership(self, p):
        return region_between_membership(self.lower.polyline, self.upper.polyline, p, self.tol,
                                         self.window)

    def to_json(self) -> dict:
        return {"lower": self.lower.truncation(), "upper_vertices": len(self.upper.polyline),
                "boundary_tol": self.tol}


def build_fundamental_domain(leaf: LeafCurve, fmap: PlaneMap,
                             report: SeparationReport | None = None) -> FundamentalDomain:
    report = report or separation_trichotomy(leaf, fmap)
    if report.separator != "leaf":
        raise ValueError(f"the leaf does not separate its image from its preimage "
                         f"(separator: {report.separator})")
    upper_poly = Polyline(fmap.power(leaf.vertices, 1))
    if crossing_points(leaf.polyline, upper_poly).count:
        raise BoundariesCross("the leaf crosses its image")
    fb = fmap.forward(np.asarray(leaf.base, float))
    upper = dataclasses.replace(leaf, base=Point(float(fb[0]), float(fb[1])), polyline=upper_poly)
    return FundamentalDomain(leaf, upper)


def orbit_indices(domain: FundamentalDomain, fmap: PlaneMap, P, budget: int = ORBIT_BUDGET):
    """Vectorised orbit search.

    Returns ``(n, found, decided)``: the least-|n| index with f^-n(p) in the
    closed domain (ties toward negative n), whether one was found, and whether
    any membership test for the point was conclusive.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n_out = np.zeros(len(P), dtype=np.int64)
    found = np.zeros(len(P), dtype=bool)
    decided = np.zeros(len(P), dtype=bool)

    def test(X, n):
        todo = ~found & np.all(np.isfinite(X), axis=1)
        if not np.any(todo):
            return
        codes = domain.classify(X[todo])
        idx = np.nonzero(todo)[0]
        hit = (codes == INSIDE) | (codes == BOUNDARY)
        decided[idx[codes != INCONCLUSIVE]] = True
        found[idx[hit]] = True
        n_out[idx[hit]] = n

    fwd, bwd = P.copy(), P.copy()
    test(P, 0)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, budget + 1):
            if np.all(found):
                break
            fwd = fmap.forward(fwd)
            test(fwd, -j)
            bwd = fmap.inverse(bwd)
            test(bwd, j)
    return n_out, found, decided


def orbit_union_membership(domain: FundamentalDomain, fmap: PlaneMap, p,
                           budget: int = ORBIT_BUDGET):
    """Least-|n| index with f^-n(p) in the closed domain, or None for NotCovered."""
    n, found, decided = orbit_indices(domain, fmap, [as_point(p)], budget)
    if found[0]:
        return int(n[0])
    if not decided[0]:
        raise Inconclusive(f"no membership test for {tuple(p)} was decidable")
    return None


@dataclass
class Coverage:
    total: int
    covered: int
    inconclusive: int
    witnesses: list  # NotCovered sample points

    @property
    def complete(self) -> bool:
        return self.covered == self.total

    def to_json(self) -> dict:
        return {"total": self.total, "covered": self.covered, "inconclusive": self.inconclusive,
                "not_covered": [list(w) for w in self.witnesses]}


def coverage_scan(domain: FundamentalDomain, fmap: PlaneMap, P,
                  budget: int = ORBIT_BUDGET) -> Coverage:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    _, found, decided = orbit_indices(domain, fmap, P, budget)
    miss = ~found & decided
    return Coverage(len(P), int(found.sum()), int((~found & ~decided).sum()),
                    [Point(float(a), float(b)) for a, b in P[miss]])


# ---------------------------------------------------------------------------
# limit leaves
# ---------------------------------------------------------------------------

def _refine_on_leaf(metric, fmap, leaf: LeafCurve, T: Polyline, s: float, centre) -> float:
    """Sharpen a polyline crossing to the point of T on the leaf through ``centre``.

    Chords of a traced leaf miss the true curve by O(step^2); the escape-time
    zoom measured from a vertex of the leaf does not.
    """
    half = 2.0 * leaf.step
    a = point_at_arclength(T, max(s - half, 0.0))
    b = point_at_arclength(T, min(s + half, T.length))
    P, lost, _, _ = _locate(metric, fmap, np.asarray(centre, float)[None], a[None], b[None],
                            leaf.k, leaf.n_max, _DIRECTION[leaf.stability])
    if lost[0]:
        return s
    return T.arclength_of(P[0])


def crossing_sequence(leaf, fmap: PlaneMap, transversal, budget: int,
                      direction: str = "backward", metric: LyapunovMetric | None = None) -> np.ndarray:
    """Arclength positions on the transversal of f^{+-n}(leaf), n = 1..budget.

    With a metric and a traced leaf, each crossing is refined on the leaf.
    """
    sgn = {"backward": -1, "forward": 1}[direction]
    T = _poly(transversal)
    V = _poly(leaf).vertices
    refine = metric is not None and isinstance(leaf, LeafCurve)
    out = []
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, budget + 1):
            img = fmap.power(V, sgn * n)
            img = img[np.all(np.isfinite(img), axis=1)]
            try:
                cr = crossing_points(T, Polyline(img, check=False))
            except (ValueError, DegenerateOverlap) as exc:
                raise NotConverging(f"iterate {sgn * n}: {exc}") from exc
            if cr.count != 1:
                raise NotConverging(f"iterate {sgn * n} meets the transversal {cr.count} times")
            pos = T.arclength_of(cr.points[0])
            if refine:
                near = img[int(np.argmin(np.hypot(*(img - np.array(cr.points[0])).T)))]
                pos = _refine_on_leaf(metric, fmap, leaf, T, pos, near)
            out.append(pos)
    return np.array(out)


def limit_position(seq, ratio: float = CONTRACTION, tol: float = INVARIANCE_TOL) -> float:
    """Limit of the even subsequence x_2, x_4, ... (Aitken extrapolation)."""
    e = np.asarray(seq, float)[1::2]
    if len(e) < 3:
        raise NotConverging("need at least three even iterates")
    d = np.diff(e)
    if np.all(np.abs(d) <= tol):
        return float(e[-1])
    if not (np.all(d > 0) or np.all(d < 0)):
        raise NotConverging("even crossings are not monotone")
    if np.any(np.abs(d[1:]) > ratio * np.abs(d[:-1])):
        raise NotConverging("even crossings do not contract")
    return float(e[-1] - d[-1] ** 2 / (d[-1] - d[-2]))


def boundary_limit_leaf(leaf: LeafCurve, fmap: PlaneMap, transversal, budget: int = 8, *,
                        metric: LyapunovMetric, direction: str = "backward",
                        tol: float = INVARIANCE_TOL, trace_budget: float = DEFAULT_BUDGET) -> LeafCurve:
    """Leaf through the limit of the even crossings of f^{+-n}(leaf) with a transversal."""
    if budget < 2 or budget % 2:
        raise ValueError("budget must be even and at least 2")
    if leaf_invariance_check(leaf, fmap, 1) <= invariance_tolerance(leaf, tol):
        return leaf
    seq = crossing_sequence(leaf, fmap, transversal, budget, direction, metric)
    z = limit_position(seq, tol=tol)
    T = _poly(transversal)
    if not 0.0 <= z <= T.length:
        raise NotConverging("the limit lies off the transversal")
    x = point_at_arclength(T, z)
    return trace_leaf(metric, fmap, x, leaf.stability, leaf.k, leaf.n_max, leaf.step,
                      trace_budget, leaf.window)


def invariant_leaf_near(leaf: LeafCurve, fmap: PlaneMap, transversal, metric: LyapunovMetric,
                        budget: int = 8, tol: float = INVARIANCE_TOL):
    """An f^2-invariant leaf: the input itself or a limit leaf in either direction."""
    if leaf_invariance_check(leaf, fmap, 2) <= invariance_tolerance(leaf, tol):
        return leaf
    for direction in ("backward", "forward"):
        try:
            S = boundary_limit_leaf(leaf, fmap, transversal, budget, metric=metric,
                                    direction=direction, tol=tol)
        except (NotConverging, LeafLost):
            continue
        if leaf_invariance_check(S, fmap, 2) <= invariance_tolerance(S, tol):
            return S
    return None


@dataclass
class DetectorResult:
    fired: bool
    point: Optional[Point] = None
    displacement: Optional[float] = None
    stable_leaf: Optional[LeafCurve] = None
    unstable_leaf: Optional[LeafCurve] = None

    def to_json(self) -> dict:
        return {"fired": self.fired,
                "point": None if self.point is None else list(self.point),
                "displacement": self.displacement,
                "stable_leaf_found": self.stable_leaf is not None,
                "unstable_leaf_found": self.unstable_leaf is not None}


def fixed_point_detector(metric: LyapunovMetric, fmap: PlaneMap, seed=(0.0, 1.0), *,
                         k: float = 1.0, n_max: int = 40, step: float = 0.05,
                         window=(-12.0, 12.0, -12.0, 12.0), budget: int = 8,
                         tol: float = FIXED_POINT_TOL) -> DetectorResult:
    """Look for f^2-invariant stable and unstable leaves and test their crossing."""
    Ws = trace_leaf(metric, fmap, seed, "stable", k, n_max, step, DEFAULT_BUDGET, window)
    Wu = trace_leaf(metric, fmap, seed, "unstable", k, n_max, step, DEFAULT_BUDGET, window)
    S = invariant_leaf_near(Ws, fmap, Wu, metric, budget)
    I = invariant_leaf_near(Wu, fmap, Ws, metric, budget)
    if S is None or I is None:
        return DetectorResult(False, stable_leaf=S, unstable_leaf=I)
    cr = crossing_points(S.polyline, I.polyline)
    if cr.count == 0:
        return DetectorResult(False, stable_leaf=S, unstable_leaf=I)
    p = np.array(cr.points[0])
    disp = float(np.hypot(*(fmap.power(p, 2) - p)))
    return DetectorResult(disp <= tol, Point(*map(float, p)), disp, S, I)


# ---------------------------------------------------------------------------
# conjugacy chart
# ---------------------------------------------------------------------------

@dataclass
class ConjugacyChart:
    domain: FundamentalDomain
    fmap: PlaneMap
    metric: LyapunovMetric
    budget: int = ORBIT_BUDGET
    arc_budget: float = 8.0
    excluded: int = 0
    residual: Optional[tuple] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, p):
        h = self.evaluate([as_point(p)])[0]
        return None if not np.all(np.isfinite(h)) else Point(float(h[0]), float(h[1]))

    def evaluate(self, P) -> np.ndarray:
        """h at each point; NaN rows for NotCovered points or untraceable representatives."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        n, found, _ = orbit_indices(self.domain, self.fmap, P, self.budget)
        out = np.full(P.shape, np.nan)
        idx = np.nonzero(found)[0]
        if len(idx) == 0:
            self.excluded += len(P)
            return out
        R = np.empty((len(idx), 2))
        nn = n[idx].copy()
        for v in np.unique(nn):
            sel = nn == v
            R[sel] = self.fmap.power(P[idx[sel]], -int(v))
        # half-open fundamental domain: the upper edge belongs to the next tile
        up = self.domain.upper.polyline.distance(R) <= self.domain.tol
        if np.any(up):
            R[up] = self.fmap.inverse(R[up])
            nn[up] += 1
        keys = [tuple(np.round(r, 9)) for r in R]
        new = sorted({k for k in keys if k not in self._cache})
        if new:
            st = self._coordinates(np.array([R[keys.index(k)] for k in new]))
            self._cache.update(zip(new, map(tuple, st)))
        ST = np.array([self._cache[k] for k in keys])
        out[idx, 0] = nn + ST[:, 1]
        out[idx, 1] = ST[:, 0]
        self.excluded += int(np.sum(~np.all(np.isfinite(out), axis=1)))
        return out

    def _coordinates(self, R) -> np.ndarray:
        """(sigma, tau) for representatives in the closed domain."""
        lower, upper = self.domain.lower, self.domain.upper
        opp = OPPOSITE[lower.stability]
        k, n_max, step = lower.k, lower.n_max, lower.step
        tangents = np.concatenate([initial_directions(self.metric, self.fmap, r, opp, k, n_max, step)
                                   for r in R])
        starts = np.repeat(R, 2, axis=0)

        def reached(i, path):
            # stop a half-arc once it meets a boundary away from its start
            if len(path) < 3:
                return False
            far = np.hypot(*(path[1:] - path[0]).T) > step
            a, b = path[:-1][far], path[1:][far]
            if len(a) == 0:
                return False
            return bool(count_crossings(a, b, lower.polyline)[0].sum()
                        or count_crossings(a, b, upper.polyline)[0].sum())

        window = _enlarge(lower.window, upper.polyline.bbox)
        paths, _, _ = trace_batch(self.metric, self.fmap, starts, tangents, opp, k, n_max, step,
                                  self.arc_budget / 2, window, stop_fn=reached)
        out = np.full((len(R), 2), np.nan)
        for j, r in enumerate(R):
            back, fwd = paths[2 * j + 1][::-1], paths[2 * j]
            arc = Polyline(np.concatenate([back, fwd[1:]]), check=False)
            s_r = float(arc.cumulative_length[len(back) - 1])
            cl = _nearest_crossing(lower.polyline, arc, s_r)
            cu = _nearest_crossing(upper.polyline, arc, s_r)
            if cl is None or cu is None:
                continue
            den = float(self.metric(cl, cu))
            if den < DENOM_FLOOR:
                raise ChartDegenerate(f"lower and upper crossings coincide near {tuple(r)}")
            out[j, 0] = lower.signed_arclength(cl)
            out[j, 1] = float(self.metric(cl, r)) / den
        return out

    def to_json(self) -> dict:
        return {"domain": self.domain.to_json(), "orbit_budget": self.budget,
                "arc_budget": self.arc_budget, "excluded": self.excluded,
                "residual": None if self.residual is None else
                {"max": self.residual[0], "mean": self.residual[1]},
                "target": [1.0, 0.0]}


def _enlarge(window, bbox):
    return (min(window[0], bbox[0]), max(window[1], bbox[1]),
            min(window[2], bbox[2]), max(window[3], bbox[3]))


def _nearest_crossing(boundary: Polyline, arc: Polyline, s_r: float):
    try:
        cr = crossing_points(arc, boundary)
    except (ValueError, DegenerateOverlap):
        return None
    if cr.count == 0:
        return None
    s = np.array([arc.arclength_of(p) for p in cr.points])
    return np.array(cr.points[int(np.argmin(np.abs(s - s_r)))])


def build_conjugacy(domain: FundamentalDomain, fmap: PlaneMap, metric: LyapunovMetric,
                    budget: int = ORBIT_BUDGET, arc_budget: float = 8.0) -> ConjugacyChart:
    return ConjugacyChart(domain, fmap, metric, budget, arc_budget)


def conjugacy_residual(chart: ConjugacyChart, fmap: PlaneMap, samples):
    """(max, mean) of |h(f p) - T(h p)| over samples where both sides are defined."""
    S = np.atleast_2d(np.asarray(samples, dtype=float))
    H0 = chart.evaluate(S)
    H1 = chart.evaluate(fmap.forward(S))
    ok = np.all(np.isfinite(H0), axis=1) & np.all(np.isfinite(H1), axis=1)
    if not np.any(ok):
        return float("nan"), float("nan")
    d = np.hypot(H1[ok, 0] - H0[ok, 0] - 1.0, H1[ok, 1] - H0[ok, 1])
    chart.residual = (float(d.max()), float(d.mean()))
    return chart.residual


# ---------------------------------------------------------------------------
# the two-stage pipeline
# ---------------------------------------------------------------------------

@dataclass
class PipelineReport:
    verdict: str  # "Conjugated", "NotCovered" or "PeriodicPoint"
    stages: list
    stable_separator: Optional[str] = None
    stable_witnesses: list = field(default_factory=list)
    limit_leaf: Optional[LeafCurve] = None
    limit_deviation: Optional[float] = None
    domain: Optional[FundamentalDomain] = None
    coverage: Optional[Coverage] = None
    chart: Optional[ConjugacyChart] = None
    residual: Optional[tuple] = None
    detector: Optional[DetectorResult] = None

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "stages": self.stages,
            "stable_separator": self.stable_separator,
            "stable_not_covered": [list(w) for w in self.stable_witnesses],
            "limit_leaf": None if self.limit_leaf is None else self.limit_leaf.truncation(),
            "limit_deviation": self.limit_deviation,
            "domain": None if self.domain is None else self.domain.to_json(),
            "coverage": None if self.coverage is None else self.coverage.to_json(),
            "residual": None if self.residual is None else
            {"max": self.residual[0], "mean": self.residual[1]},
            "detector": None if self.detector is None else self.detector.to_json(),
        }


def square_grid(box, n: int) -> np.ndarray:
    xs = np.linspace(box[0], box[1], n)
    ys = np.linspace(box[2], box[3], n)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def translation_pipeline(metric: LyapunovMetric, fmap: PlaneMap, seed=(0.0, 1.0), *,
                         k: float = 1.0, n_max: int = 40, step: float = 0.05,
                         window=(-12.0, 12.0, -12.0, 12.0), orbit_budget: int = ORBIT_BUDGET,
                         coverage_box=(-10.0, 10.0, -10.0, 10.0), coverage_n: int = 41,
                         chart_box=(-5.0, 5.0, -5.0, 5.0), chart_n: int = 21,
                         limit_budget: int = 8, arc_budget: float = 8.0) -> PipelineReport:
    """Stable-leaf domain first; if its orbits miss part of the plane, switch to the
    unstable leaf through the boundary limit leaf and rebuild."""
    trace = dict(k=k, n_max=n_max, step=step, budget=DEFAULT_BUDGET, window=window)
    cover_pts = square_grid(coverage_box, coverage_n)
    stages = []
    rep = None

    def finish(domain, cov, **kw):
        chart = build_conjugacy(domain, fmap, metric, orbit_budget, arc_budget)
        res = conjugacy_residual(chart, fmap, square_grid(chart_box, chart_n))
        stages.append("chart")
        return PipelineReport("Conjugated", stages, domain=domain, coverage=cov, chart=chart,
                              residual=res, **kw)

    Ws = trace_leaf(metric, fmap, seed, "stable", **trace)
    stages.append("stable leaf")
    try:
        rep = separation_trichotomy(Ws, fmap)
    except InvariantLeaf:
        rep = None
    witnesses = []
    if rep is not None and rep.separator == "leaf":
        D = build_fundamental_domain(Ws, fmap, rep)
        cov = coverage_scan(D, fmap, cover_pts, orbit_budget)
        stages.append("stable domain")
        if cov.complete:
            return finish(D, cov, stable_separator="leaf")
        witnesses = cov.witnesses
    transversal = trace_leaf(metric, fmap, seed, "unstable", **trace)
    S = invariant_leaf_near(Ws, fmap, transversal, metric, limit_budget)
    common = dict(stable_separator=None if rep is None else rep.separator,
                  stable_witnesses=witnesses)
    if S is None:
        stages.append("no limit leaf")
        return PipelineReport("NotCovered", stages, **common)
    stages.append("limit leaf")
    common.update(limit_leaf=S, limit_deviation=leaf_invariance_check(S, fmap, 2))
    Wu = trace_leaf(metric, fmap, S.base, "unstable", **trace)
    stages.append("unstable leaf")
    try:
        rep_u = separation_trichotomy(Wu, fmap)
    except InvariantLeaf:
        rep_u = None
    if rep_u is not None and rep_u.separator == "leaf":
        D = build_fundamental_domain(Wu, fmap, rep_u)
        cov = coverage_scan(D, fmap, cover_pts, orbit_budget)
        stages.append("unstable domain")
        if cov.complete:
            return finish(D, cov, **common)
    det = fixed_point_detector(metric, fmap, seed, k=k, n_max=n_max, step=step, window=window,
                               budget=limit_budget)
    stages.append("detector")
    return PipelineReport("PeriodicPoint" if det.fired else "NotCovered", stages,
                          detector=det, **common)
