"""Planar primitives: points, open polylines, crossings and parity separation.

Orientation signs are exact. A fast floating-point filter (Shewchuk's
``ccwerrboundA``) decides almost every case; the remainder is recomputed in
rational arithmetic, which is exact because every float is a rational.

Zero orientations are resolved by symbolic perturbation: a point lying exactly
on a segment's supporting line counts as lying on its left. With that rule a
polyline passing through a vertex of another one is counted once, and a touch
that does not change sides is counted zero or two times. Crossing parity
therefore matches the side change.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateOverlap, Inconclusive, NonFinite, SelfIntersection

DEFAULT_WINDOW = (-64.0, 64.0, -64.0, 64.0)
PARALLEL_ANGLE = 1e-12
BOUNDARY_TOL = 1e-6

_CCW_ERRBOUND = (3.0 + 16.0 * np.finfo(float).eps) * np.finfo(float).eps


class Point(NamedTuple):
    x1: float
    x2: float


def as_point(p) -> Point:
    x1, x2 = float(p[0]), float(p[1])
    if not (np.isfinite(x1) and np.isfinite(x2)):
        raise NonFinite(f"non-finite point {p!r}")
    return Point(x1, x2)


def in_window(P, window) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    x0, x1, y0, y1 = window
    return (P[..., 0] >= x0) & (P[..., 0] <= x1) & (P[..., 1] >= y0) & (P[..., 1] <= y1)


class Polyline:
    """An open, simple, oriented polyline in the plane."""

    def __init__(self, vertices, closed: bool = False, check: bool = True):
        V = np.array(vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or len(V) < 2:
            raise ValueError("a polyline needs at least two 2-D vertices")
        if not np.all(np.isfinite(V)):
            raise NonFinite("polyline has non-finite vertices")
        if closed:
            raise ValueError("closed polylines are not supported")
        if np.any(np.all(V[1:] == V[:-1], axis=1)):
            raise ValueError("consecutive vertices must be distinct")
        V.setflags(write=False)
        self.vertices = V
        self.closed = False
        if check:
            _check_simple(V)

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"Polyline(n={len(self)}, length={self.length:.6g})"

    @property
    def segments(self):
        return self.vertices[:-1], self.vertices[1:]

    @property
    def cumulative_length(self) -> np.ndarray:
        seg = np.hypot(*np.diff(self.vertices, axis=0).T)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.cumulative_length[-1])

    @property
    def bbox(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])

    def reversed(self) -> "Polyline":
        return Polyline(self.vertices[::-1], check=False)

    def mapped(self, fn, check: bool = True) -> "Polyline":
        """Pointwise image of the vertices under ``fn`` (vectorised map)."""
        return Polyline(fn(self.vertices), check=check)

    def arclength_of(self, point) -> float:
        """Arclength from the first vertex to the orthogonal projection of ``point``."""
        _, seg, t = _nearest_on_polyline(np.asarray(point, float)[None], self)
        cum = self.cumulative_length
        i = int(seg[0])
        return float(cum[i] + t[0] * (cum[i + 1] - cum[i]))

    def distance(self, P) -> np.ndarray:
        d, _, _ = _nearest_on_polyline(np.atleast_2d(np.asarray(P, float)), self)
        return d

    def to_csv(self, path) -> None:
        write_points_csv(path, self.vertices)

    @classmethod
    def from_csv(cls, path) -> "Polyline":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["x1", "x2"]:
                raise ValueError(f"expected header x1,x2 in {path}")
            rows = [(float(a), float(b)) for a, b in reader]
        return cls(rows)


def write_points_csv(path, P, header=("x1", "x2")) -> None:
    P = np.asarray(P, dtype=float)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in P:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


@dataclass
class CrossingReport:
    count: int
    points: list = field(default_factory=list)
    parities: list = field(default_factory=list)

    def __post_init__(self):
        if not (self.count == len(self.points) == len(self.parities)):
            raise ValueError("count, points and parities disagree")


class Membership(enum.Enum):
    INSIDE = "Inside"
    OUTSIDE = "Outside"
    BOUNDARY = "Boundary"


# ---------------------------------------------------------------------------
# exact predicates
# ---------------------------------------------------------------------------

def _orient_exact(ax, ay, bx, by, cx, cy) -> int:
    ax, ay, bx, by, cx, cy = map(Fraction, (ax, ay, bx, by, cx, cy))
    det = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx)
    return (det > 0) - (det < 0)


def orient_sign(a, b, c) -> np.ndarray:
    """Exact sign of the orientation determinant of (a, b, c), broadcasting."""
    a, b, c = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c)))
    detleft = (a[..., 0] - c[..., 0]) * (b[..., 1] - c[..., 1])
    detright = (a[..., 1] - c[..., 1]) * (b[..., 0] - c[..., 0])
    det = detleft - detright
    bound = _CCW_ERRBOUND * (np.abs(detleft) + np.abs(detright))
    sign = np.atleast_1d(np.sign(det).astype(np.int8))
    unsure = np.atleast_1d(np.abs(det) <= bound)
    if np.any(unsure):
        A, B, C = (v.reshape(-1, 2) for v in (a, b, c))
        flat = sign.reshape(-1)
        for i in np.flatnonzero(unsure):
            flat[i] = _orient_exact(A[i, 0], A[i, 1], B[i, 0], B[i, 1], C[i, 0], C[i, 1])
    return sign.reshape(det.shape)


def _side(s):
    # symbolic perturbation: on-line counts as left
    return np.where(s >= 0, 1, -1)


def _segment_tests(a0, a1, b0, b1):
    """Crossing flags, collinear-overlap flags and cross(da, db) for segment pairs."""
    o1 = orient_sign(a0, a1, b0)
    o2 = orient_sign(a0, a1, b1)
    o3 = orient_sign(b0, b1, a0)
    o4 = orient_sign(b0, b1, a1)
    crossed = (_side(o1) != _side(o2)) & (_side(o3) != _side(o4))
    da = a1 - a0
    db = b1 - b0
    cr = da[..., 0] * db[..., 1] - da[..., 1] * db[..., 0]
    collinear = (o1 == 0) & (o2 == 0)
    overlap = np.zeros_like(collinear)
    if np.any(collinear):
        # project on the dominant axis of a to measure the 1-D overlap
        axis = np.where(np.abs(da[..., 0]) >= np.abs(da[..., 1]), 0, 1)
        pick = lambda P: np.take_along_axis(P, axis[..., None], axis=-1)[..., 0]
        alo = np.minimum(pick(a0), pick(a1))
        ahi = np.maximum(pick(a0), pick(a1))
        blo = np.minimum(pick(b0), pick(b1))
        bhi = np.maximum(pick(b0), pick(b1))
        overlap = collinear & (np.minimum(ahi, bhi) - np.maximum(alo, blo) > 0)
    na = np.hypot(da[..., 0], da[..., 1])
    nb = np.hypot(db[..., 0], db[..., 1])
    near_parallel = crossed & (np.abs(cr) <= PARALLEL_ANGLE * na * nb)
    return crossed, overlap | near_parallel, cr


def _grid_keys(s0, s1, size, origin):
    lo = np.floor((np.minimum(s0, s1) - origin) / size).astype(np.int64)
    hi = np.floor((np.maximum(s0, s1) - origin) / size).astype(np.int64)
    wx = hi[:, 0] - lo[:, 0] + 1
    wy = hi[:, 1] - lo[:, 1] + 1
    counts = wx * wy
    ids = np.repeat(np.arange(len(s0)), counts)
    start = np.repeat(np.cumsum(counts) - counts, counts)
    local = np.arange(counts.sum()) - start
    w = np.repeat(wx, counts)
    cx = np.repeat(lo[:, 0], counts) + local % w
    cy = np.repeat(lo[:, 1], counts) + local // w
    return ids, cx * 4_000_003 + cy


def _cell_count(s0, s1, size):
    w = np.floor(np.maximum(s0, s1) / size) - np.floor(np.minimum(s0, s1) / size) + 1
    return float(np.sum(w[:, 0] * w[:, 1]))


def _candidate_pairs(a0, a1, b0, b1):
    """Index pairs of segments whose cells in a uniform grid hash coincide."""
    allp = np.concatenate([a0, a1, b0, b1])
    origin = allp.min(axis=0)
    extent = float(np.max(allp.max(axis=0) - origin)) or 1.0
    lens = np.concatenate([np.hypot(*(a1 - a0).T), np.hypot(*(b1 - b0).T)])
    size = max(2.0 * float(np.median(lens)), extent / 1024.0, 1e-300)
    limit = 8 * (len(a0) + len(b0)) + 100_000
    while _cell_count(a0, a1, size) + _cell_count(b0, b1, size) > limit:
        size *= 2.0
    ia, ka = _grid_keys(a0, a1, size, origin)
    ib, kb = _grid_keys(b0, b1, size, origin)
    order = np.argsort(kb, kind="stable")
    kb, ib = kb[order], ib[order]
    left = np.searchsorted(kb, ka, side="left")
    right = np.searchsorted(kb, ka, side="right")
    n = right - left
    pa = np.repeat(ia, n)
    offs = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
    pb = ib[np.repeat(left, n) + offs]
    if len(pa) == 0:
        return pa, pb
    pairs = np.unique(pa.astype(np.int64) * (len(b0) + 1) + pb)
    return pairs // (len(b0) + 1), pairs % (len(b0) + 1)


def _check_simple(V):
    s0, s1 = V[:-1], V[1:]
    ia, ib = _candidate_pairs(s0, s1, s0, s1)
    keep = ib > ia + 1
    ia, ib = ia[keep], ib[keep]
    if len(ia) == 0:
        return
    crossed, degenerate, _ = _segment_tests(s0[ia], s1[ia], s0[ib], s1[ib])
    if np.any(crossed | degenerate):
        raise SelfIntersection("polyline intersects itself")


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def crossing_points(a: Polyline, b: Polyline) -> CrossingReport:
    """All transversal crossings of ``b`` with ``a``, ordered along ``a``."""
    ends_a = {tuple(a.vertices[0]), tuple(a.vertices[-1])}
    ends_b = {tuple(b.vertices[0]), tuple(b.vertices[-1])}
    if ends_a & ends_b:
        raise ValueError("polylines share an endpoint")
    a0, a1 = a.segments
    b0, b1 = b.segments
    ia, ib = _candidate_pairs(a0, a1, b0, b1)
    if len(ia) == 0:
        return CrossingReport(0)
    crossed, degenerate, cr = _segment_tests(a0[ia], a1[ia], b0[ib], b1[ib])
    if np.any(degenerate):
        raise DegenerateOverlap("collinear or near-parallel overlapping segments")
    ia, ib, cr = ia[crossed], ib[crossed], cr[crossed]
    da = a1[ia] - a0[ia]
    w = b0[ib] - a0[ia]
    db = b1[ib] - b0[ib]
    t = (w[:, 0] * db[:, 1] - w[:, 1] * db[:, 0]) / cr
    t = np.clip(t, 0.0, 1.0)
    pts = a0[ia] + t[:, None] * da
    order = np.lexsort((t, ia))
    return CrossingReport(
        count=int(len(ia)),
        points=[Point(float(x), float(y)) for x, y in pts[order]],
        parities=[int(np.sign(c)) for c in cr[order]],
    )


def _nearest_on_polyline(P, poly: Polyline, chunk: int = 2048):
    """Distance, segment index and segment parameter of the closest point."""
    s0, s1 = poly.segments
    d = s1 - s0
    dd = np.einsum("ij,ij->i", d, d)
    dist = np.empty(len(P))
    seg = np.empty(len(P), dtype=np.int64)
    par = np.empty(len(P))
    for lo in range(0, len(P), chunk):
        Q = P[lo:lo + chunk]
        w = Q[:, None, :] - s0[None, :, :]
        t = np.clip(np.einsum("mij,ij->mi", w, d) / dd, 0.0, 1.0)
        diff = w - t[..., None] * d[None]
        r2 = np.einsum("mij,mij->mi", diff, diff)
        k = np.argmin(r2, axis=1)
        rows = np.arange(len(Q))
        dist[lo:lo + chunk] = np.sqrt(r2[rows, k])
        seg[lo:lo + chunk] = k
        par[lo:lo + chunk] = t[rows, k]
    return dist, seg, par


def count_crossings(P0, P1, curve: Polyline):
    """Crossing counts of the segments P0[i]-P1[i] with ``curve``.

    Returns ``(counts, degenerate)``; ``degenerate`` flags query segments that
    overlap a curve segment, for which the count is meaningless.
    """
    P0 = np.atleast_2d(np.asarray(P0, float))
    P1 = np.atleast_2d(np.asarray(P1, float))
    c0, c1 = curve.segments
    clo, chi = np.minimum(c0, c1), np.maximum(c0, c1)
    counts = np.zeros(len(P0), dtype=np.int64)
    degenerate = np.zeros(len(P0), dtype=bool)
    rows = max(1, 400_000 // len(c0))
    # query segments are long, so a bounding-box sweep beats the grid hash
    for lo in range(0, len(P0), rows):
        q0, q1 = P0[lo:lo + rows], P1[lo:lo + rows]
        qlo, qhi = np.minimum(q0, q1), np.maximum(q0, q1)
        hit = np.all((qlo[:, None, :] <= chi[None]) & (qhi[:, None, :] >= clo[None]), axis=2)
        ia, ib = np.nonzero(hit)
        if len(ia) == 0:
            continue
        crossed, degen, _ = _segment_tests(q0[ia], q1[ia], c0[ib], c1[ib])
        np.add.at(counts, lo + ia[crossed], 1)
        degenerate[lo + ia[degen]] = True
    return counts, degenerate


def _endpoints_clear(P0, P1, curve: Polyline, tol: float) -> np.ndarray:
    """True where neither curve endpoint lies in the bounding box of P0-P1."""
    lo = np.minimum(P0, P1) - tol
    hi = np.maximum(P0, P1) + tol
    ok = np.ones(len(P0), dtype=bool)
    for e in (curve.vertices[0], curve.vertices[-1]):
        inside = np.all((e >= lo) & (e <= hi), axis=1)
        ok &= ~inside
    return ok


def separates(curve: Polyline, p, q, tol: float = 1e-9) -> bool:
    """Crossing-parity test: does ``curve`` separate ``p`` from ``q``?

    Valid when the curve is proper inside the window spanned by the two points;
    raises Inconclusive when either point is within ``tol`` of the curve or when
    the curve ends inside the bounding box of the segment ``pq``.
    """
    p, q = as_point(p), as_point(q)
    P = np.array([p, q], dtype=float)
    if np.any(curve.distance(P) <= tol):
        raise Inconclusive("point lies on the curve")
    if not _endpoints_clear(P[:1], P[1:], curve, tol)[0]:
        raise Inconclusive("curve terminates between the points")
    counts, degenerate = count_crossings(P[:1], P[1:], curve)
    if degenerate[0]:
        raise DegenerateOverlap("segment pq overlaps the curve")
    return bool(counts[0] % 2)


INSIDE, OUTSIDE, BOUNDARY, INCONCLUSIVE = 1, 0, 2, -1
_CODE = {INSIDE: Membership.INSIDE, OUTSIDE: Membership.OUTSIDE, BOUNDARY: Membership.BOUNDARY}


def _side_of(curve: Polyline, other: Polyline, P, tol, tree, n_refs, window=None):
    """+1 where P is on ``other``'s side of ``curve``, 0 opposite, -1 unknown."""
    k = min(n_refs * 4, len(other))
    _, idx = tree.query(P, k=k)
    idx = np.atleast_2d(idx).reshape(len(P), k)
    out = np.full(len(P), -1, dtype=np.int64)
    for j in range(0, k, 4):
        todo = out < 0
        if not np.any(todo):
            break
        refs = other.vertices[idx[todo, j]]
        Q = P[todo]
        clear = _endpoints_clear(Q, refs, curve, tol)
        if window is not None:
            clear &= in_window(refs, window)
        counts, degenerate = count_crossings(Q, refs, curve)
        good = clear & ~degenerate
        res = np.where(counts % 2 == 0, 1, 0)
        sub = out[todo]
        sub[good] = res[good]
        out[todo] = sub
    return out


def classify_between(lower: Polyline, upper: Polyline, P, tol: float = BOUNDARY_TOL,
                     n_refs: int = 4, window=None) -> np.ndarray:
    """Vectorised membership codes (INSIDE/OUTSIDE/BOUNDARY/INCONCLUSIVE).

    ``window`` bounds the region where both curves are known to be complete;
    parity tests that would leave it are inconclusive.
    """
    P = np.atleast_2d(np.asarray(P, float))
    codes = np.full(len(P), INCONCLUSIVE, dtype=np.int64)
    on_edge = (lower.distance(P) <= tol) | (upper.distance(P) <= tol)
    codes[on_edge] = BOUNDARY
    usable = ~on_edge
    if window is not None:
        usable &= in_window(P, window)
    rest = np.nonzero(usable)[0]
    if len(rest) == 0:
        return codes
    Q = P[rest]
    s_low = _side_of(lower, upper, Q, tol, cKDTree(upper.vertices), n_refs, window)
    s_up = _side_of(upper, lower, Q, tol, cKDTree(lower.vertices), n_refs, window)
    sub = np.full(len(Q), INCONCLUSIVE, dtype=np.int64)
    sub[(s_low == 0) | (s_up == 0)] = OUTSIDE
    sub[(s_low == 1) & (s_up == 1)] = INSIDE
    codes[rest] = sub
    return codes


def region_between_membership(lower: Polyline, upper: Polyline, p,
                              tol: float = BOUNDARY_TOL, window=None) -> Membership:
    """Classify ``p`` against the region bounded by two disjoint proper curves."""
    code = classify_between(lower, upper, [as_point(p)], tol, window=window)[0]
    if code == INCONCLUSIVE:
        raise Inconclusive(f"cannot classify {tuple(p)} inside the sampled window")
    return _CODE[int(code)]


def hausdorff_to(points, poly: Polyline, window=None) -> float:
    """One-sided discrete Hausdorff distance from ``points`` to ``poly``."""
    P = np.atleast_2d(np.asarray(points, float))
    if window is not None:
        P = P[in_window(P, window)]
    if len(P) == 0:
        return 0.0
    return float(poly.distance(P).max())


def polyline_from_function(fn, t0: float, t1: float, n: int, axis: int = 0) -> Polyline:
    """Graph of ``fn`` sampled at ``n`` points; ``axis=1`` gives x1 = fn(x2)."""
    t = np.linspace(t0, t1, n)
    v = fn(t)
    V = np.column_stack([t, v]) if axis == 0 else np.column_stack([v, t])
    return Polyline(V)


def segment(p, q, n: int = 2) -> Polyline:
    p, q = np.asarray(as_point(p)), np.asarray(as_point(q))
    s = np.linspace(0.0, 1.0, n)[:, None]
    return Polyline(p + s * (q - p))
