"""Lyapunov metric functions U = Ds + Du.

Modes
-----
A  path infimum of the weighted length integrals, computed numerically over
   piecewise-linear paths (an upper bound on the true infimum).
B  paths restricted to the vertical strip spanned by the two points:
   Du = lam**min(p1, q1) * |p2 - q2|.
C  exact differentials of psi(x) = lam**-x1 / ln lam and phi(x) = lam**x1 * x2:
   Ds = |psi(p) - psi(q)|, Du = |phi(p) - phi(q)|.  Default.
D  split Euclidean metric for diag(lam, 1/lam): Ds = |dx2|, Du = |dx1|.
E  pullback L(p, q) = base(H(p), H(q)).

Modes B and C share Ds. Unrestricted mode-A paths can make Du arbitrarily small
by detouring to the left, where the weight lam**x1 vanishes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BudgetExceeded, ConfigError, Overflow
from .maps import OVERFLOW_LIMIT, PlaneMap, base_kind, map_from_spec, map_to_spec

EPS_REL = 1e-12
MODES = ("A", "B", "C", "D", "E")


@dataclass(frozen=True)
class PathFamily:
    n_points: int = 6
    detour: float = 10.0
    restarts: int = 20
    budget: int = 100_000
    seed: int = 0


@dataclass(frozen=True)
class LyapunovMetric:
    mode: str = "C"
    lam: float = 2.0
    family: PathFamily = field(default_factory=PathFamily)
    H: Optional[PlaneMap] = None
    base: Optional["LyapunovMetric"] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown metric mode {self.mode!r}")
        if self.mode == "E":
            if self.H is None or self.base is None:
                raise ConfigError("mode E needs a conjugator H and a base metric")
            object.__setattr__(self, "lam", self.base.lam)
        elif not self.lam > 1:
            raise ConfigError("lambda must exceed 1")

    def components(self, P, Q):
        """Vectorised (Ds, Du); non-finite values propagate silently."""
        P = np.asarray(P, dtype=float)
        Q = np.asarray(Q, dtype=float)
        lam = self.lam
        with np.errstate(over="ignore", invalid="ignore"):
            if self.mode in ("B", "C"):
                ln = math.log(lam)
                Ds = np.abs(np.exp(-ln * P[..., 0]) - np.exp(-ln * Q[..., 0])) / ln
                if self.mode == "C":
                    Du = np.abs(np.exp(ln * P[..., 0]) * P[..., 1]
                                - np.exp(ln * Q[..., 0]) * Q[..., 1])
                else:
                    lo = np.minimum(P[..., 0], Q[..., 0])
                    Du = np.exp(ln * lo) * np.abs(P[..., 1] - Q[..., 1])
                return Ds, Du
            if self.mode == "D":
                return np.abs(P[..., 1] - Q[..., 1]), np.abs(P[..., 0] - Q[..., 0])
            if self.mode == "E":
                return self.base.components(self.H.forward(P), self.H.forward(Q))
        return _mode_a_components(self, P, Q)

    def __call__(self, P, Q):
        Ds, Du = self.components(P, Q)
        return Ds + Du


def _mode_a_components(metric, P, Q):
    P, Q = np.broadcast_arrays(P, Q)
    Ds = np.empty(P.shape[:-1])
    Du = np.empty(P.shape[:-1])
    for idx in np.ndindex(*P.shape[:-1]):
        p, q = P[idx], Q[idx]
        Ds[idx] = path_infimum_numeric("stable", metric.lam, p, q, metric.family)
        Du[idx] = path_infimum_numeric("unstable", metric.lam, p, q, metric.family)
    return Ds, Du


def _check_finite(*vals):
    for v in vals:
        if not np.all(np.isfinite(v)) or np.any(np.abs(v) > OVERFLOW_LIMIT):
            raise Overflow("metric value left the representable range")


def eval_components(metric: LyapunovMetric, p, q):
    """(Ds, Du, U) for one pair of points."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.array_equal(p, q):
        return 0.0, 0.0, 0.0
    Ds, Du = metric.components(p, q)
    _check_finite(Ds, Du)
    return float(Ds), float(Du), float(Ds + Du)


# ---------------------------------------------------------------------------
# mode A: numeric infimum over piecewise-linear paths
# ---------------------------------------------------------------------------

def path_cost(weight: str, lam: float, pts) -> float:
    """Weighted length of the polygonal path through ``pts``.

    Each segment is integrated in closed form (the weight depends on x1 only
    and x1 is affine along a segment), so the result is the exact cost of the
    piecewise-linear path.
    """
    ln = math.log(lam)
    total = 0.0
    ax, ay = pts[0]
    if weight == "stable":
        for bx, by in pts[1:]:
            total += abs(math.exp(-ln * ax) - math.exp(-ln * bx))
            ax = bx
        return total / ln
    for bx, by in pts[1:]:
        dy = abs(by - ay)
        if dy:
            d = (bx - ax) * ln
            mean = math.exp(ln * ax) * (math.expm1(d) / d if d else 1.0)
            total += dy * mean
        ax, ay = bx, by
    return total


def _descend(x, cost, lo, hi, step, tol, cap):
    fx = cost(x)
    evals = 1
    while step > tol:
        improved = False
        for i in range(len(x)):
            for s in (step, -step):
                old = x[i]
                new = min(max(old + s, lo[i]), hi[i])
                if new == old:
                    continue
                x[i] = new
                f = cost(x)
                evals += 1
                if f < fx:
                    fx = f
                    improved = True
                    break
                x[i] = old
            if evals >= cap:
                return fx, evals, False
        if not improved:
            step *= 0.5
    return fx, evals, True


def path_infimum_numeric(weight: str, lam: float, p, q, family: PathFamily = PathFamily()) -> float:
    """Best weighted path cost from p to q found by coordinate descent.

    Control points live in the box spanned by p and q enlarged by
    ``family.detour`` on every side. Restart 0 starts from the straight
    segment; the others from seeded random control points.
    """
    if weight not in ("stable", "unstable"):
        raise ValueError("weight must be 'stable' or 'unstable'")
    if family.n_points < 2:
        raise ValueError("need at least two control points")
    if family.detour < 0:
        raise ValueError("detour bound must be non-negative")
    p = (float(p[0]), float(p[1]))
    q = (float(q[0]), float(q[1]))
    if p == q:
        return 0.0
    k = family.n_points - 2
    if k == 0:
        return path_cost(weight, lam, [p, q])
    M = family.detour
    box_lo = [min(p[0], q[0]) - M, min(p[1], q[1]) - M]
    box_hi = [max(p[0], q[0]) + M, max(p[1], q[1]) + M]
    lo = box_lo * k
    hi = box_hi * k

    def cost(x):
        pts = [p] + [(x[2 * i], x[2 * i + 1]) for i in range(k)] + [q]
        return path_cost(weight, lam, pts)

    rng = np.random.default_rng(family.seed)
    cap = max(family.budget // family.restarts, 1)
    extent = max(box_hi[0] - box_lo[0], box_hi[1] - box_lo[1])
    best = math.inf
    converged = 0
    for r in range(family.restarts):
        if r == 0:
            s = np.linspace(0, 1, k + 2)[1:-1]
            x = [v for t in s for v in (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))]
        else:
            x = list(rng.uniform(lo, hi))
        f, _, ok = _descend(x, cost, lo, hi, extent / 2, 1e-10 * max(extent, 1.0), cap)
        converged += ok
        best = min(best, f)
    if not converged:
        raise BudgetExceeded("coordinate descent did not stabilise within the budget")
    return best


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def check_pairing(metric: LyapunovMetric, fmap: PlaneMap) -> None:
    if metric.mode == "D":
        if base_kind(fmap) != "LinearHyperbolic":
            raise ConfigError("mode D is only defined for linear hyperbolic maps")
        inner = fmap
        while inner.kind == "Conjugated":
            inner = inner.parts[1]
        if not math.isclose(inner.params["lambda"], metric.lam):
            raise ConfigError("mode D lambda must match the map's lambda")


def scaling_check(metric: LyapunovMetric, fmap: PlaneMap, pairs):
    """Max relative deviations of Ds(f p, f q) = Ds/lam and Du(f p, f q) = lam Du."""
    pairs = np.asarray(pairs, dtype=float)
    P, Q = pairs[:, 0], pairs[:, 1]
    Ds, Du = metric.components(P, Q)
    Ds1, Du1 = metric.components(fmap.forward(P), fmap.forward(Q))
    lam = metric.lam
    dev_s = np.abs(Ds1 - Ds / lam) / np.maximum(Ds, EPS_REL)
    dev_u = np.abs(Du1 - lam * Du) / np.maximum(Du, EPS_REL)
    return float(dev_s.max()), float(dev_u.max())


def metric_axiom_scan(metric: LyapunovMetric, sample, tol: float = 1e-9) -> dict:
    """Symmetry and identity deviations plus the count of triangle violations."""
    S = np.asarray(sample, dtype=float)
    if len(S) < 3:
        raise ValueError("need at least three sample points")
    Umat = metric(S[:, None, :], S[None, :, :])
    sym = float(np.max(np.abs(Umat - Umat.T)))
    ident = float(np.max(np.abs(np.diag(Umat))))
    violations = 0
    for j in range(len(S)):
        # U(i,k) > U(i,j) + U(j,k)
        violations += int(np.count_nonzero(Umat > Umat[:, j:j + 1] + Umat[j:j + 1, :] + tol))
    return {"symmetry_dev": sym, "identity_dev": ident, "triangle_violations": violations}


# ---------------------------------------------------------------------------
# JSON form
# ---------------------------------------------------------------------------

def metric_from_spec(spec: dict) -> LyapunovMetric:
    if not isinstance(spec, dict):
        raise ConfigError("metric spec must be an object")
    mode = str(spec.get("mode", "C")).upper()
    if mode == "E":
        if "conjugator" not in spec or "base" not in spec:
            raise ConfigError("mode E needs 'conjugator' and 'base'")
        return LyapunovMetric("E", H=map_from_spec(spec["conjugator"]),
                              base=metric_from_spec(spec["base"]))
    fam = PathFamily(
        n_points=int(spec.get("N", PathFamily.n_points)),
        detour=float(spec.get("M", PathFamily.detour)),
        restarts=int(spec.get("restarts", PathFamily.restarts)),
        budget=int(spec.get("budget", PathFamily.budget)),
        seed=int(spec.get("seed", PathFamily.seed)),
    )
    return LyapunovMetric(mode, float(spec.get("lambda", 2.0)), fam)


def metric_to_spec(metric: LyapunovMetric) -> dict:
    if metric.mode == "E":
        return {"mode": "E", "conjugator": map_to_spec(metric.H), "base": metric_to_spec(metric.base)}
    out = {"mode": metric.mode, "lambda": metric.lam}
    if metric.mode == "A":
        f = metric.family
        out.update(N=f.n_points, M=f.detour, restarts=f.restarts, budget=f.budget, seed=f.seed)
    return out
