"""Invertible plane maps with closed-form inverses.

Every map acts on arrays of shape ``(..., 2)``; scalars go through
:func:`evaluate`, which also enforces the iteration budget and the overflow
threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BudgetExceeded, ConfigError, Overflow
from .geometry import Point, as_point

OVERFLOW_LIMIT = 1e300
ITERATION_BUDGET = 10_000

Array = np.ndarray


@dataclass(frozen=True)
class PlaneMap:
    forward: Callable[[Array], Array]
    inverse: Callable[[Array], Array]
    kind: str
    params: dict = field(default_factory=dict)
    orientation_preserving: bool = True
    # nested maps for Composition / Conjugated
    parts: tuple = ()

    def __call__(self, P):
        return self.forward(np.asarray(P, dtype=float))

    def inv(self, P):
        return self.inverse(np.asarray(P, dtype=float))

    def power(self, P, n: int):
        """Vectorised f^n without overflow checks (inf/nan propagate)."""
        P = np.asarray(P, dtype=float)
        step = self.forward if n >= 0 else self.inverse
        for _ in range(abs(n)):
            P = step(P)
        return P

    @property
    def lam(self):
        return self.params.get("lambda")

    def __repr__(self):
        return f"PlaneMap({self.kind}, {self.params})"


def translation(v=(1.0, 0.0)) -> PlaneMap:
    v = np.array(v, dtype=float)

    def fwd(P):
        return P + v

    def inv(P):
        return P - v

    return PlaneMap(fwd, inv, "Translation", {"v": [float(v[0]), float(v[1])]})


def identity() -> PlaneMap:
    return translation((0.0, 0.0))


def linear_hyperbolic(lam: float = 2.0) -> PlaneMap:
    """diag(lam, 1/lam): x1 is expanded, x2 contracted."""
    if not lam > 1:
        raise ValueError("lambda must exceed 1")
    scale = np.array([lam, 1.0 / lam])

    def fwd(P):
        return P * scale

    def inv(P):
        return P / scale

    return PlaneMap(fwd, inv, "LinearHyperbolic", {"lambda": float(lam)})


def shear(a: float = 0.5) -> PlaneMap:
    """H(x, y) = (x, y + a sin x)."""

    def fwd(P):
        out = np.array(P, dtype=float, copy=True)
        out[..., 1] += a * np.sin(P[..., 0])
        return out

    def inv(P):
        out = np.array(P, dtype=float, copy=True)
        out[..., 1] -= a * np.sin(P[..., 0])
        return out

    return PlaneMap(fwd, inv, "ExplicitPair", {"name": "shear", "a": float(a)})


def explicit_pair(forward, inverse, orientation_preserving=True, **params) -> PlaneMap:
    return PlaneMap(forward, inverse, "ExplicitPair", dict(params),
                    orientation_preserving=orientation_preserving)


def compose(*maps: PlaneMap) -> PlaneMap:
    """compose(f, g) = f o g (g applied first)."""
    if not maps:
        return identity()

    def fwd(P):
        for m in reversed(maps):
            P = m.forward(P)
        return P

    def inv(P):
        for m in maps:
            P = m.inverse(P)
        return P

    return PlaneMap(fwd, inv, "Composition", {}, all(m.orientation_preserving for m in maps),
                    parts=tuple(maps))


def conjugate(H: PlaneMap, base: PlaneMap) -> PlaneMap:
    """H^-1 o base o H."""

    def fwd(P):
        return H.inverse(base.forward(H.forward(P)))

    def inv(P):
        return H.inverse(base.inverse(H.forward(P)))

    return PlaneMap(fwd, inv, "Conjugated", {}, base.orientation_preserving, parts=(H, base))


def evaluate(fmap: PlaneMap, p, n: int, budget: int = ITERATION_BUDGET) -> Point:
    """f^n(p); negative n iterates the inverse."""
    if abs(n) > budget:
        raise BudgetExceeded(f"|n|={abs(n)} exceeds iteration budget {budget}")
    P = np.array(as_point(p), dtype=float)
    step = fmap.forward if n >= 0 else fmap.inverse
    for i in range(abs(n)):
        P = step(P)
        if not np.all(np.isfinite(P)) or np.any(np.abs(P) > OVERFLOW_LIMIT):
            raise Overflow(f"orbit left the representable range after {i + 1} steps")
    return Point(float(P[0]), float(P[1]))


def orbit(fmap: PlaneMap, p, n0: int, n1: int) -> list:
    """OrbitSegment samples [(n, f^n(p)) for n0 <= n <= n1]."""
    start = evaluate(fmap, p, n0)
    out = [(n0, start)]
    P = np.array(start)
    for n in range(n0 + 1, n1 + 1):
        P = fmap.forward(P)
        if not np.all(np.isfinite(P)) or np.any(np.abs(P) > OVERFLOW_LIMIT):
            raise Overflow(f"orbit left the representable range at n={n}")
        out.append((n, Point(float(P[0]), float(P[1]))))
    return out


def roundtrip_check(fmap: PlaneMap, sample) -> float:
    P = np.atleast_2d(np.asarray(sample, dtype=float))
    if len(P) == 0:
        raise ValueError("empty sample")
    back = fmap.inverse(fmap.forward(P))
    return float(np.max(np.hypot(*(back - P).T)))


def grid(box, resolution: float) -> np.ndarray:
    """Nodes of the lattice with the given spacing covering ``box``."""
    x0, x1, y0, y1 = box
    nx = int(round((x1 - x0) / resolution)) + 1
    ny = int(round((y1 - y0) / resolution)) + 1
    X, Y = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny))
    return np.column_stack([X.ravel(), Y.ravel()])


def fixed_point_free_scan(fmap: PlaneMap, box=(-32.0, 32.0, -32.0, 32.0),
                          resolution: float = 0.5) -> float:
    """Minimum displacement |f(p) - p| over a grid; a sampling certificate only."""
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    P = grid(box, resolution)
    return float(np.min(np.hypot(*(fmap.forward(P) - P).T)))


_BUILDERS = {
    "translation": lambda p: translation(p.get("v", (1.0, 0.0))),
    "identity": lambda p: identity(),
    "linear_hyperbolic": lambda p: linear_hyperbolic(p.get("lambda", 2.0)),
    "shear": lambda p: shear(p.get("a", 0.5)),
}


def map_from_spec(spec: dict) -> PlaneMap:
    """Build a map from ``{"kind", "params", "conjugator"}``.

    ``kind`` may also be ``"composition"`` with ``params.maps`` a list of specs,
    applied right to left.
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("map spec must be an object with a 'kind'")
    kind = spec["kind"].lower()
    params = spec.get("params", {}) or {}
    if kind == "composition":
        base = compose(*(map_from_spec(s) for s in params.get("maps", [])))
    elif kind in _BUILDERS:
        base = _BUILDERS[kind](params)
    else:
        raise ConfigError(f"unknown map kind {spec['kind']!r}")
    if spec.get("conjugator"):
        return conjugate(map_from_spec(spec["conjugator"]), base)
    return base


def map_to_spec(fmap: PlaneMap) -> dict:
    if fmap.kind == "Translation":
        return {"kind": "translation", "params": {"v": fmap.params["v"]}}
    if fmap.kind == "LinearHyperbolic":
        return {"kind": "linear_hyperbolic", "params": {"lambda": fmap.params["lambda"]}}
    if fmap.kind == "ExplicitPair" and fmap.params.get("name") == "shear":
        return {"kind": "shear", "params": {"a": fmap.params["a"]}}
    if fmap.kind == "Conjugated":
        H, base = fmap.parts
        out = map_to_spec(base)
        out["conjugator"] = map_to_spec(H)
        return out
    if fmap.kind == "Composition":
        return {"kind": "composition", "params": {"maps": [map_to_spec(m) for m in fmap.parts]}}
    raise ConfigError(f"map {fmap!r} has no JSON form")


def base_kind(fmap: PlaneMap) -> str:
    """Kind of the innermost dynamics (looks through conjugations)."""
    while fmap.kind == "Conjugated":
        fmap = fmap.parts[1]
    return fmap.kind
