"""Empirical check that |V(x,y) - V(x,z)| / W(x,y) vanishes as x recedes.

The scan places x on spheres of increasing radius, either Euclidean or in the
metric U itself (U(x, 0) = R), and takes the supremum of the ratio over pairs
(y, z) drawn from a compact sample C.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .differences import V_values, W_values, sphere_points
from .errors import NonPositiveW
from .geometry import as_point
from .maps import PlaneMap
from .metrics import LyapunovMetric

W_FLOOR = 1e-12
DEFAULT_THRESHOLD = 0.05


def unit_square_grid(n: int = 5) -> np.ndarray:
    g = np.linspace(0.0, 1.0, n)
    X, Y = np.meshgrid(g, g)
    return np.column_stack([X.ravel(), Y.ravel()])


@dataclass
class HPScanConfig:
    C: np.ndarray = field(default_factory=unit_square_grid)
    radii: tuple = (10.0, 20.0, 40.0, 80.0)
    radius_notion: str = "MetricU"
    directions: int = 64
    angles: tuple | None = None
    pair_budget: int | None = None
    seed: int = 0
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if len(self.C) == 0:
            raise ValueError("C must be non-empty")
        r = np.asarray(self.radii, dtype=float)
        if len(r) == 0 or np.any(np.diff(r) <= 0):
            raise ValueError("radii must be strictly increasing")
        if self.radius_notion not in ("Euclidean", "MetricU"):
            raise ValueError("radius_notion must be 'Euclidean' or 'MetricU'")

    def thetas(self) -> np.ndarray:
        if self.angles is not None:
            return np.asarray(self.angles, dtype=float)
        return 2 * np.pi * np.arange(self.directions) / self.directions

    def to_json(self) -> dict:
        return {
            "C": self.C.tolist(),
            "radii": [float(r) for r in self.radii],
            "radius_notion": self.radius_notion,
            "directions": self.directions,
            "angles": None if self.angles is None else [float(a) for a in self.angles],
            "pair_budget": self.pair_budget,
            "seed": self.seed,
            "threshold": self.threshold,
        }


@dataclass
class HPScanReport:
    radii: list
    sup_ratios: list
    witnesses: list  # (x, y, z) per radius, None when nothing was sampled
    excluded: list
    unreachable: list
    verdict: str
    threshold: float

    def to_json(self) -> dict:
        rows = []
        for r, s, w, e, u in zip(self.radii, self.sup_ratios, self.witnesses, self.excluded,
                                 self.unreachable):
            rows.append({
                "radius": r,
                "sup_ratio": s,
                "x": None if w is None else list(w[0]),
                "y": None if w is None else list(w[1]),
                "z": None if w is None else list(w[2]),
                "nonpositive_w_excluded": e,
                "unreachable_directions": u,
            })
        return {"rows": rows, "verdict": self.verdict, "threshold": self.threshold}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("radius,sup_ratio,x1,x2\n")
            for r, s, w in zip(self.radii, self.sup_ratios, self.witnesses):
                x1, x2 = (w[0] if w is not None else (float("nan"),) * 2)
                fh.write(f"{r!r},{s!r},{x1!r},{x2!r}\n")


def hp_ratio(metric: LyapunovMetric, fmap: PlaneMap, x, y, z) -> float:
    x, y, z = (np.array(as_point(v)) for v in (x, y, z))
    W = float(W_values(metric, fmap, x, y))
    if not W > W_FLOOR:
        raise NonPositiveW(W)
    V = V_values(metric, fmap, np.stack([x, x]), np.stack([y, z]))
    return float(abs(V[0] - V[1]) / W)


def numerator_bound(metric: LyapunovMetric, y, z) -> np.ndarray:
    """(lam - 1) Du(z, y) + (1 - 1/lam) Ds(z, y)."""
    Ds, Du = metric.components(np.asarray(z, float), np.asarray(y, float))
    lam = metric.lam
    return (lam - 1) * Du + (1 - 1 / lam) * Ds


def _centres(metric, config, R):
    th = config.thetas()
    if config.radius_notion == "Euclidean":
        return R * np.column_stack([np.cos(th), np.sin(th)]), np.ones(len(th), dtype=bool)
    return sphere_points(metric, (0.0, 0.0), R, th)


def _pairs(config):
    n = len(config.C)
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    I, J = I.ravel(), J.ravel()
    if config.pair_budget is not None and len(I) > config.pair_budget:
        pick = np.sort(np.random.default_rng(config.seed).choice(len(I), config.pair_budget,
                                                                 replace=False))
        I, J = I[pick], J[pick]
    return I, J


def hp_scan(metric: LyapunovMetric, fmap: PlaneMap, config: HPScanConfig) -> HPScanReport:
    C = config.C
    I, J = _pairs(config)
    sups, wits, excl, unreach = [], [], [], []
    for R in config.radii:
        X, ok = _centres(metric, config, float(R))
        unreach.append(int((~ok).sum()))
        X = X[ok]
        best, wit, bad = -np.inf, None, 0
        if len(X):
            Xb = X[:, None, :]
            Vyz = V_values(metric, fmap, Xb, C[None, :, :])       # (nx, nC)
            Wy = W_values(metric, fmap, Xb, C[None, :, :])
            num = np.abs(Vyz[:, I] - Vyz[:, J])
            den = Wy[:, I]
            good = den > W_FLOOR
            bad = int((~good).sum())
            ratio = np.where(good, num / np.where(good, den, 1.0), -np.inf)
            a, b = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
            best = float(ratio[a, b])
            if np.isfinite(best):
                wit = (tuple(map(float, X[a])), tuple(map(float, C[I[b]])),
                       tuple(map(float, C[J[b]])))
        sups.append(best if np.isfinite(best) else float("nan"))
        wits.append(wit)
        excl.append(bad)
    s = np.array(sups)
    decaying = bool(np.all(np.isfinite(s)) and np.all(np.diff(s) <= 0) and s[-1] < config.threshold)
    return HPScanReport([float(r) for r in config.radii], [float(v) for v in s], wits, excl,
                        unreach, "Decaying" if decaying else "NotDecaying", config.threshold)


def config_from_spec(spec: dict) -> HPScanConfig:
    spec = dict(spec or {})
    if "C" in spec:
        C = spec["C"]
    else:
        C = unit_square_grid(int(spec.get("C_grid", 5)))
    return HPScanConfig(
        C=C,
        radii=tuple(spec.get("radii", (10.0, 20.0, 40.0, 80.0))),
        radius_notion=spec.get("radius_notion", "MetricU"),
        directions=int(spec.get("directions", 64)),
        angles=None if spec.get("angles") is None else tuple(spec["angles"]),
        pair_budget=spec.get("pair_budget"),
        seed=int(spec.get("seed", 0)),
        threshold=float(spec.get("threshold", DEFAULT_THRESHOLD)),
    )


def report_json(report: HPScanReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True)
