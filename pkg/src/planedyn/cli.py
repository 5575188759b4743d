"""Command line entry point: ``planedyn <command> --config run.json``.

Every command reads one JSON config holding the map, the metric, a seed and
an optional section per command (named after the command with dashes
replaced by underscores). Reports go to ``--out`` (default: the config's
``output_dir`` or the current directory) and the main JSON is echoed to
stdout. Exit codes: 0 success, 1 usage or config error, 2 contract violation.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import hp, svg
from .differences import expansiveness_certificate, first_difference, sphere_sign_probe
from .errors import (BudgetExceeded, ConfigError, EmptyComponent, Inconclusive, InvariantLeaf,
                     LeafLost, NonPositiveW, NotConverging, PlaneDynError, ProbeFailed)
from .geometry import write_points_csv
from .invariant_sets import k_stable_component, trace_leaf, write_leaf
from .maps import map_from_spec
from .metrics import check_pairing, eval_components, metric_axiom_scan, metric_from_spec
from .reports import config_hash, write_json
from .translation import (build_fundamental_domain, coverage_scan, separation_trichotomy,
                          square_grid, translation_pipeline)

EXIT_OK, EXIT_USAGE, EXIT_CONTRACT = 0, 1, 2

CONTRACT_ERRORS = (ProbeFailed, NonPositiveW, LeafLost, EmptyComponent, Inconclusive,
                   InvariantLeaf, NotConverging, BudgetExceeded)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _point(text: str):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x1,x2', got {text!r}")
    return [a, b]


def load_config(path) -> dict:
    import json
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}")
    if not isinstance(cfg, dict) or "map" not in cfg or "metric" not in cfg:
        raise UsageError("config needs 'map' and 'metric' objects")
    return cfg


class Run:
    """Parsed config plus output plumbing for one command."""

    def __init__(self, cfg: dict, command: str, out: Path):
        self.cfg = cfg
        self.command = command
        self.out = out
        self.fmap = map_from_spec(cfg["map"])
        self.metric = metric_from_spec(cfg["metric"])
        check_pairing(self.metric, self.fmap)
        self.seed = int(cfg.get("seed", 0))
        self.section = dict(cfg.get(command.replace("-", "_"), {}))
        self.hash = config_hash(cfg)

    def get(self, key, default=None):
        return self.section.get(key, default)

    def path(self, name) -> Path:
        return self.out / name

    def report(self, name: str, body: dict) -> str:
        body = dict(body, command=self.command)
        return write_json(self.path(name), body, self.hash)


def cmd_metric_eval(run: Run, args):
    pairs = run.get("pairs")
    if pairs is None:
        rng = np.random.default_rng(run.seed)
        lo, hi = run.get("range", [-8.0, 8.0])
        pairs = rng.uniform(lo, hi, size=(int(run.get("n", 100)), 2, 2))
    pairs = np.asarray(pairs, float)
    with open(run.path("metric_eval.csv"), "w", newline="") as fh:
        fh.write("p1,p2,q1,q2,Ds,Du,U\n")
        for p, q in pairs:
            Ds, Du, U = eval_components(run.metric, p, q)
            fh.write(",".join(repr(float(v)) for v in (*p, *q, Ds, Du, U)) + "\n")
    return {"pairs": len(pairs), "csv": "metric_eval.csv"}, EXIT_OK


def cmd_axiom_scan(run: Run, args):
    sample = run.get("sample")
    if sample is None:
        rng = np.random.default_rng(run.seed)
        box = run.get("box", [-4.0, 4.0, -4.0, 4.0])
        n = int(run.get("n", 40))
        sample = np.column_stack([rng.uniform(box[0], box[1], n), rng.uniform(box[2], box[3], n)])
    res = metric_axiom_scan(run.metric, sample, float(run.get("tol", 1e-9)))
    return dict(res, sample_size=len(sample)), EXIT_OK


def cmd_sign_probe(run: Run, args):
    x = args.x or run.get("x", [0.0, 0.0])
    k = args.k if args.k is not None else float(run.get("k", 1.0))
    res = sphere_sign_probe(run.metric, run.fmap, x, k, int(run.get("directions", 720)))
    return res.to_json(), EXIT_OK


def cmd_expansive_cert(run: Run, args):
    x = args.x or run.get("x", [0.0, 0.0])
    y = run.get("y", [0.5, 0.5])
    k = args.k if args.k is not None else float(run.get("k", 10.0))
    n = expansiveness_certificate(run.metric, run.fmap, x, y, k, int(run.get("budget", 10_000)))
    V = first_difference(run.metric, run.fmap, x, y)
    return {"x": x, "y": y, "k": k, "n": n, "V": V}, EXIT_OK


def cmd_stable_set(run: Run, args):
    x = args.x or run.get("x", [0.0, 1.0])
    k = args.k if args.k is not None else float(run.get("k", 1.0))
    box = tuple(run.get("box", [-3.0, 3.0, -3.0, 3.0]))
    comp = k_stable_component(run.metric, run.fmap, x, k, int(run.get("n_max", 40)), box,
                              float(run.get("h", 0.05)), run.get("direction", "forward"))
    fld = comp.field
    fld.to_csv(run.path("stable_set.csv"))
    svg.heatmap_svg(run.path("stable_set.svg"), fld.xs, fld.ys, fld.values,
                    title=f"escape times, k={k:g}")
    return {"x": x, "k": k, "n_max": fld.n_max, "direction": fld.direction, "box": list(box),
            "h": fld.h, "component_nodes": len(comp), "bounded_nodes": int((fld.values == -1).sum()),
            "csv": "stable_set.csv"}, EXIT_OK


def _trace_params(run: Run):
    return dict(k=float(run.get("k", 1.0)), n_max=int(run.get("n_max", 40)),
                step=float(run.get("step", 0.05)),
                window=tuple(run.get("window", [-12.0, 12.0, -12.0, 12.0])))


def cmd_trace_leaf(run: Run, args):
    x = args.x or run.get("x", [0.0, 1.0])
    p = _trace_params(run)
    if args.k is not None:
        p["k"] = args.k
    leaf = trace_leaf(run.metric, run.fmap, x, run.get("stability", "stable"),
                      budget=float(run.get("budget", 256.0)), **p)
    write_leaf(leaf, run.path("leaf.csv"))
    svg.curves_svg(run.path("leaf.svg"), [leaf.vertices], p["window"],
                   title=f"{leaf.stability} leaf through ({x[0]:g}, {x[1]:g})")
    return dict(leaf.truncation(), csv="leaf.csv"), EXIT_OK


def cmd_hp_scan(run: Run, args):
    config = hp.config_from_spec(dict(run.section, seed=run.section.get("seed", run.seed)))
    rep = hp.hp_scan(run.metric, run.fmap, config)
    rep.to_csv(run.path("hp_scan.csv"))
    svg.decay_svg(run.path("hp_scan.svg"), rep.radii, rep.sup_ratios, rep.threshold)
    body = dict(rep.to_json(), config=config.to_json())
    return body, EXIT_OK if rep.verdict == "Decaying" else EXIT_CONTRACT


def _probe_first(run: Run, seed):
    # the translation machinery presumes a valid Lyapunov pairing
    probe = sphere_sign_probe(run.metric, run.fmap, seed, float(run.get("probe_k", 1.0)))
    return probe.to_json()


def cmd_domain(run: Run, args):
    seed = args.x or run.get("seed_point", [0.0, 1.0])
    probe = _probe_first(run, seed)
    p = _trace_params(run)
    stability = run.get("stability", "stable")
    leaf = trace_leaf(run.metric, run.fmap, seed, stability, budget=256.0, **p)
    body = {"probe": probe, "leaf": leaf.truncation()}
    try:
        rep = separation_trichotomy(leaf, run.fmap)
    except InvariantLeaf:
        body["trichotomy"] = "InvariantLeaf"
        return body, EXIT_CONTRACT
    body["trichotomy"] = rep.to_json()
    if rep.separator != "leaf":
        return body, EXIT_CONTRACT
    D = build_fundamental_domain(leaf, run.fmap, rep)
    box = run.get("coverage_box", [-10.0, 10.0, -10.0, 10.0])
    cov = coverage_scan(D, run.fmap, square_grid(box, int(run.get("coverage_n", 41))),
                        int(run.get("orbit_budget", 16)))
    body["coverage"] = cov.to_json()
    body["covers_grid"] = cov.complete
    miss = np.array(cov.witnesses).reshape(-1, 2)
    svg.curves_svg(run.path("domain.svg"), [D.lower.vertices, D.upper.vertices], box,
                   title="fundamental domain and NotCovered samples", points=(miss, "#999999"))
    return body, EXIT_OK


def cmd_conjugacy(run: Run, args):
    seed = args.x or run.get("seed_point", [0.0, 1.0])
    probe = _probe_first(run, seed)
    p = _trace_params(run)
    chart_box = tuple(run.get("chart_box", [-5.0, 5.0, -5.0, 5.0]))
    chart_n = int(run.get("chart_n", 21))
    rep = translation_pipeline(
        run.metric, run.fmap, seed, **p, orbit_budget=int(run.get("orbit_budget", 16)),
        coverage_box=tuple(run.get("coverage_box", [-10.0, 10.0, -10.0, 10.0])),
        coverage_n=int(run.get("coverage_n", 41)), chart_box=chart_box, chart_n=chart_n,
        limit_budget=int(run.get("limit_budget", 8)), arc_budget=float(run.get("arc_budget", 8.0)))
    body = dict(rep.to_json(), probe=probe)
    curves = []
    if rep.limit_leaf is not None:
        curves.append((rep.limit_leaf.vertices, svg.PALETTE[2]))
    if rep.domain is not None:
        curves += [(rep.domain.lower.vertices, svg.PALETTE[0]),
                   (rep.domain.upper.vertices, svg.PALETTE[1])]
    if rep.chart is not None:
        P = square_grid(chart_box, chart_n)
        Hp = rep.chart.evaluate(P)
        write_points_csv(run.path("conjugacy.csv"), np.column_stack([P, Hp]),
                         header=("x1", "x2", "h1", "h2"))
        body["chart"] = rep.chart.to_json()
        body["csv"] = "conjugacy.csv"
    miss = np.array(rep.stable_witnesses).reshape(-1, 2)
    svg.curves_svg(run.path("conjugacy.svg"), curves,
                   run.get("coverage_box", [-10.0, 10.0, -10.0, 10.0]),
                   title=f"translation structure: {rep.verdict}", points=(miss, "#999999"))
    return body, EXIT_OK if rep.verdict == "Conjugated" else EXIT_CONTRACT


COMMANDS = {
    "metric-eval": (cmd_metric_eval, "evaluate Ds, Du, U on point pairs (CSV)"),
    "axiom-scan": (cmd_axiom_scan, "symmetry, identity and triangle-inequality scan"),
    "sign-probe": (cmd_sign_probe, "find both signs of V on a U-sphere"),
    "expansive-cert": (cmd_expansive_cert, "iterate at which an orbit pair separates beyond k"),
    "stable-set": (cmd_stable_set, "escape-time field and k-stable component (CSV + SVG)"),
    "trace-leaf": (cmd_trace_leaf, "trace a stable or unstable leaf (CSV + SVG)"),
    "hp-scan": (cmd_hp_scan, "decay scan of the HP ratio (JSON + CSV + SVG)"),
    "domain": (cmd_domain, "separation trichotomy, fundamental domain and coverage"),
    "conjugacy": (cmd_conjugacy, "full translation pipeline, chart and residuals"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="planedyn", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=True, help="JSON run config (map, metric, seed, ...)")
        p.add_argument("--out", default=None, help="output directory (created if missing)")
        p.add_argument("--x", type=_point, default=None,
                       help="base point 'x1,x2' (seed point for domain/conjugacy)")
        p.add_argument("--k", type=float, default=None, help="radius / stability threshold")
    return parser


def run(command: str, cfg: dict, out, args=None) -> tuple[int, str]:
    """Execute one command; returns (exit code, JSON text)."""
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r}")
    if args is None:
        args = argparse.Namespace(x=None, k=None)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    r = Run(cfg, command, out)
    fn = COMMANDS[command][0]
    name = command.replace("-", "_") + ".json"
    try:
        body, code = fn(r, args)
    except CONTRACT_ERRORS as exc:
        body = {"error": type(exc).__name__, "message": str(exc)}
        code = EXIT_CONTRACT
    body["exit_code"] = code
    return code, r.report(name, body)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = args.out or cfg.get("output_dir", ".")
        code, text = run(args.command, cfg, out, args)
    except (UsageError, ConfigError, ValueError, KeyError) as exc:
        print(f"planedyn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PlaneDynError as exc:
        print(f"planedyn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
