"""Command-line entry point: ``pedroute {routes,render,simulate,assign} SCENARIO``.

Every run writes its artifacts under ``--out-dir`` with fixed names, plus a
``manifest.json`` holding the effective parameters and seed.
Exit codes: 0 success, 1 runtime failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .assign import (AssignError, AssignParams, run_assignment, write_history_csv,
                     write_summary_json)
from .field import FieldError, band
from .regions import classify, extract_regions
from .render import plot_convergence, svg_routes, write_class_ppm, write_field_pgm, write_modulo_pgm
from .routes import DEFAULT_BAND_WIDTH, DEFAULT_MAX_DEPTH, RouteConfig, RouteError, build_routes, \
    filter_routes_for_origin
from .scenario import ScenarioError, load_scenario, validate
from .sim import SimError, SimParams, detour_flags, run_simulation, trace_routes

log = logging.getLogger("pedroute")

CONCENTRATED_DETOUR_LOAD = 0.01


class UsageError(Exception):
    """Bad input detected before any computation started (exit code 2)."""


def bundled_scenarios() -> dict:
    root = resources.files("pedroute") / "scenarios"
    return {p.name[:-5]: p for p in root.iterdir() if p.name.endswith(".json")}


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = bundled_scenarios()
    if path in bundled:
        return Path(str(bundled[path]))
    raise UsageError(f"scenario file not found: {path}")


# -- argument parsing --------------------------------------------------------
def _route_flags(ap):
    ap.add_argument("scenario", help="scenario JSON file or the name of a bundled example")
    ap.add_argument("--out-dir", default="out", help="artifact directory (default: %(default)s)")
    ap.add_argument("--destination", help="destination area id (default: first destination)")
    ap.add_argument("--origin", help="origin area id (default: first origin)")
    ap.add_argument("--band-width", type=float, default=DEFAULT_BAND_WIDTH, metavar="D",
                    help="band width d in meters (default: %(default)s)")
    ap.add_argument("--max-depth", type=int, default=DEFAULT_MAX_DEPTH)
    ap.add_argument("--scale", type=int, default=2, help="pixels per cell in raster renders")


def _sim_flags(ap):
    d = SimParams()
    ap.add_argument("--demand", type=float, default=d.demand, help="persons per hour")
    ap.add_argument("--seed", type=int, default=d.seed)
    ap.add_argument("--dt", type=float, default=d.dt)
    ap.add_argument("--duration", type=float, default=d.duration)
    ap.add_argument("--measure-window", type=float, nargs=2, default=list(d.measure_window),
                    metavar=("T0", "T1"))
    ap.add_argument("--v0-mean", type=float, default=d.v0_mean)
    ap.add_argument("--v0-sd", type=float, default=d.v0_sd)
    ap.add_argument("--rho-max", type=float, default=d.rho_max)
    ap.add_argument("--density-radius", type=float, default=d.density_radius)
    ap.add_argument("--routes", help="comma separated route ids to use (default: all kept for the origin)")
    ap.add_argument("--init", default="uniform",
                    help="uniform, concentrated, or comma separated probabilities")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pedroute", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("routes", help="extract intermediate destinations and routes")
    _route_flags(p)
    p.add_argument("--all", action="store_true", help="do not drop routes infeasible for the origin")

    p = sub.add_parser("render", help="write field, modulo, region and route renders")
    _route_flags(p)

    p = sub.add_parser("simulate", help="run one simulation with fixed route probabilities")
    _route_flags(p)
    _sim_flags(p)
    p.add_argument("--trajectory", action="store_true", help="also write trajectories.csv")
    p.add_argument("--trajectory-every", type=float, default=1.0, metavar="SECONDS")

    p = sub.add_parser("assign", help="iterate simulations toward equal route travel times")
    _route_flags(p)
    _sim_flags(p)
    a = AssignParams()
    p.add_argument("--delta", type=float, default=a.delta)
    p.add_argument("--epsilon", type=float, default=a.epsilon)
    p.add_argument("--damping", type=float, default=a.damping)
    p.add_argument("--stop-spread", type=float, default=a.stop_spread, metavar="SECONDS")
    p.add_argument("--max-iters", type=int, default=a.max_iters)
    p.add_argument("--scale-by-route-count", action=argparse.BooleanOptionalAction,
                   default=a.scale_by_route_count)
    p.add_argument("--replicates", type=int, default=1, help="simulations pooled per iteration")
    p.add_argument("--workers", type=int, default=None, help="processes for replicates")
    return ap


# -- shared setup ------------------------------------------------------------
def _setup_routes(args, filter_origin=True):
    path = _resolve(args.scenario)
    try:
        s = load_scenario(path)
    except ScenarioError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    problems = validate(s)
    if problems:
        raise UsageError(f"{path}: " + "; ".join(problems))
    try:
        dest = s.area(args.destination) if args.destination else s.destinations[0]
        origin = s.area(args.origin) if args.origin else s.origins[0]
    except KeyError as exc:
        raise UsageError(f"unknown area id {exc}") from exc
    try:
        cfg = RouteConfig(args.band_width, args.max_depth)
        rs = build_routes(s, dest, cfg)
    except (RouteError, FieldError) as exc:
        raise UsageError(str(exc)) from exc
    if filter_origin:
        rs = filter_routes_for_origin(rs, origin, s)
    for w in rs.warnings:
        log.warning(w)
    return path, s, origin, cfg, rs


def _pick_routes(args, rs):
    if not args.routes:
        return list(rs.routes)
    try:
        ids = [int(x) for x in args.routes.split(",")]
        return [rs.route(i) for i in ids]
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad --routes {args.routes!r}: {exc}") from exc


def initial_probs(choice: str, n: int, detours=None) -> np.ndarray:
    """``uniform``, ``concentrated`` (1% on each detour, the rest split over
    the shortest routes) or an explicit comma separated list."""
    if choice == "uniform":
        return np.full(n, 1.0 / n)
    if choice == "concentrated":
        detours = np.asarray(detours, dtype=bool)
        if detours.all() or not detours.any():
            return np.full(n, 1.0 / n)
        p = np.where(detours, CONCENTRATED_DETOUR_LOAD, 0.0)
        p[~detours] = (1.0 - p.sum()) / (~detours).sum()
        return p
    try:
        p = np.array([float(x) for x in choice.split(",")])
    except ValueError as exc:
        raise UsageError(f"bad --init {choice!r}") from exc
    if len(p) != n or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise UsageError(f"--init needs {n} non-negative probabilities summing to 1, got {choice!r}")
    return p


def _sim_params(args) -> SimParams:
    try:
        return SimParams(dt=args.dt, v0_mean=args.v0_mean, v0_sd=args.v0_sd, rho_max=args.rho_max,
                         density_radius=args.density_radius, demand=args.demand,
                         duration=args.duration, measure_window=tuple(args.measure_window),
                         seed=args.seed)
    except SimError as exc:
        raise UsageError(str(exc)) from exc


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out: Path, args, path, extra: dict):
    doc = {
        "tool": "pedroute",
        "version": __version__,
        "command": args.command,
        "scenario": str(path),
        "scenario_sha256": _sha256(path),
        "route_config": {"band_width": args.band_width, "max_depth": args.max_depth,
                         "destination": args.destination, "origin": args.origin},
    }
    doc.update(extra)
    (out / "manifest.json").write_text(json.dumps(doc, indent=1, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer, np.floating)):
        return o.item()
    raise TypeError(type(o).__name__)


def _renders(out: Path, s, rs, cfg, scale, modulo=True, routes=None):
    root = rs.fields[rs.destination]
    graph = extract_regions(band(root, cfg.d))
    classes = classify(graph)
    write_field_pgm(root, out / "field.pgm", scale)
    if modulo:
        write_modulo_pgm(root, cfg.d, out / "modulo.pgm", scale)
    write_class_ppm(graph, classes, out / "regions.ppm", s.obstacle, scale)
    paths = trace_routes(s, rs, routes)
    (out / "routes.svg").write_text(svg_routes(s, rs, paths))
    return graph, classes


# -- subcommands --------------------------------------------------------------
def cmd_routes(args) -> int:
    path, s, origin, cfg, rs = _setup_routes(args, filter_origin=not args.all)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "routes.json").write_text(rs.to_json() + "\n")
    _renders(out, s, rs, cfg, args.scale, modulo=False)
    _write_manifest(out, args, path, {"origin_filter": not args.all})
    n = len(rs)
    print(f"{n} route" + ("" if n == 1 else "s"))
    for r in rs.routes:
        print(f"route {r.id}: " + " -> ".join(list(r.legs) + [rs.destination]))
    return 0


def cmd_render(args) -> int:
    path, s, origin, cfg, rs = _setup_routes(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph, classes = _renders(out, s, rs, cfg, args.scale)
    _write_manifest(out, args, path, {"scale": args.scale})
    print(f"{len(graph.regions)} band regions, "
          f"{sum(c.value == 'critical' for c in classes.values())} critical; renders in {out}")
    return 0


def _prepare_sim(args):
    path, s, origin, cfg, rs = _setup_routes(args)
    routes = _pick_routes(args, rs)
    sp = _sim_params(args)
    detours = None
    if args.init == "concentrated":
        detours, _ = detour_flags(s, rs, routes)
    probs = initial_probs(args.init, len(routes), detours)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return path, s, origin, rs, routes, sp, probs, detours, out


def cmd_simulate(args) -> int:
    path, s, origin, rs, routes, sp, probs, _, out = _prepare_sim(args)
    traj = out / "trajectories.csv" if args.trajectory else None
    res = run_simulation(s, rs, probs, sp, origin=origin, routes=routes, trajectory_path=traj,
                         trajectory_every=args.trajectory_every)
    doc = {
        "route_ids": [r.id for r in routes],
        "probs": probs,
        "counts": res.counts,
        "mean_tt_s": [None if np.isnan(x) else float(x) for x in res.mean_tt],
        "sd_tt_s": [None if np.isnan(x) else float(x) for x in res.sd_tt],
        "weighted_mean_tt_s": None if np.isnan(res.weighted_mean) else res.weighted_mean,
        "weighted_sd_tt_s": None if np.isnan(res.weighted_sd) else res.weighted_sd,
        "spawned": res.spawned, "arrived": res.arrived, "removed": res.removed,
    }
    (out / "simulation.json").write_text(json.dumps(doc, indent=1, default=_jsonable) + "\n")
    _write_manifest(out, args, path, {"sim_params": asdict(sp), "seed": sp.seed, "init": args.init,
                                      "init_probs": probs, "route_ids": [r.id for r in routes]})
    print(f"{res.arrived} of {res.spawned} arrived, {res.total} in the window, "
          f"weighted mean {res.weighted_mean:.2f} s")
    return 0


def cmd_assign(args) -> int:
    try:
        ap = AssignParams(args.delta, args.epsilon, args.damping, args.stop_spread, args.max_iters,
                          args.scale_by_route_count)
    except AssignError as exc:
        raise UsageError(str(exc)) from exc
    if args.replicates < 1:
        raise UsageError("--replicates must be >= 1")
    path, s, origin, rs, routes, sp, probs, detours, out = _prepare_sim(args)
    try:
        ap.check_route_count(len(routes))
    except AssignError as exc:
        raise UsageError(str(exc)) from exc
    hist = run_assignment(s, rs, probs, sp, ap, routes=routes, replicates=args.replicates)
    write_history_csv(hist, out / "history.csv")
    write_summary_json(hist, ap, out / "summary.json")
    plot_convergence({args.init: hist}, out / "convergence.png")
    _write_manifest(out, args, path, {
        "sim_params": asdict(sp), "assign_params": asdict(ap), "seed": sp.seed,
        "replicates": args.replicates, "init": args.init, "init_probs": probs,
        "route_ids": [r.id for r in routes],
        "detours": None if detours is None else [bool(x) for x in detours],
    })
    print(f"stopped after {len(hist.records)} iterations: {hist.reason}")
    for rid, p in zip(hist.route_ids, hist.final_probs):
        print(f"route {rid}: {p:.4f}")
    print(f"weighted mean {hist.final.weighted_mean:.2f} s, SD {hist.final.weighted_sd:.2f} s")
    return 0


COMMANDS = {"routes": cmd_routes, "render": cmd_render, "simulate": cmd_simulate, "assign": cmd_assign}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"pedroute: error: {exc}", file=sys.stderr)
        return 2
    except (AssignError, SimError, RouteError, FieldError, OSError) as exc:
        print(f"pedroute: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
