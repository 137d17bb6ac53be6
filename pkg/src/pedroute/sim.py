"""Time-stepped pedestrian microsimulation on guidance fields.

Agents walk along the negative gradient of the distance map of their current
leg and slow down linearly with the local density. It is deliberately much
simpler than a social-force model: the assignment loop only needs travel
times that react to congestion.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .field import gradient_grid

_ROTATIONS = [s * math.radians(a) for a in range(15, 91, 15) for s in (1, -1)]


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.1
    v0_mean: float = 1.34
    v0_sd: float = 0.26
    rho_max: float = 5.4
    density_radius: float = 1.0
    demand: float = 5000.0  # persons per hour
    duration: float = 900.0
    measure_window: tuple = (300.0, 900.0)
    seed: int = 42

    def __post_init__(self):
        t0, t1 = self.measure_window
        if not self.dt > 0:
            raise SimError("dt must be positive")
        if not self.rho_max > 0:
            raise SimError("rho_max must be positive")
        if self.density_radius <= 0:
            raise SimError("density_radius must be positive")
        if self.demand < 0:
            raise SimError("demand must be non-negative")
        if not t0 < t1 <= self.duration:
            raise SimError(f"measure window {self.measure_window} must satisfy t_start < t_end <= duration")


@dataclass(frozen=True)
class Spawn:
    time: float
    cell: tuple
    route: int  # index into the probability vector
    free_speed: float


@dataclass
class SimResult:
    counts: np.ndarray
    mean_tt: np.ndarray  # NaN where a route had no completed trip in the window
    sd_tt: np.ndarray
    weighted_mean: float
    weighted_sd: float
    spawned: int = 0
    arrived: int = 0
    removed: int = 0  # agents that lost their guidance (anomalies)
    travel_times: list = field(default_factory=list, repr=False)  # per route, trips in the window

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def check_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0 or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise SimError(f"invalid route probabilities {probs!r}")
    return p


def truncated_speeds(rng, n, mean, sd):
    """Normal free speeds truncated to [0.5, 1.5] x mean by resampling."""
    out = np.empty(n)
    filled = 0
    while filled < n:
        draw = rng.normal(mean, sd, size=max(n - filled, 8)) if sd > 0 else np.full(n - filled, mean)
        draw = draw[(draw >= 0.5 * mean) & (draw <= 1.5 * mean)][: n - filled]
        out[filled:filled + draw.size] = draw
        filled += draw.size
    return out


def spawn_schedule(p: SimParams, probs, origin_cells, rng=None) -> list:
    """Poisson arrivals over [0, duration] with a route drawn from ``probs``."""
    probs = check_probs(probs)
    cells = sorted(origin_cells)
    if not cells:
        raise SimError("origin has no cells")
    rng = np.random.default_rng(p.seed) if rng is None else rng
    rate = p.demand / 3600.0
    times = []
    if rate > 0:
        t = rng.exponential(1.0 / rate)
        while t <= p.duration:
            times.append(t)
            t += rng.exponential(1.0 / rate)
    n = len(times)
    which = rng.integers(0, len(cells), size=n)
    routes = rng.choice(len(probs), size=n, p=probs)
    speeds = truncated_speeds(rng, n, p.v0_mean, p.v0_sd)
    return [Spawn(float(t), cells[c], int(r), float(v)) for t, c, r, v in zip(times, which, routes, speeds)]


class Simulation:
    """Mutable simulation state; ``step`` advances every active agent by one dt."""

    def __init__(self, scenario, route_set, params: SimParams, origin=None, routes=None):
        self.s = scenario
        self.rs = route_set
        self.p = params
        self.h = scenario.cell_size
        self.free = scenario.walkable
        self.routes = list(route_set.routes if routes is None else routes)
        self.origin = origin if origin is not None else scenario.origins[0]
        self.dest_mask = scenario.area_mask(route_set.destination)
        self._cell_max = np.array([scenario.width - 1, scenario.height - 1])
        field_ids, grads, reach = {}, [], []
        mask_ids, masks = {}, []
        n_legs = max(len(r.legs) for r in self.routes) + 1
        self.field_table = np.zeros((len(self.routes), n_legs), dtype=np.int64)
        self.mask_table = np.zeros((len(self.routes), n_legs), dtype=np.int64)
        self.n_legs = np.array([len(r.legs) + 1 for r in self.routes], dtype=np.int64)
        for k, r in enumerate(self.routes):
            for l, fid in enumerate(list(r.legs) + [route_set.destination]):
                if fid not in field_ids:
                    f = route_set.fields[fid]
                    field_ids[fid] = len(grads)
                    grads.append(gradient_grid(f))
                    reach.append(f.reachable)
                    mask_ids[fid] = len(masks)
                    masks.append(route_set.areas[fid].mask if fid in route_set.areas else self.dest_mask)
                self.field_table[k, l] = field_ids[fid]
                self.mask_table[k, l] = mask_ids[fid]
        self.grad = np.stack(grads)
        self.reach = np.stack(reach)
        self.masks = np.stack(masks)
        self.t = 0.0
        self.pos = np.zeros((0, 2))
        self.route = np.zeros(0, dtype=np.int64)
        self.leg = np.zeros(0, dtype=np.int64)
        self.v0 = np.zeros(0)
        self.spawn_t = np.zeros(0)
        self.arrival_t = np.zeros(0)
        self.active = np.zeros(0, dtype=bool)
        self.removed = np.zeros(0, dtype=bool)
        self.pending = []
        self._next = 0
        self.rng = np.random.default_rng(params.seed)

    # -- bookkeeping -------------------------------------------------------
    def load(self, schedule):
        self.pending = sorted(schedule, key=lambda sp: sp.time)
        self._next = 0

    @property
    def n_spawned(self) -> int:
        return len(self.pos)

    @property
    def n_arrived(self) -> int:
        return int((~np.isnan(self.arrival_t)).sum()) if len(self.arrival_t) else 0

    @property
    def n_pending(self) -> int:
        return len(self.pending) - self._next

    def add_agent(self, position, route, leg=0, free_speed=1.34, spawn_time=0.0) -> int:
        self.pos = np.vstack([self.pos, np.asarray(position, dtype=float)[None, :]])
        self.route = np.append(self.route, route)
        self.leg = np.append(self.leg, leg)
        self.v0 = np.append(self.v0, free_speed)
        self.spawn_t = np.append(self.spawn_t, spawn_time)
        self.arrival_t = np.append(self.arrival_t, np.nan)
        self.active = np.append(self.active, True)
        self.removed = np.append(self.removed, False)
        i = len(self.pos) - 1
        self._advance_legs(np.array([i]))
        return i

    def _spawn_due(self):
        new = []
        while self._next < len(self.pending) and self.pending[self._next].time <= self.t:
            new.append(self.pending[self._next])
            self._next += 1
        if not new:
            return
        jitter = self.rng.uniform(0.05, 0.95, size=(len(new), 2))
        cells = np.array([sp.cell for sp in new], dtype=float)
        k = len(self.pos)
        self.pos = np.vstack([self.pos, (cells + jitter) * self.h])
        self.route = np.concatenate([self.route, [sp.route for sp in new]])
        self.leg = np.concatenate([self.leg, np.zeros(len(new), dtype=np.int64)])
        self.v0 = np.concatenate([self.v0, [sp.free_speed for sp in new]])
        self.spawn_t = np.concatenate([self.spawn_t, [sp.time for sp in new]])
        self.arrival_t = np.concatenate([self.arrival_t, np.full(len(new), np.nan)])
        self.active = np.concatenate([self.active, np.ones(len(new), dtype=bool)])
        self.removed = np.concatenate([self.removed, np.zeros(len(new), dtype=bool)])
        self._advance_legs(np.arange(k, len(self.pos)))

    def cells_of(self, pos):
        c = (pos / self.h).astype(np.int64)  # positions are non-negative, so truncation floors
        np.minimum(c, self._cell_max, out=c)
        np.maximum(c, 0, out=c)
        return c

    def _advance_legs(self, idx):
        """Entering the current leg's area moves on to the next leg (at most once per
        step); entering the destination on the last leg ends the trip."""
        if idx.size == 0:
            return
        cells = self.cells_of(self.pos[idx])
        x, y = cells[:, 0], cells[:, 1]
        r, l = self.route[idx], self.leg[idx]
        last = self.n_legs[r] - 1
        hit = self.masks[self.mask_table[r, l], y, x]
        adv = hit & (l < last)
        self.leg[idx[adv]] += 1
        l = self.leg[idx]
        done = (l == last) & self.masks[self.mask_table[r, l], y, x]
        self.arrival_t[idx[done]] = self.t
        self.active[idx[done]] = False

    # -- dynamics ----------------------------------------------------------
    def _densities(self, pos):
        n = len(pos)
        if n < 2:
            return np.zeros(n)
        r = self.p.density_radius
        if n <= 32:
            d2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1)
            counts = (d2 <= r * r).sum(1) - 1
        else:
            counts = cKDTree(pos).query_ball_point(pos, r, return_length=True) - 1
        return counts / (math.pi * r * r)

    def _passable(self, start_cells, end_cells, field_idx):
        """Landing cell walkable and guided, without slipping through a diagonal corner."""
        x1, y1 = end_cells[:, 0], end_cells[:, 1]
        ok = self.free[y1, x1] & self.reach[field_idx, y1, x1]
        x0, y0 = start_cells[:, 0], start_cells[:, 1]
        diag = (x0 != x1) & (y0 != y1)
        if diag.any():
            ok[diag] &= self.free[y0[diag], x1[diag]] | self.free[y1[diag], x0[diag]]
        return ok

    def step(self):
        self.t = round(self.t + self.p.dt, 9)
        self._spawn_due()
        idx = np.flatnonzero(self.active)
        if idx.size == 0:
            return
        pos = self.pos[idx]
        cells = self.cells_of(pos)
        fids = self.field_table[self.route[idx], self.leg[idx]]
        direction = self.grad[fids, cells[:, 1], cells[:, 0]]
        lost = np.isnan(direction).any(1)
        if lost.any():
            self.active[idx[lost]] = False
            self.removed[idx[lost]] = True
            keep = ~lost
            idx, pos, cells, fids, direction = idx[keep], pos[keep], cells[keep], fids[keep], direction[keep]
            if idx.size == 0:
                return

        rho = self._densities(pos)
        speed = self.v0[idx] * np.maximum(0.0, 1.0 - rho / self.p.rho_max)
        stepv = (speed * self.p.dt)[:, None]
        target = pos + stepv * direction
        ok = self._passable(cells, self.cells_of(target), fids)
        todo = ~ok
        for ang in _ROTATIONS:
            if not todo.any():
                break
            c, s = math.cos(ang), math.sin(ang)
            d = direction[todo]
            rot = np.stack([c * d[:, 0] - s * d[:, 1], s * d[:, 0] + c * d[:, 1]], axis=1)
            cand = pos[todo] + stepv[todo] * rot
            good = self._passable(cells[todo], self.cells_of(cand), fids[todo])
            where = np.flatnonzero(todo)[good]
            target[where] = cand[good]
            todo[where] = False
        target[todo] = pos[todo]  # stall
        self.pos[idx] = target
        self._advance_legs(idx)

    def trajectory_rows(self):
        idx = np.flatnonzero(self.active)
        for i in idx:
            yield (self.t, int(i), float(self.pos[i, 0]), float(self.pos[i, 1]),
                   self.routes[self.route[i]].id, int(self.leg[i]))


def _stats(per_route, spawned=0, arrived=0, removed=0) -> SimResult:
    n = len(per_route)
    counts = np.array([len(t) for t in per_route], dtype=np.int64)
    mean = np.full(n, np.nan)
    sd = np.full(n, np.nan)
    for k, t in enumerate(per_route):
        if len(t):
            mean[k] = t.mean()
            sd[k] = t.std()
    all_tt = np.concatenate(per_route) if n else np.zeros(0)
    wmean = float(all_tt.mean()) if all_tt.size else math.nan
    wsd = float(all_tt.std()) if all_tt.size else math.nan
    return SimResult(counts, mean, sd, wmean, wsd, spawned, arrived, removed, list(per_route))


def summarize(sim: Simulation, n_routes: int, window) -> SimResult:
    t0, t1 = window
    arrived = ~np.isnan(sim.arrival_t)
    in_win = arrived & (sim.arrival_t >= t0) & (sim.arrival_t <= t1)
    tt = sim.arrival_t - sim.spawn_t
    per_route = [tt[in_win & (sim.route == k)] for k in range(n_routes)]
    return _stats(per_route, sim.n_spawned, int(arrived.sum()), int(sim.removed.sum()))


def pool_results(results) -> SimResult:
    """Merge replicate runs as if their trips came from one run."""
    results = list(results)
    if not results:
        raise SimError("nothing to pool")
    n = len(results[0].travel_times)
    per_route = [np.concatenate([r.travel_times[k] for r in results]) for k in range(n)]
    return _stats(per_route, sum(r.spawned for r in results), sum(r.arrived for r in results),
                  sum(r.removed for r in results))


def trace_routes(scenario, rs, routes=None, start=None, max_steps: int = 20000) -> dict:
    """Trace one free-walking agent per route from ``start`` (default: the
    origin cell nearest its centroid) and return its polyline."""
    routes = list(rs.routes if routes is None else routes)
    if start is None:
        cells = np.array(sorted(scenario.origins[0].cells), dtype=float)
        c = cells[np.argmin(((cells - cells.mean(0)) ** 2).sum(1))]
        start = (c + 0.5) * scenario.cell_size
    out = {}
    for k, r in enumerate(routes):
        sim = Simulation(scenario, rs, SimParams(v0_sd=0.0), routes=routes)
        i = sim.add_agent(start, k, free_speed=1.0)
        pts = [tuple(sim.pos[i])]
        for _ in range(max_steps):
            if not sim.active[i]:
                break
            sim.step()
            pts.append(tuple(sim.pos[i]))
        out[r.id] = pts
    return out


def path_length(points) -> float:
    pts = np.asarray(points, dtype=float)
    return float(np.hypot(*np.diff(pts, axis=0).T).sum()) if len(pts) > 1 else 0.0


def detour_flags(scenario, rs, routes=None, rel_tol: float = 0.03) -> tuple:
    """True for routes whose free-walking path is more than ``rel_tol`` longer
    than the shortest traced path."""
    routes = list(rs.routes if routes is None else routes)
    paths = trace_routes(scenario, rs, routes)
    lengths = [path_length(paths[r.id]) for r in routes]
    best = min(lengths)
    return [length > best * (1 + rel_tol) for length in lengths], lengths


def run_simulation(scenario, route_set, probs, p: SimParams = SimParams(),
                   origin=None, routes=None, trajectory_path=None, trajectory_every: float = 1.0) -> SimResult:
    """Simulate ``duration`` seconds and collect travel times of trips that end in the window."""
    probs = check_probs(probs)
    sim = Simulation(scenario, route_set, p, origin=origin, routes=routes)
    if len(probs) != len(sim.routes):
        raise SimError(f"{len(probs)} probabilities for {len(sim.routes)} routes")
    rng = np.random.default_rng(p.seed)
    sim.rng = rng
    sim.load(spawn_schedule(p, probs, sim.origin.cells, rng=rng))
    n_steps = int(round(p.duration / p.dt))
    every = max(1, int(round(trajectory_every / p.dt)))
    writer = fh = None
    if trajectory_path is not None:
        fh = open(trajectory_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["time_s", "agent_id", "x_m", "y_m", "route_id", "leg_index"])
    try:
        for k in range(n_steps):
            sim.step()
            if writer is not None and (k + 1) % every == 0:
                writer.writerows(sim.trajectory_rows())
    finally:
        if fh is not None:
            fh.close()
    return summarize(sim, len(sim.routes), p.measure_window)
