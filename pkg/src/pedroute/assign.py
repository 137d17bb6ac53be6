"""Iterated route assignment toward equal travel times on all used routes.

Each iteration simulates the current split, then moves probability mass from
the slowest route to the fastest one. The amount grows with the relative
travel-time gap; when donor and receiver just traded places it is damped to
keep the loop from oscillating. Only the previous iteration's result is used.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .sim import SimParams, check_probs, pool_results, run_simulation

log = logging.getLogger(__name__)

STOP_SINGLE = "single route"
STOP_SPREAD = "spread"
STOP_MAX_ITERS = "max iterations"

_ZERO = 1e-12


class AssignError(ValueError):
    pass


@dataclass(frozen=True)
class AssignParams:
    delta: float = 1.0
    epsilon: float = 0.005
    damping: float = 0.5
    stop_spread: float = 0.5  # seconds
    max_iters: int = 50
    scale_by_route_count: bool = True

    def __post_init__(self):
        if not self.delta > 0:
            raise AssignError(f"delta must be positive, got {self.delta}")
        if not 0 < self.epsilon < 1:
            raise AssignError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0 < self.damping < 1:
            raise AssignError(f"damping must lie in (0, 1), got {self.damping}")
        if not self.stop_spread > 0:
            raise AssignError(f"stop_spread must be positive, got {self.stop_spread}")
        if self.max_iters < 1:
            raise AssignError(f"max_iters must be >= 1, got {self.max_iters}")

    def check_route_count(self, n: int):
        if not self.epsilon < 1.0 / n:
            raise AssignError(f"epsilon {self.epsilon} must be below 1/{n} for {n} routes")


@dataclass
class IterationRecord:
    iteration: int  # 1-based
    probs_before: np.ndarray
    probs_simulated: np.ndarray  # after the epsilon floor
    probs_after: np.ndarray
    mean_tt: np.ndarray  # NaN for routes without completed trips
    counts: np.ndarray
    t_max: float
    t_min: float
    id_max: int | None  # index into the route list
    id_min: int
    shift: float
    damped: bool
    weighted_mean: float
    weighted_sd: float


@dataclass
class AssignmentHistory:
    route_ids: list
    records: list = field(default_factory=list)
    reason: str | None = None

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    @property
    def final_probs(self) -> np.ndarray:
        return self.records[-1].probs_after


def effective_probs(probs, epsilon: float) -> np.ndarray:
    """Raise zero entries to ``epsilon``; the entries above ``epsilon`` pay for
    it in proportion to their excess over ``epsilon``, so none drops below it."""
    p = check_probs(probs).copy()
    zero = p <= _ZERO
    if not zero.any():
        return p
    need = epsilon * zero.sum() - p[zero].sum()
    donors = p > epsilon
    avail = (p[donors] - epsilon).sum()
    if need > avail + 1e-12:
        raise AssignError(f"cannot floor {int(zero.sum())} routes at epsilon={epsilon}")
    p[zero] = epsilon
    p[donors] -= need * (p[donors] - epsilon) / avail
    return p


def select_extremes(mean_tt, probs, epsilon: float) -> tuple:
    """(id_max, id_min) as list indices; ties go to the lower index.

    Every route with completed trips can be the minimum, but only routes whose
    probability before flooring exceeded ``epsilon`` can be the maximum.
    ``id_max`` is None when no route qualifies.
    """
    t = np.asarray(mean_tt, dtype=float)
    p = np.asarray(probs, dtype=float)
    have = ~np.isnan(t)
    if not have.any():
        raise AssignError("no completed trips on any route")
    id_min = int(np.argmin(np.where(have, t, np.inf)))
    eligible = have & (p > epsilon)
    id_max = int(np.argmax(np.where(eligible, t, -np.inf))) if eligible.any() else None
    return id_max, id_min


def shift_amount(t_max: float, t_min: float, params: AssignParams, n_routes: int = 1,
                 donor_prob: float = 1.0) -> float:
    if t_max + t_min <= 0:
        raise AssignError("t_max + t_min must be positive")
    if t_max < t_min:
        raise AssignError(f"t_max {t_max} below t_min {t_min}")
    base = ((t_max - t_min) / (t_max + t_min)) ** params.delta
    if params.scale_by_route_count:
        base /= n_routes
    return min(base, donor_prob)


def update_probabilities(probs, id_max, id_min, shift: float, damping: float,
                         previous: tuple | None = None) -> tuple:
    """Move ``shift`` from ``id_max`` to ``id_min``; returns (probs, applied shift, damped).

    The shift is multiplied by ``damping`` when the previous (max, min) pair is
    this pair reversed.
    """
    p = np.asarray(probs, dtype=float).copy()
    if id_max is None or id_max == id_min:
        return p, 0.0, False
    damped = previous is not None and tuple(previous) == (id_min, id_max)
    if damped:
        shift *= damping
    shift = min(shift, p[id_max])
    p[id_max] -= shift
    p[id_min] += shift
    p = np.clip(p, 0.0, None)
    return p / p.sum(), shift, damped


def check_stop(history: AssignmentHistory, params: AssignParams) -> str | None:
    rec = history.records[-1]
    if int((rec.probs_after > params.epsilon).sum()) == 1:
        return STOP_SINGLE
    if rec.t_max - rec.t_min <= params.stop_spread:
        return STOP_SPREAD
    if rec.iteration >= params.max_iters:
        return STOP_MAX_ITERS
    return None


def _simulate(args):
    scenario, rs, probs, sim_params, routes = args
    return run_simulation(scenario, rs, probs, sim_params, routes=routes)


def simulate_replicates(scenario, rs, probs, sim_params: SimParams, replicates: int = 1,
                        routes=None, workers: int | None = None):
    """One run per replicate (seeds ``seed``, ``seed + 1``, ...) with pooled statistics."""
    jobs = [(scenario, rs, probs, replace(sim_params, seed=sim_params.seed + r), routes)
            for r in range(replicates)]
    if replicates == 1:
        return _simulate(jobs[0])
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return pool_results(ex.map(_simulate, jobs))


def run_assignment(scenario, rs, init_probs, sim_params: SimParams = SimParams(),
                   params: AssignParams = AssignParams(), routes=None, replicates: int = 1,
                   on_iteration=None) -> AssignmentHistory:
    """Iterate simulate -> pick extremes -> shift until a stop rule fires.

    Every iteration reuses the same seed, so successive runs differ only in
    the route split and not in arrival times or free speeds.
    """
    routes = list(rs.routes if routes is None else routes)
    n = len(routes)
    params.check_route_count(n)
    probs = check_probs(init_probs)
    if len(probs) != n:
        raise AssignError(f"{len(probs)} initial probabilities for {n} routes")
    hist = AssignmentHistory([r.id for r in routes])
    previous = None
    for it in range(1, params.max_iters + 1):
        sim_probs = effective_probs(probs, params.epsilon)
        res = simulate_replicates(scenario, rs, sim_probs, sim_params, replicates, routes)
        if res.total == 0:
            raise AssignError(f"iteration {it}: no trips completed in the measurement window")
        id_max, id_min = select_extremes(res.mean_tt, probs, params.epsilon)
        t_min = float(res.mean_tt[id_min])
        t_max = float(res.mean_tt[id_max]) if id_max is not None else t_min
        t_max = max(t_max, t_min)
        raw = shift_amount(t_max, t_min, params, n, probs[id_max]) if id_max is not None else 0.0
        new, applied, damped = update_probabilities(probs, id_max, id_min, raw, params.damping, previous)
        rec = IterationRecord(it, probs, sim_probs, new, res.mean_tt, res.counts, t_max, t_min,
                              id_max, id_min, applied, damped, res.weighted_mean, res.weighted_sd)
        hist.records.append(rec)
        log.info("iteration %d: t_max %.2f t_min %.2f shift %.4f%s", it, t_max, t_min, applied,
                 " (damped)" if damped else "")
        if on_iteration is not None:
            on_iteration(rec)
        previous = (id_max, id_min)
        probs = new
        reason = check_stop(hist, params)
        if reason:
            hist.reason = reason
            break
    return hist


def _fmt(v) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def write_history_csv(hist: AssignmentHistory, path):
    """One row per (iteration, route); stop_reason filled on the very last row only."""
    rows = []
    for rec in hist.records:
        for k, rid in enumerate(hist.route_ids):
            rows.append([rec.iteration, rid, _fmt(rec.probs_before[k]), _fmt(rec.probs_after[k]),
                         _fmt(rec.mean_tt[k]), int(rec.counts[k]), _fmt(rec.t_max), _fmt(rec.t_min),
                         _fmt(rec.shift), int(rec.damped), ""])
    if rows:
        rows[-1][-1] = hist.reason or ""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "route_id", "prob_before", "prob_after", "mean_tt_s", "count",
                    "t_max_s", "t_min_s", "shift", "damped", "stop_reason"])
        w.writerows(rows)


def summary_document(hist: AssignmentHistory, params: AssignParams) -> dict:
    last = hist.final
    return {
        "iterations": len(hist.records),
        "stop_reason": hist.reason,
        "route_ids": hist.route_ids,
        "final_probs": [float(x) for x in last.probs_after],
        "final_mean_tt_s": [None if math.isnan(x) else float(x) for x in last.mean_tt],
        "weighted_mean_tt_s": last.weighted_mean,
        "weighted_sd_tt_s": last.weighted_sd,
        "first_weighted_sd_tt_s": hist.records[0].weighted_sd,
        "params": asdict(params),
    }


def write_summary_json(hist: AssignmentHistory, params: AssignParams, path):
    with open(path, "w") as fh:
        json.dump(summary_document(hist, params), fh, indent=1)
