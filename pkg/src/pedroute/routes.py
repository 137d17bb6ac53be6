"""Intermediate destination areas and the route set of one destination.

Starting from the destination's distance map, every critical band region
(one with two or more unconnected closer neighbours) makes each of those
neighbours an intermediate destination. The search is then repeated toward
each intermediate area with everything closer than its front treated as a
virtual obstacle, which yields routes with several intermediate legs.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .field import DistanceField, band, compute_field
from .regions import classify, critical_regions, extract_regions
from .scenario import DESTINATION, Scenario, validate

log = logging.getLogger(__name__)

DEFAULT_BAND_WIDTH = 4.0
DEFAULT_MAX_DEPTH = 4


class RouteError(ValueError):
    pass


@dataclass(frozen=True)
class RouteConfig:
    d: float = DEFAULT_BAND_WIDTH
    max_depth: int = DEFAULT_MAX_DEPTH

    def __post_init__(self):
        if not self.d > 0:
            raise RouteError(f"band width must be positive, got {self.d}")
        if self.max_depth < 1:
            raise RouteError(f"max_depth must be >= 1, got {self.max_depth}")

    @property
    def min_obstacle_scale(self) -> float:
        return self.d


@dataclass(frozen=True, eq=False)
class IntermediateArea:
    id: str
    mask: np.ndarray
    band_index: int
    front_distance: float
    parent_target: str
    depth: int

    @property
    def cells(self) -> frozenset:
        ys, xs = np.nonzero(self.mask)
        return frozenset(zip(xs.tolist(), ys.tolist()))


@dataclass(frozen=True)
class Route:
    id: int
    legs: tuple  # intermediate area ids in walking order; the destination is implicit

    @property
    def is_direct(self) -> bool:
        return not self.legs


@dataclass(eq=False)
class RouteSet:
    destination: str
    band_width: float
    routes: list
    areas: dict  # id -> IntermediateArea
    fields: dict  # target id (area or destination) -> DistanceField
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.routes)

    def route(self, rid: int) -> Route:
        for r in self.routes:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def guidance(self, route: Route) -> list:
        """Fields walked in order: one per leg, then the destination field."""
        return [self.fields[a] for a in route.legs] + [self.fields[self.destination]]

    def targets(self, route: Route, scenario: Scenario) -> list:
        dest = scenario.area_mask(self.destination)
        return [self.areas[a].mask for a in route.legs] + [dest]

    def to_document(self) -> dict:
        return {
            "destination": self.destination,
            "band_width_m": self.band_width,
            "routes": [{"id": r.id, "legs": list(r.legs)} for r in self.routes],
            "areas": [
                {
                    "id": a.id,
                    "cells": sorted([x, y] for x, y in a.cells),
                    "front_distance": a.front_distance,
                    "parent_target": a.parent_target,
                }
                for a in self.areas.values()
            ],
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=1)


def virtual_mask(f: DistanceField, area: IntermediateArea) -> np.ndarray:
    """Cells of ``f`` strictly closer to its target than the front of ``area``."""
    with np.errstate(invalid="ignore"):
        return f.reachable & (f.values < area.front_distance)


def build_routes(scenario: Scenario, dest, cfg: RouteConfig = RouteConfig()) -> RouteSet:
    problems = validate(scenario)
    if problems:
        raise RouteError("invalid scenario: " + "; ".join(problems))
    dest_area = scenario.area(dest) if isinstance(dest, str) else dest
    if dest_area.role != DESTINATION:
        raise RouteError(f"area {dest_area.id!r} is not a destination")

    root = compute_field(scenario, scenario.area_mask(dest_area.id), target_id=dest_area.id)
    rs = RouteSet(dest_area.id, cfg.d, [Route(0, ())], {}, {dest_area.id: root})
    counter = [0]

    def expand(parent: DistanceField, blocked: np.ndarray, suffix: tuple, depth: int):
        graph = extract_regions(band(parent, cfg.d))
        for crit in critical_regions(graph, classify(graph)):
            for nid in sorted(graph.closer_adjacency[crit.id]):
                nb = graph.region(nid)
                counter[0] += 1
                area = IntermediateArea(
                    f"I{counter[0]}", nb.mask, nb.band_index, nb.front_distance,
                    parent.target_id, depth,
                )
                rs.areas[area.id] = area
                legs = (area.id,) + suffix
                rs.routes.append(Route(len(rs.routes), legs))
                log.debug("route %d: %s (critical region %d)", len(rs.routes) - 1, legs, crit.id)
                masked = blocked | virtual_mask(parent, area)
                sub = compute_field(scenario, area.mask, masked, target_id=area.id)
                rs.fields[area.id] = sub
                if depth < cfg.max_depth:
                    expand(sub, masked, legs, depth + 1)

    expand(root, np.zeros(root.values.shape, dtype=bool), (), 1)
    return rs


def filter_routes_for_origin(rs: RouteSet, origin, scenario: Scenario | None = None) -> RouteSet:
    """Keep routes whose first intermediate area lies no closer to its parent
    target than any origin cell; the direct route always stays."""
    cells = list(origin.cells if hasattr(origin, "cells") else origin)
    xs = np.array([c[0] for c in cells])
    ys = np.array([c[1] for c in cells])
    kept, warnings = [], list(rs.warnings)
    for r in rs.routes:
        if r.is_direct:
            kept.append(r)
            continue
        first = rs.areas[r.legs[0]]
        parent = rs.fields[first.parent_target]
        pv = parent.values[ys, xs]
        gv = rs.fields[first.id].values[ys, xs]
        if np.isnan(pv).any() or np.isnan(gv).any():
            warnings.append(f"route {r.id} dropped: origin unreachable in a referenced field")
            continue
        if (pv >= first.front_distance).all():
            kept.append(r)
    return RouteSet(rs.destination, rs.band_width, kept, rs.areas, rs.fields, warnings)
