"""Rasterized walking geometries with named origin and destination areas.

A scenario file is JSON::

    {"cell_size_m": 0.5,
     "rows": ["#####", "#a.d#", "#####"],
     "legend": {"a": {"role": "origin"}, "d": {"role": "destination"}}}

``#`` marks an obstacle, ``.`` plain walkable floor, and every legend
character a walkable cell that belongs to the area of that name. Row 0 is the
top of the map and cell ``(x, y)`` is column ``x`` of row ``y``.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

OBSTACLE_CHAR = "#"
FLOOR_CHAR = "."
DEFAULT_CELL_SIZE = 0.15

ORIGIN = "origin"
DESTINATION = "destination"


class ScenarioError(ValueError):
    """Raised for documents that cannot be turned into a Scenario."""


class CellKind(IntEnum):
    WALKABLE = 0
    OBSTACLE = 1


@dataclass(frozen=True)
class Area:
    id: str
    role: str
    cells: frozenset  # of (x, y)

    def mask(self, width: int, height: int) -> np.ndarray:
        m = np.zeros((height, width), dtype=bool)
        for x, y in self.cells:
            m[y, x] = True
        return m


@dataclass(frozen=True, eq=False)
class Scenario:
    width: int
    height: int
    cell_size: float
    kinds: np.ndarray  # (height, width) of CellKind values
    areas: tuple = field(default_factory=tuple)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.cell_size == other.cell_size
            and np.array_equal(self.kinds, other.kinds)
            and self.areas == other.areas
        )

    __hash__ = None

    @property
    def obstacle(self) -> np.ndarray:
        return self.kinds == CellKind.OBSTACLE

    @property
    def walkable(self) -> np.ndarray:
        return self.kinds == CellKind.WALKABLE

    @property
    def origins(self) -> list:
        return [a for a in self.areas if a.role == ORIGIN]

    @property
    def destinations(self) -> list:
        return [a for a in self.areas if a.role == DESTINATION]

    def area(self, area_id: str) -> Area:
        for a in self.areas:
            if a.id == area_id:
                return a
        raise KeyError(area_id)

    def area_mask(self, area_id: str) -> np.ndarray:
        return self.area(area_id).mask(self.width, self.height)


def parse_scenario(document) -> Scenario:
    """Build a Scenario from a JSON string or an already decoded mapping."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"malformed document: {exc}") from exc
    if not isinstance(document, dict):
        raise ScenarioError("malformed document: top level must be an object")

    try:
        rows = document["rows"]
        legend = document.get("legend", {})
        cell_size = float(document.get("cell_size_m", DEFAULT_CELL_SIZE))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed document: {exc}") from exc
    if not isinstance(rows, list) or not rows or not all(isinstance(r, str) for r in rows):
        raise ScenarioError("malformed document: rows must be a non-empty list of strings")
    if not isinstance(legend, dict):
        raise ScenarioError("malformed document: legend must be an object")

    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ScenarioError("ragged rows")
    height = len(rows)

    roles = {}
    for ch, entry in legend.items():
        if len(ch) != 1 or ch in (OBSTACLE_CHAR, FLOOR_CHAR):
            raise ScenarioError(f"malformed document: bad legend key {ch!r}")
        role = entry.get("role") if isinstance(entry, dict) else None
        if role not in (ORIGIN, DESTINATION):
            raise ScenarioError(f"malformed document: legend {ch!r} has role {role!r}")
        roles[ch] = role

    kinds = np.zeros((height, width), dtype=np.int8)
    cells = {ch: set() for ch in roles}
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == OBSTACLE_CHAR:
                kinds[y, x] = CellKind.OBSTACLE
            elif ch == FLOOR_CHAR:
                continue
            elif ch in roles:
                cells[ch].add((x, y))
            else:
                raise ScenarioError(f"unknown legend character {ch!r} at ({x}, {y})")

    for ch, cs in cells.items():
        if not cs:
            raise ScenarioError(f"zero-area legend entry {ch!r}")

    areas = tuple(Area(ch, roles[ch], frozenset(cells[ch])) for ch in sorted(roles))
    kinds.setflags(write=False)
    return Scenario(width, height, cell_size, kinds, areas)


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def to_document(s: Scenario) -> dict:
    grid = [[OBSTACLE_CHAR if k == CellKind.OBSTACLE else FLOOR_CHAR for k in row]
            for row in s.kinds]
    for a in s.areas:
        for x, y in a.cells:
            grid[y][x] = a.id
    return {
        "cell_size_m": s.cell_size,
        "rows": ["".join(r) for r in grid],
        "legend": {a.id: {"role": a.role} for a in s.areas},
    }


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(to_document(s), indent=1)


def _flood(walkable: np.ndarray, seeds) -> np.ndarray:
    h, w = walkable.shape
    seen = np.zeros_like(walkable, dtype=bool)
    queue = deque()
    for x, y in seeds:
        if walkable[y, x] and not seen[y, x]:
            seen[y, x] = True
            queue.append((x, y))
    while queue:
        x, y = queue.popleft()
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if 0 <= nx < w and 0 <= ny < h and walkable[ny, nx] and not seen[ny, nx]:
                seen[ny, nx] = True
                queue.append((nx, ny))
    return seen


def validate(s: Scenario) -> list:
    """Return human readable invariant violations; empty means valid."""
    problems = []
    if s.width < 3 or s.height < 3:
        problems.append(f"grid too small: {s.width}x{s.height}")
    if not s.cell_size > 0:
        problems.append(f"cell size must be positive, got {s.cell_size}")
    if s.kinds.shape != (s.height, s.width):
        problems.append("grid shape does not match width/height")
        return problems

    ids = [a.id for a in s.areas]
    if len(set(ids)) != len(ids):
        problems.append("duplicate area ids")
    if not s.origins:
        problems.append("no origin area")
    if not s.destinations:
        problems.append("no destination area")

    walkable = s.walkable
    owner = {}
    for a in s.areas:
        if not a.cells:
            problems.append(f"area {a.id!r} is empty")
        for x, y in a.cells:
            if not (0 <= x < s.width and 0 <= y < s.height):
                problems.append(f"area {a.id!r} has cell ({x}, {y}) outside the grid")
                continue
            if not walkable[y, x]:
                problems.append(f"area on obstacle: {a.id!r} at ({x}, {y})")
            if (x, y) in owner and owner[(x, y)] != a.id:
                problems.append(f"areas {owner[(x, y)]!r} and {a.id!r} overlap at ({x}, {y})")
            owner[(x, y)] = a.id

    if problems:
        return problems
    for o in s.origins:
        reach = _flood(walkable, [next(iter(o.cells))])
        if not all(reach[y, x] for x, y in o.cells):
            problems.append(f"origin {o.id!r} is not connected")
        for d in s.destinations:
            if not all(reach[y, x] for x, y in d.cells):
                problems.append(f"unreachable destination {d.id!r} from origin {o.id!r}")
    return problems
