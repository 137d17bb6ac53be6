"""Geodesic distance maps over walkable cells and the guidance derived from them."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# Unreachable cells hold NaN; test with ``DistanceField.reachable`` rather than comparing.
UNREACHABLE = float("nan")

_FAR, _TRIAL, _KNOWN = 0, 1, 2
SEED_RADIUS = 8


class FieldError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DistanceField:
    values: np.ndarray  # (height, width) meters, NaN where unreachable
    target_id: str
    blocked: np.ndarray  # (height, width) bool, obstacles plus virtual obstacles
    cell_size: float

    @property
    def reachable(self) -> np.ndarray:
        return ~np.isnan(self.values)

    @property
    def target(self) -> np.ndarray:
        return self.values == 0.0

    def value(self, cell) -> float:
        x, y = cell
        return float(self.values[y, x])


@dataclass(frozen=True, eq=False)
class BandMap:
    width: float
    indices: np.ndarray  # int, -1 where unreachable

    @property
    def reachable(self) -> np.ndarray:
        return self.indices >= 0


def _as_mask(cells, shape) -> np.ndarray:
    if cells is None:
        return np.zeros(shape, dtype=bool)
    if isinstance(cells, np.ndarray) and cells.dtype == bool:
        if cells.shape != shape:
            raise FieldError(f"mask shape {cells.shape} does not match grid {shape}")
        return cells.copy()
    m = np.zeros(shape, dtype=bool)
    for x, y in cells:
        m[y, x] = True
    return m


def fast_march(free: np.ndarray, seed: np.ndarray, h: float) -> np.ndarray:
    """First-order Fast Marching for unit speed on a 4-neighbour stencil.

    ``seed`` holds fixed distances (finite entries are accepted as known, NaN
    elsewhere). Returns arrival distances with NaN on cells never reached.
    """
    ny, nx = free.shape
    n = nx * ny
    free_f = free.ravel()
    seed_f = seed.ravel()
    known0 = np.flatnonzero(~np.isnan(seed_f))
    u = np.full(n, np.inf)
    state = np.zeros(n, dtype=np.int8)
    heap = []
    u[known0] = seed_f[known0]
    state[known0] = _KNOWN
    h2 = 2.0 * h * h

    def solve(i):
        x = i % nx
        a = math.inf
        if x > 0 and state[i - 1] == _KNOWN:
            a = u[i - 1]
        if x < nx - 1 and state[i + 1] == _KNOWN and u[i + 1] < a:
            a = u[i + 1]
        b = math.inf
        if i >= nx and state[i - nx] == _KNOWN:
            b = u[i - nx]
        if i < n - nx and state[i + nx] == _KNOWN and u[i + nx] < b:
            b = u[i + nx]
        if a > b:
            a, b = b, a
        if b - a >= h:
            return a + h
        return 0.5 * (a + b + math.sqrt(h2 - (a - b) ** 2))

    def neighbours(i):
        x = i % nx
        if x > 0:
            yield i - 1
        if x < nx - 1:
            yield i + 1
        if i >= nx:
            yield i - nx
        if i < n - nx:
            yield i + nx

    for i in known0:
        for j in neighbours(i):
            if free_f[j] and state[j] != _KNOWN:
                v = solve(j)
                if v < u[j]:
                    u[j] = v
                    state[j] = _TRIAL
                    heapq.heappush(heap, (v, j))

    while heap:
        v, i = heapq.heappop(heap)
        if state[i] == _KNOWN or v > u[i]:
            continue
        state[i] = _KNOWN
        for j in neighbours(i):
            if free_f[j] and state[j] != _KNOWN:
                w = solve(j)
                if w < u[j]:
                    u[j] = w
                    state[j] = _TRIAL
                    heapq.heappush(heap, (w, j))

    u[state != _KNOWN] = np.nan
    return u.reshape(ny, nx)


def _line_of_sight(free: np.ndarray, ax, ay, bx, by) -> np.ndarray:
    """Vectorized check that the segments between cell centres cross only free cells."""
    steps = int(np.ceil(np.max(np.hypot(bx - ax, by - ay), initial=0.0) * 4)) + 1
    ok = np.ones(ax.shape, dtype=bool)
    for t in np.linspace(0.0, 1.0, steps + 1):
        cx = np.floor(ax + (bx - ax) * t + 0.5).astype(np.int64)
        cy = np.floor(ay + (by - ay) * t + 0.5).astype(np.int64)
        ok &= free[cy, cx]
    return ok


def exact_seed(free: np.ndarray, target: np.ndarray, h: float, radius: int = SEED_RADIUS) -> np.ndarray:
    """Exact Euclidean distances for cells within ``radius`` cells of the target
    that see their nearest target cell in a straight line; NaN elsewhere.

    Marching from these values instead of from the bare target removes the
    large first-order error a point source otherwise spreads across the map.
    """
    dist, (iy, ix) = ndimage.distance_transform_edt(~target, return_indices=True)
    seed = np.full(free.shape, np.nan)
    seed[target] = 0.0
    cand = free & ~target & (dist <= radius)
    cy, cx = np.nonzero(cand)
    if cy.size:
        ty, tx = iy[cy, cx], ix[cy, cx]
        vis = _line_of_sight(free, cx.astype(float), cy.astype(float), tx.astype(float), ty.astype(float))
        seed[cy[vis], cx[vis]] = dist[cy[vis], cx[vis]] * h
    return seed


def compute_field(scenario, targets, blocked_extra=None, target_id: str = "target") -> DistanceField:
    """Distance in meters from every walkable, unblocked cell to ``targets``.

    ``targets`` and ``blocked_extra`` accept boolean grids or iterables of
    ``(x, y)`` cells.
    """
    shape = (scenario.height, scenario.width)
    target = _as_mask(targets, shape)
    extra = _as_mask(blocked_extra, shape)
    if not target.any():
        raise FieldError("empty target set")
    if (target & extra).any():
        raise FieldError("targets overlap blocked_extra")
    blocked = scenario.obstacle | extra
    target &= ~blocked
    if not target.any():
        raise FieldError("all targets blocked")
    seed = exact_seed(~blocked, target, scenario.cell_size)
    values = fast_march(~blocked, seed, scenario.cell_size)
    values.setflags(write=False)
    blocked.setflags(write=False)
    return DistanceField(values, target_id, blocked, scenario.cell_size)


def _axis_difference(vals, x, y, dx, dy, h):
    """Derivative along one axis with the central/one-sided fallback; None if unusable."""
    ny, nx = vals.shape
    c = vals[y, x]
    fwd = bwd = math.nan
    if 0 <= x + dx < nx and 0 <= y + dy < ny:
        fwd = vals[y + dy, x + dx]
    if 0 <= x - dx < nx and 0 <= y - dy < ny:
        bwd = vals[y - dy, x - dx]
    f_ok, b_ok = not math.isnan(fwd), not math.isnan(bwd)
    if f_ok and b_ok:
        return (fwd - bwd) / (2 * h)
    if f_ok:
        return (fwd - c) / h
    if b_ok:
        return (c - bwd) / h
    return None


def _free_at(vals, x, y) -> bool:
    ny, nx = vals.shape
    return 0 <= x < nx and 0 <= y < ny and not math.isnan(vals[y, x])


def _wall_slide(vals, x, y, dx, dy):
    """Drop direction components that point into blocked or off-grid cells.

    Shortest paths hug obstacle edges, so the raw gradient next to a wall or
    corner tends to lean slightly into it; without this a walker taking small
    steps along the guidance would clip the obstacle.
    """
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    if dx != 0 and not _free_at(vals, x + sx, y):
        dx = 0.0
    if dy != 0 and not _free_at(vals, x, y + sy):
        dy = 0.0
    if dx != 0 and dy != 0 and not _free_at(vals, x + sx, y + sy):
        if abs(dx) >= abs(dy):
            dy = 0.0
        else:
            dx = 0.0
    norm = math.hypot(dx, dy)
    if norm < 1e-12:
        return None
    return (dx / norm, dy / norm)


def gradient_at(f: DistanceField, cell) -> tuple:
    """Unit vector (dx, dy) of steepest descent at ``cell``; (0, 0) on the target."""
    x, y = cell
    vals = f.values
    c = vals[y, x]
    if math.isnan(c):
        raise FieldError(f"cell {cell} is unreachable")
    if c == 0.0:
        return (0.0, 0.0)
    h = f.cell_size
    gx = _axis_difference(vals, x, y, 1, 0, h)
    gy = _axis_difference(vals, x, y, 0, 1, h)
    if gx is not None and gy is not None:
        norm = math.hypot(gx, gy)
        if norm > 1e-12:
            d = _wall_slide(vals, x, y, -gx / norm, -gy / norm)
            if d is not None:
                return d
    return _steepest_neighbour(vals, x, y)


def _steepest_neighbour(vals, x, y):
    """Direction to the lowest neighbour that can be entered without cutting a corner."""
    best, best_dir = vals[y, x], (0.0, 0.0)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == dy == 0 or not _free_at(vals, x + dx, y + dy):
                continue
            if dx and dy and not (_free_at(vals, x + dx, y) and _free_at(vals, x, y + dy)):
                continue
            v = vals[y + dy, x + dx]
            if v < best:
                best = v
                norm = math.hypot(dx, dy)
                best_dir = (dx / norm, dy / norm)
    return best_dir


def gradient_grid(f: DistanceField) -> np.ndarray:
    """Vectorized ``gradient_at`` for every cell: array (height, width, 2), NaN if unreachable."""
    vals = f.values
    h = f.cell_size
    ny, nx = vals.shape
    pad = np.pad(vals, 1, constant_values=np.nan)
    c = pad[1:-1, 1:-1]

    def axis(fwd, bwd):
        fo, bo = ~np.isnan(fwd), ~np.isnan(bwd)
        out = np.full(c.shape, np.nan)
        both = fo & bo
        out[both] = (fwd[both] - bwd[both]) / (2 * h)
        only_f = fo & ~bo
        out[only_f] = (fwd[only_f] - c[only_f]) / h
        only_b = bo & ~fo
        out[only_b] = (c[only_b] - bwd[only_b]) / h
        return out

    gx = axis(pad[1:-1, 2:], pad[1:-1, :-2])
    gy = axis(pad[2:, 1:-1], pad[:-2, 1:-1])
    norm = np.hypot(gx, gy)
    with np.errstate(invalid="ignore", divide="ignore"):
        dx, dy = -gx / norm, -gy / norm
    ok = ~np.isnan(c) & ~np.isnan(norm) & (norm > 1e-12)
    dx[~ok] = 0.0
    dy[~ok] = 0.0

    # wall sliding, as in _wall_slide
    free = ~np.isnan(pad)
    yy, xx = np.mgrid[1:ny + 1, 1:nx + 1]
    sx = np.where(dx > 0, 1, -1)
    sy = np.where(dy > 0, 1, -1)
    dx[(dx != 0) & ~free[yy, xx + sx]] = 0.0
    dy[(dy != 0) & ~free[yy + sy, xx]] = 0.0
    corner = (dx != 0) & (dy != 0) & ~free[yy + sy, xx + sx]
    wide = np.abs(dx) >= np.abs(dy)
    dy[corner & wide] = 0.0
    dx[corner & ~wide] = 0.0
    n2 = np.hypot(dx, dy)
    ok &= n2 > 1e-12
    out = np.full((ny, nx, 2), np.nan)
    out[ok, 0] = dx[ok] / n2[ok]
    out[ok, 1] = dy[ok] / n2[ok]
    reach = ~np.isnan(c)
    out[reach & (c == 0.0)] = 0.0
    for y, x in zip(*np.nonzero(reach & (c != 0.0) & ~ok)):
        out[y, x] = _steepest_neighbour(vals, x, y)
    return out


def band(f: DistanceField, d: float) -> BandMap:
    """Integer band index floor(value / d) per cell, -1 where unreachable."""
    if not d > 0:
        raise FieldError(f"band width must be positive, got {d}")
    idx = np.full(f.values.shape, -1, dtype=np.int64)
    r = f.reachable
    idx[r] = np.floor(f.values[r] / d).astype(np.int64)
    return BandMap(float(d), idx)
