"""Connected band regions of a distance map and their closer-neighbour graph."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .field import BandMap

_FOUR = ndimage.generate_binary_structure(2, 1)


class RegionClass(Enum):
    SIMPLE = "simple"
    SPLIT_SIBLING = "split"
    CRITICAL = "critical"


@dataclass(frozen=True, eq=False)
class Region:
    id: int
    band_index: int
    front_distance: float
    mask: np.ndarray  # (height, width) bool

    @property
    def cells(self) -> frozenset:
        ys, xs = np.nonzero(self.mask)
        return frozenset(zip(xs.tolist(), ys.tolist()))

    @property
    def size(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True, eq=False)
class RegionGraph:
    band_width: float
    regions: tuple
    closer_adjacency: dict  # region id -> frozenset of region ids one band closer
    labels: np.ndarray  # region id per cell, -1 where unreachable

    def region(self, rid: int) -> Region:
        return self.regions[rid]

    def by_band(self) -> dict:
        out = {}
        for r in self.regions:
            out.setdefault(r.band_index, []).append(r.id)
        return out


def extract_regions(bm: BandMap) -> RegionGraph:
    """Split every band into 4-connected components and link bands k and k-1.

    Ids are ordered by band, then by the first cell of the component in
    row-major order, so equal band maps give equal graphs.
    """
    idx = bm.indices
    labels = np.full(idx.shape, -1, dtype=np.int64)
    found = []  # (band, first flat index, component mask)
    for k in np.unique(idx[idx >= 0]):
        comp, n = ndimage.label(idx == k, structure=_FOUR)
        if n == 0:
            continue
        flat = comp.ravel()
        nz = np.flatnonzero(flat)
        first = np.full(n + 1, np.iinfo(np.int64).max)
        np.minimum.at(first, flat[nz], nz)
        for lab in range(1, n + 1):
            found.append((int(k), int(first[lab]), comp == lab))
    found.sort(key=lambda t: (t[0], t[1]))

    regions = []
    for rid, (k, _, mask) in enumerate(found):
        mask.setflags(write=False)
        labels[mask] = rid
        regions.append(Region(rid, k, k * bm.width, mask))

    band_of = np.array([r.band_index for r in regions], dtype=np.int64)
    adjacency = {r.id: set() for r in regions}
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        ok = (a >= 0) & (b >= 0)
        pa, pb = a[ok], b[ok]
        diff = band_of[pa] - band_of[pb]
        for hi, lo in zip(pa[diff == 1].tolist(), pb[diff == 1].tolist()):
            adjacency[hi].add(lo)
        for hi, lo in zip(pb[diff == -1].tolist(), pa[diff == -1].tolist()):
            adjacency[hi].add(lo)

    labels.setflags(write=False)
    return RegionGraph(
        bm.width,
        tuple(regions),
        {k: frozenset(v) for k, v in adjacency.items()},
        labels,
    )


def classify(g: RegionGraph) -> dict:
    per_band = g.by_band()
    out = {}
    for r in g.regions:
        if len(g.closer_adjacency[r.id]) >= 2:
            out[r.id] = RegionClass.CRITICAL
        elif len(per_band[r.band_index]) >= 2:
            out[r.id] = RegionClass.SPLIT_SIBLING
        else:
            out[r.id] = RegionClass.SIMPLE
    return out


def critical_regions(g: RegionGraph, classes: dict | None = None) -> list:
    classes = classify(g) if classes is None else classes
    return [r for r in g.regions if classes[r.id] is RegionClass.CRITICAL]
