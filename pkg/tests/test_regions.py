import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bundled
from pedroute.field import BandMap, band, compute_field
from pedroute.regions import RegionClass, RegionGraph, classify, critical_regions, extract_regions
from pedroute.scenario import parse_scenario


def root_graph(name, d):
    s = bundled(name)
    f = compute_field(s, s.area_mask("d"))
    return f, extract_regions(band(f, d))


def check_invariants(bm: BandMap, g: RegionGraph):
    union = np.zeros(bm.indices.shape, dtype=int)
    for r in g.regions:
        union += r.mask
        assert r.mask.any()
        assert (bm.indices[r.mask] == r.band_index).all()
        assert r.front_distance == r.band_index * bm.width
    assert union.max() <= 1
    assert np.array_equal(union.astype(bool), bm.reachable)
    for rid, closer in g.closer_adjacency.items():
        k = g.region(rid).band_index
        assert all(g.region(c).band_index == k - 1 for c in closer)
        if k >= 1:
            assert closer, f"region {rid} in band {k} has no closer neighbour"


def test_straight_corridor_chain():
    s = parse_scenario({"cell_size_m": 1.0, "rows": ["d" + "." * 10 + "a"],
                        "legend": {"a": {"role": "origin"}, "d": {"role": "destination"}}})
    f = compute_field(s, s.area_mask("d"))
    g = extract_regions(band(f, 4.0))
    assert len(g.regions) == 3
    assert set(classify(g).values()) == {RegionClass.SIMPLE}
    assert g.closer_adjacency == {0: frozenset(), 1: frozenset({0}), 2: frozenset({1})}


@pytest.mark.parametrize("d", [2.0, 4.0, 6.0])
def test_fig7_one_critical_with_two_closer_neighbours(d):
    _, g = root_graph("fig07_single_obstacle", d)
    crit = critical_regions(g)
    assert len(crit) == 1
    assert len(g.closer_adjacency[crit[0].id]) == 2


def test_fig7_oversized_d_has_no_critical():
    _, g = root_graph("fig07_single_obstacle", 30.0)
    assert critical_regions(g) == []


def test_fig8_two_criticals():
    _, g = root_graph("fig08_two_obstacles", 4.0)
    assert len(critical_regions(g)) == 2


def test_classes():
    _, g = root_graph("fig07_single_obstacle", 4.0)
    cls = classify(g)
    assert cls[0] is RegionClass.SIMPLE  # the band holding the target
    crit = critical_regions(g, cls)[0]
    for nid in g.closer_adjacency[crit.id]:
        assert cls[nid] is RegionClass.SPLIT_SIBLING
    for r in g.regions:
        if len(g.closer_adjacency[r.id]) >= 2:
            assert cls[r.id] is RegionClass.CRITICAL
        elif len(g.by_band()[r.band_index]) >= 2:
            assert cls[r.id] is RegionClass.SPLIT_SIBLING
        else:
            assert cls[r.id] is RegionClass.SIMPLE


def test_critical_survives_halving_d():
    # the block spans well over 2d of distance for d = 4, so d = 2 must keep it
    for d in (4.0, 2.0):
        _, g = root_graph("fig07_single_obstacle", d)
        assert len(critical_regions(g)) == 1


@pytest.mark.parametrize("name", ["fig07_single_obstacle", "fig08_two_obstacles", "fig10_nested_arcs"])
def test_partition_and_adjacency(name):
    s = bundled(name)
    f = compute_field(s, s.area_mask("d"))
    bm = band(f, 4.0)
    check_invariants(bm, extract_regions(bm))


def test_ids_deterministic():
    f, g1 = root_graph("fig08_two_obstacles", 4.0)
    g2 = extract_regions(band(f, 4.0))
    assert [r.band_index for r in g1.regions] == [r.band_index for r in g2.regions]
    assert all(np.array_equal(a.mask, b.mask) for a, b in zip(g1.regions, g2.regions))
    assert g1.closer_adjacency == g2.closer_adjacency
    firsts = [(r.band_index, np.flatnonzero(r.mask.ravel())[0]) for r in g1.regions]
    assert firsts == sorted(firsts)


def test_band_uniqueness_reading_differs_on_fig10():
    """The closer-neighbour count is the operative criterion. Requiring the
    critical region to be alone in its band as well would lose one of the two
    choice points on the nested-arc map."""
    _, g = root_graph("fig10_nested_arcs", 4.0)
    crit = critical_regions(g)
    per_band = g.by_band()
    alone = [c for c in crit if len(per_band[c.band_index]) == 1]
    assert len(crit) == 2
    assert len(alone) == 1


walls = st.lists(st.tuples(st.integers(0, 14), st.integers(0, 14)), max_size=70)


@settings(max_examples=40, deadline=None)
@given(walls, st.sampled_from([1.0, 2.0, 3.5]))
def test_random_maps_keep_invariants(blocks, d):
    rows = [["."] * 15 for _ in range(15)]
    for x, y in blocks:
        rows[y][x] = "#"
    rows[0][0] = "d"
    rows[14][14] = "a"
    s = parse_scenario({"cell_size_m": 1.0, "rows": ["".join(r) for r in rows],
                        "legend": {"a": {"role": "origin"}, "d": {"role": "destination"}}})
    f = compute_field(s, s.area_mask("d"))
    bm = band(f, d)
    check_invariants(bm, extract_regions(bm))
