import json

import numpy as np
import pytest

from conftest import bundled
from pedroute.field import band, compute_field, gradient_grid
from pedroute.regions import critical_regions, extract_regions
from pedroute.routes import (IntermediateArea, RouteConfig, RouteError, build_routes,
                             filter_routes_for_origin, virtual_mask)
from test_field import descend


def routes_of(name, **kw):
    s = bundled(name)
    return s, build_routes(s, "d", RouteConfig(**kw))


def test_fig7_three_routes():
    _, rs = routes_of("fig07_single_obstacle")
    assert len(rs) == 3
    assert [len(r.legs) for r in rs.routes] == [0, 1, 1]
    assert rs.routes[0].is_direct


def test_fig8_nine_routes():
    _, rs = routes_of("fig08_two_obstacles")
    assert len(rs) == 9
    assert max(len(r.legs) for r in rs.routes) == 2


@pytest.mark.parametrize("name", ["fig07_single_obstacle", "fig08_two_obstacles", "fig10_nested_arcs"])
def test_depth_one_counts_closer_neighbours_of_root_criticals(name):
    s, rs = routes_of(name, max_depth=1)
    root = rs.fields["d"]
    g = extract_regions(band(root, rs.band_width))
    expected = 1 + sum(len(g.closer_adjacency[c.id]) for c in critical_regions(g))
    assert len(rs) == expected
    assert all(len(r.legs) <= 1 for r in rs.routes)


def test_route_ids_are_sequential_and_legs_distinct():
    _, rs = routes_of("fig08_two_obstacles")
    assert [r.id for r in rs.routes] == list(range(len(rs)))
    firsts = [r.legs[0] for r in rs.routes if r.legs]
    assert len(set(firsts)) == len(firsts)


def test_virtual_mask_empty_for_front_zero():
    s, rs = routes_of("fig07_single_obstacle")
    root = rs.fields["d"]
    area = IntermediateArea("x", s.area_mask("d"), 0, 0.0, "d", 1)
    assert not virtual_mask(root, area).any()


def test_areas_sit_on_their_parent_front():
    _, rs = routes_of("fig08_two_obstacles")
    for a in rs.areas.values():
        parent = rs.fields[a.parent_target]
        v = parent.values[a.mask]
        assert a.front_distance == pytest.approx(a.band_index * rs.band_width)
        assert (v >= a.front_distance - 1e-9).all()
        assert (v < a.front_distance + rs.band_width).all()


def test_nested_fields_inherit_parent_masks():
    _, rs = routes_of("fig08_two_obstacles")
    for a in rs.areas.values():
        if a.parent_target == rs.destination:
            continue
        parent = rs.fields[a.parent_target]
        child = rs.fields[a.id]
        # whatever the parent could not see stays invisible, plus its own virtual mask
        assert not (child.reachable & ~parent.reachable).any()
        assert not (child.reachable & virtual_mask(parent, a)).any()


@pytest.mark.parametrize("name", ["fig07_single_obstacle", "fig08_two_obstacles"])
def test_masked_descent_stays_out_of_virtual_obstacle(name):
    s, rs = routes_of(name)
    rng = np.random.default_rng(3)
    for a in rs.areas.values():
        f = rs.fields[a.id]
        grad = gradient_grid(f)
        cells = np.argwhere(f.reachable & ~a.mask)
        pick = cells[rng.choice(len(cells), min(100, len(cells)), replace=False)]
        for y, x in pick:
            reached, entered = descend(f.reachable, grad, a.mask, (x, y), s.cell_size)
            assert reached and not entered, (a.id, x, y)


def test_direct_route_uses_plain_destination_field():
    s, rs = routes_of("fig07_single_obstacle")
    plain = compute_field(s, s.area_mask("d"))
    np.testing.assert_array_equal(rs.guidance(rs.routes[0])[0].values, plain.values)
    assert len(rs.guidance(rs.routes[1])) == 2


def test_origin_filter_keeps_all_for_far_origin():
    s, rs = routes_of("fig07_single_obstacle")
    kept = filter_routes_for_origin(rs, s.origins[0], s)
    assert [r.id for r in kept.routes] == [r.id for r in rs.routes]


def test_origin_filter_drops_branches_behind_the_origin():
    s, rs = routes_of("fig07_single_obstacle")
    root = rs.fields["d"]
    a = rs.areas[rs.routes[1].legs[0]]
    # an origin cell already closer to the destination than the branch front
    ys, xs = np.nonzero(root.reachable & (root.values < a.front_distance - 1) & (root.values > 0))
    kept = filter_routes_for_origin(rs, [(int(xs[0]), int(ys[0]))], s)
    assert [r.id for r in kept.routes] == [0]


def test_origin_filter_warns_on_unreachable_origin():
    s, rs = routes_of("fig07_single_obstacle")
    a = rs.areas[rs.routes[1].legs[0]]
    hidden = rs.fields["d"].reachable & ~rs.fields[a.id].reachable
    ys, xs = np.nonzero(hidden)
    kept = filter_routes_for_origin(rs, [(int(xs[0]), int(ys[0]))], s)
    assert 1 not in [r.id for r in kept.routes]
    assert any("route 1" in w for w in kept.warnings)


def test_json_document():
    _, rs = routes_of("fig08_two_obstacles")
    doc = json.loads(rs.to_json())
    assert doc["destination"] == "d"
    assert [r["legs"] for r in doc["routes"]] == [list(r.legs) for r in rs.routes]
    for ad in doc["areas"]:
        a = rs.areas[ad["id"]]
        assert {tuple(c) for c in ad["cells"]} == a.cells


def test_oversized_band_gives_direct_route_only():
    _, rs = routes_of("fig07_single_obstacle", d=30.0)
    assert len(rs) == 1 and rs.routes[0].is_direct


def test_bad_inputs():
    s = bundled("fig07_single_obstacle")
    with pytest.raises(RouteError):
        RouteConfig(d=0)
    with pytest.raises(RouteError):
        RouteConfig(max_depth=0)
    with pytest.raises(RouteError):
        build_routes(s, "a")
