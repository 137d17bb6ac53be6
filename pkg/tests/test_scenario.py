import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bundled
from oracles import connected_to
from pedroute.cli import bundled_scenarios
from pedroute.scenario import (CellKind, ScenarioError, dumps_scenario, parse_scenario,
                               to_document, validate)


def doc(rows, legend=None, cell=0.5):
    return {"cell_size_m": cell, "rows": rows,
            "legend": legend or {"a": {"role": "origin"}, "d": {"role": "destination"}}}


def test_minimal_grid():
    s = parse_scenario(doc(["a..", "...", "..d"]))
    assert (s.width, s.height) == (3, 3)
    assert len(s.origins) == 1 and len(s.destinations) == 1
    assert s.area("a").cells == frozenset({(0, 0)})
    assert s.area("d").cells == frozenset({(2, 2)})
    assert validate(s) == []


def test_json_text_input():
    s = parse_scenario(json.dumps(doc(["a.d", "...", "..."])))
    assert s.area("d").cells == frozenset({(2, 0)})


@pytest.mark.parametrize("bad, message", [
    ("{not json", "malformed document"),
    ("[]", "malformed document"),
    (json.dumps({"legend": {}}), "malformed document"),
    (json.dumps(doc(["a..", "..", "..d"])), "ragged rows"),
    (json.dumps(doc(["a.x", "...", "..d"])), "unknown legend character"),
    (json.dumps(doc(["a..", "...", "..."])), "zero-area legend entry"),
])
def test_parse_errors(bad, message):
    with pytest.raises(ScenarioError, match=message):
        parse_scenario(bad)


def test_fig7_obstacle_is_one_rectangle():
    s = bundled("fig07_single_obstacle")
    interior = s.obstacle[1:-1, 1:-1]
    ys, xs = np.nonzero(interior)
    h = s.cell_size
    # the encoded block spans 8..20 m by 14..18 m
    assert interior.sum() == round(12 / h) * round(4 / h)
    assert interior[ys.min():ys.max() + 1, xs.min():xs.max() + 1].all()


def test_sealed_origin_is_reported():
    s = parse_scenario(doc(["a#...", "##...", "....d"]))
    assert any("unreachable destination" in p for p in validate(s))


def test_area_on_obstacle_is_reported():
    s = parse_scenario(doc(["a..", ".#.", "..d"]))
    cells = set(s.area("d").cells) | {(1, 1)}
    from dataclasses import replace
    from pedroute.scenario import Area
    broken = replace(s, areas=(s.area("a"), Area("d", "destination", frozenset(cells))))
    assert any("area on obstacle" in p for p in validate(broken))


@pytest.mark.parametrize("name", sorted(bundled_scenarios()))
def test_bundled_maps_valid_and_round_trip(name):
    s = bundled(name)
    assert validate(s) == []
    assert parse_scenario(dumps_scenario(s)) == s


def test_cell_kinds():
    s = parse_scenario(doc(["a#d", "...", "..."]))
    assert s.kinds[0, 1] == CellKind.OBSTACLE
    assert s.kinds[0, 0] == CellKind.WALKABLE


grids = st.integers(3, 8).flatmap(lambda w: st.integers(3, 8).flatmap(
    lambda h: st.lists(st.lists(st.sampled_from(".#"), min_size=w, max_size=w), min_size=h, max_size=h)))


@settings(max_examples=150, deadline=None)
@given(grids, st.data())
def test_validate_matches_flood_fill(rows, data):
    h, w = len(rows), len(rows[0])
    free = [(x, y) for y in range(h) for x in range(w) if rows[y][x] == "."]
    if len(free) < 2:
        return
    a, d = data.draw(st.lists(st.sampled_from(free), min_size=2, max_size=2, unique=True))
    rows = [list(r) for r in rows]
    rows[a[1]][a[0]] = "a"
    rows[d[1]][d[0]] = "d"
    s = parse_scenario(doc(["".join(r) for r in rows]))
    reach = connected_to(s.walkable, [a])
    assert (validate(s) == []) == bool(reach[d[1], d[0]])
    assert parse_scenario(to_document(s)) == s
