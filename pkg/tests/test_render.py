import xml.etree.ElementTree as ET

import numpy as np
import pytest
from scipy import ndimage

from conftest import bundled
from pedroute.assign import AssignmentHistory, IterationRecord
from pedroute.field import band, compute_field
from pedroute.regions import classify, extract_regions
from pedroute.render import (CRITICAL_COLOR, class_rgb, field_gray, modulo_gray, pgm_bytes, plot_convergence,
                             ppm_bytes, read_pnm, svg_routes, write_class_ppm, write_field_pgm,
                             write_modulo_pgm)
from pedroute.routes import build_routes
from pedroute.sim import trace_routes


@pytest.fixture(scope="module")
def fig7():
    s = bundled("fig07_single_obstacle")
    return s, compute_field(s, s.area_mask("d"))


def cycles(row):
    """Bright-to-dark wraps along a 1-D ramp profile, plus the first ramp."""
    return 1 + int((np.diff(row.astype(int)) < -64).sum())


def test_field_render_brightness(fig7, tmp_path):
    s, f = fig7
    g = field_gray(f)
    assert (g[~f.reachable] == 0).all()
    assert (g[s.area_mask("d")] == 0).all()
    assert g.max() == 255
    r = f.reachable
    order = np.argsort(f.values[r])
    assert (np.diff(g[r][order].astype(int)) >= 0).all()
    write_field_pgm(f, tmp_path / "f.pgm", scale=2)
    img = read_pnm((tmp_path / "f.pgm").read_bytes())
    assert img.shape == (2 * s.height, 2 * s.width)
    np.testing.assert_array_equal(img[::2, ::2], g)


def test_modulo_cycles_halve_with_double_width(fig7, tmp_path):
    s, f = fig7
    d = 2.0
    x = s.width // 2
    col = f.reachable[:, x]
    a = cycles(modulo_gray(f, d)[col, x])
    b = cycles(modulo_gray(f, 2 * d)[col, x])
    assert abs(a - 2 * b) <= 2  # b within one of a / 2
    with pytest.raises(ValueError):
        modulo_gray(f, 0)
    write_modulo_pgm(f, d, tmp_path / "m.pgm")
    np.testing.assert_array_equal(read_pnm((tmp_path / "m.pgm").read_bytes()), modulo_gray(f, d))


def test_class_render_has_one_critical_region(fig7, tmp_path):
    s, f = fig7
    g = extract_regions(band(f, 4.0))
    cls = classify(g)
    write_class_ppm(g, cls, tmp_path / "c.ppm", obstacle=s.obstacle)
    img = read_pnm((tmp_path / "c.ppm").read_bytes())
    magenta = (img == CRITICAL_COLOR).all(-1)
    _, n = ndimage.label(magenta)
    assert n == 1
    # neighbouring bands of the same class alternate shade
    rgb = class_rgb(g, cls)
    assert len({tuple(rgb[r.mask][0]) for r in g.regions}) >= 3


def test_pnm_round_trip_and_errors():
    gray = np.arange(12, dtype=np.uint8).reshape(3, 4)
    np.testing.assert_array_equal(read_pnm(pgm_bytes(gray)), gray)
    rgb = np.arange(36, dtype=np.uint8).reshape(3, 4, 3)
    np.testing.assert_array_equal(read_pnm(ppm_bytes(rgb)), rgb)
    with pytest.raises(ValueError):
        read_pnm(b"P2\n1 1\n255\n0")


def test_svg_overlay_is_well_formed():
    s = bundled("fig07_single_obstacle")
    rs = build_routes(s, "d")
    svg = svg_routes(s, rs, trace_routes(s, rs))
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f"{ns}polyline")) == 3
    assert {t.text for t in root.findall(f"{ns}text")} == set(rs.areas)


def test_convergence_plot(tmp_path):
    p = np.array([0.5, 0.5])
    recs = [IterationRecord(k, p, p, p, np.array([80.0, 81.0]), np.array([10, 10]), 81.0, 80.0,
                            1, 0, 0.01, False, 80.5, 5.0 - k) for k in (1, 2, 3)]
    out = tmp_path / "c.png"
    plot_convergence({"uniform": AssignmentHistory([0, 1], recs)}, out)
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
