"""Raster and vector renders of fields, band regions and routes, plus
convergence plots of assignment runs."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .regions import RegionClass, RegionGraph

# (light, dark) shades alternate with band parity
CLASS_COLORS = {
    RegionClass.SIMPLE: ((128, 255, 255), (0, 160, 160)),
    RegionClass.SPLIT_SIBLING: ((255, 200, 120), (220, 120, 0)),
    RegionClass.CRITICAL: ((255, 0, 255), (255, 0, 255)),
}
CRITICAL_COLOR = CLASS_COLORS[RegionClass.CRITICAL][0]
OBSTACLE_COLOR = (230, 230, 230)
UNREACHABLE_COLOR = (0, 0, 0)

_LEG_COLORS = ["#00c0ff", "#ffd000", "#ff40ff", "#40ff40", "#ff8000", "#a080ff", "#ff4040", "#80ffff"]


def _scale(img: np.ndarray, scale: int) -> np.ndarray:
    if scale == 1:
        return img
    return np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)


def pgm_bytes(gray: np.ndarray, scale: int = 1) -> bytes:
    g = _scale(np.asarray(gray, dtype=np.uint8), scale)
    h, w = g.shape
    return b"P5\n%d %d\n255\n" % (w, h) + g.tobytes()


def ppm_bytes(rgb: np.ndarray, scale: int = 1) -> bytes:
    c = _scale(np.asarray(rgb, dtype=np.uint8), scale)
    h, w, _ = c.shape
    return b"P6\n%d %d\n255\n" % (w, h) + c.tobytes()


def read_pnm(data: bytes) -> np.ndarray:
    """Parse the binary P5/P6 files written here (no comments in the header)."""
    magic, w, h, maxval, body = data.split(maxsplit=4)
    w, h = int(w), int(h)
    if int(maxval) != 255 or magic not in (b"P5", b"P6"):
        raise ValueError("unsupported PNM variant")
    arr = np.frombuffer(body, dtype=np.uint8)
    return arr.reshape(h, w) if magic == b"P5" else arr.reshape(h, w, 3)


def field_gray(f) -> np.ndarray:
    """Brightness proportional to distance; unreachable cells are black."""
    v = f.values
    out = np.zeros(v.shape, dtype=np.uint8)
    r = f.reachable
    vmax = v[r].max() if r.any() else 0.0
    if vmax > 0:
        out[r] = np.round(v[r] / vmax * 255).astype(np.uint8)
    return out


def modulo_gray(f, d: float) -> np.ndarray:
    """Brightness (value mod d)/d; each band ramps from dark to bright."""
    if not d > 0:
        raise ValueError("d must be positive")
    v = f.values
    out = np.zeros(v.shape, dtype=np.uint8)
    r = f.reachable
    out[r] = np.floor(np.mod(v[r], d) / d * 255).astype(np.uint8)
    return out


def class_rgb(graph: RegionGraph, classes: dict, obstacle: np.ndarray | None = None) -> np.ndarray:
    h, w = graph.labels.shape
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[:] = UNREACHABLE_COLOR
    if obstacle is not None:
        img[obstacle] = OBSTACLE_COLOR
    for r in graph.regions:
        light, dark = CLASS_COLORS[classes[r.id]]
        img[r.mask] = light if r.band_index % 2 == 0 else dark
    return img


def write_field_pgm(f, path, scale: int = 1):
    Path(path).write_bytes(pgm_bytes(field_gray(f), scale))


def write_modulo_pgm(f, d: float, path, scale: int = 1):
    Path(path).write_bytes(pgm_bytes(modulo_gray(f, d), scale))


def write_class_ppm(graph, classes, path, obstacle=None, scale: int = 1):
    Path(path).write_bytes(ppm_bytes(class_rgb(graph, classes, obstacle), scale))


def _outline(mask: np.ndarray, px: float, color: str, width: float = 1.0) -> list:
    """SVG line segments along the boundary of a boolean cell mask."""
    m = np.pad(mask, 1)
    segs = []
    ys, xs = np.nonzero(m[1:-1, 1:-1] & ~m[:-2, 1:-1])
    segs += [(x, y, x + 1, y) for x, y in zip(xs, ys)]
    ys, xs = np.nonzero(m[1:-1, 1:-1] & ~m[2:, 1:-1])
    segs += [(x, y + 1, x + 1, y + 1) for x, y in zip(xs, ys)]
    ys, xs = np.nonzero(m[1:-1, 1:-1] & ~m[1:-1, :-2])
    segs += [(x, y, x, y + 1) for x, y in zip(xs, ys)]
    ys, xs = np.nonzero(m[1:-1, 1:-1] & ~m[1:-1, 2:])
    segs += [(x + 1, y, x + 1, y + 1) for x, y in zip(xs, ys)]
    if not segs:
        return []
    d = " ".join(f"M{a * px:g} {b * px:g}L{c * px:g} {e * px:g}" for a, b, c, e in segs)
    return [f'<path d="{d}" stroke="{color}" stroke-width="{width}" fill="none"/>']


def svg_routes(scenario, rs, paths: dict | None = None, px: float = 4.0) -> str:
    """Obstacles, origin/destination/intermediate outlines and optional
    polylines ``paths`` (route id -> list of (x_m, y_m))."""
    w, h = scenario.width * px, scenario.height * px
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:g}" height="{h:g}" '
           f'viewBox="0 0 {w:g} {h:g}">',
           f'<rect width="{w:g}" height="{h:g}" fill="black"/>']
    ys, xs = np.nonzero(scenario.obstacle)
    out += [f'<rect x="{x * px:g}" y="{y * px:g}" width="{px:g}" height="{px:g}" fill="#803030"/>'
            for x, y in zip(xs, ys)]
    out += _outline(scenario.obstacle, px, "red")
    for a in scenario.origins:
        out += _outline(a.mask(scenario.width, scenario.height), px, "gray", 2)
    out += _outline(scenario.area_mask(rs.destination), px, "lime", 2)
    for k, a in enumerate(rs.areas.values()):
        out += _outline(a.mask, px, _LEG_COLORS[k % len(_LEG_COLORS)], 2)
        ys, xs = np.nonzero(a.mask)
        out.append(f'<text x="{xs.mean() * px:.1f}" y="{ys.mean() * px:.1f}" fill="white" '
                   f'font-size="{3 * px:g}" text-anchor="middle">{a.id}</text>')
    scale = px / scenario.cell_size
    for k, (rid, pts) in enumerate(sorted((paths or {}).items())):
        if len(pts) < 2:
            continue
        coords = " ".join(f"{x * scale:.1f},{y * scale:.1f}" for x, y in pts)
        color = _LEG_COLORS[k % len(_LEG_COLORS)]
        out.append(f'<polyline points="{coords}" stroke="{color}" stroke-width="1.5" fill="none">'
                   f'<title>route {rid}</title></polyline>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_convergence(histories: dict, path, route_labels=None):
    """Weighted mean/SD, route probabilities and route travel times against
    iteration for one or more labelled assignment histories."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(3, 1, figsize=(7, 10), sharex=True)
    markers = ["o", "x", "s", "^"]
    for j, (label, hist) in enumerate(histories.items()):
        it = [r.iteration for r in hist.records]
        mk = markers[j % len(markers)]
        axes[0].plot(it, [r.weighted_mean for r in hist.records], marker=mk, label=f"{label} mean")
        axes[0].plot(it, [r.weighted_sd for r in hist.records], marker=mk, ls="--", label=f"{label} SD")
        probs = np.array([r.probs_after for r in hist.records])
        tts = np.array([r.mean_tt for r in hist.records])
        names = route_labels or [f"route {rid}" for rid in hist.route_ids]
        for k in range(probs.shape[1]):
            axes[1].plot(it, probs[:, k], marker=mk, ms=3, color=f"C{k}", label=f"{names[k]} ({label})")
            axes[2].plot(it, tts[:, k], marker=mk, ms=3, color=f"C{k}")
    axes[0].set_ylabel("travel time [s]")
    axes[0].legend(fontsize=7)
    axes[1].set_ylabel("route probability")
    axes[1].legend(fontsize=6, ncol=2)
    axes[2].set_ylabel("mean travel time [s]")
    axes[2].set_xlabel("iteration")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
