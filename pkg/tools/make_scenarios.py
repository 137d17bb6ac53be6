"""Generate the bundled example scenario files (run from the repo root)."""
import json
from pathlib import Path

import numpy as np

OUT = Path("src/pedroute/scenarios")


class Canvas:
    def __init__(self, width_m, height_m, cell):
        self.cell = cell
        self.w = int(round(width_m / cell))
        self.h = int(round(height_m / cell))
        self.g = np.full((self.h, self.w), "#", dtype="<U1")
        self.legend = {}

    def _idx(self, x0, y0, x1, y1):
        c = self.cell
        return (slice(int(round(y0 / c)), int(round(y1 / c))),
                slice(int(round(x0 / c)), int(round(x1 / c))))

    def floor(self, x0, y0, x1, y1):
        self.g[self._idx(x0, y0, x1, y1)] = "."

    def wall(self, x0, y0, x1, y1):
        self.g[self._idx(x0, y0, x1, y1)] = "#"

    def area(self, ch, role, x0, y0, x1, y1):
        sl = self.g[self._idx(x0, y0, x1, y1)]
        sl[sl != "#"] = ch
        self.legend[ch] = {"role": role}

    def save(self, name):
        doc = {"cell_size_m": self.cell, "rows": ["".join(r) for r in self.g], "legend": self.legend}
        OUT.mkdir(parents=True, exist_ok=True)
        (OUT / f"{name}.json").write_text(json.dumps(doc, indent=0) + "\n")


def fig7():
    # single rectangular obstacle in a room; origin on top, destination at the bottom
    c = Canvas(30, 36, 0.25)
    c.floor(0.25, 0.25, 29.75, 35.75)
    c.wall(8, 14, 20, 18)
    c.area("a", "origin", 2, 0.25, 28, 2)
    c.area("d", "destination", 10, 34, 18, 35.75)
    c.save("fig07_single_obstacle")


def fig8():
    c = Canvas(30, 50, 0.25)
    c.floor(0.25, 0.25, 29.75, 49.75)
    c.wall(8, 14, 20, 18)
    c.wall(11, 30, 22, 34)
    c.area("a", "origin", 2, 0.25, 28, 2)
    c.area("d", "destination", 10, 48, 18, 49.75)
    c.save("fig08_two_obstacles")


def fig2():
    # obstacle off-centre, so the left way round is the shorter one
    c = Canvas(24, 30, 0.25)
    c.floor(0.25, 0.25, 23.75, 29.75)
    c.wall(6, 12, 20, 16)
    c.area("a", "origin", 1, 0.25, 23, 2)
    c.area("d", "destination", 1, 28, 23, 29.75)
    c.save("fig02_route_alternatives")


def fig3():
    # two origins on the left, one obstacle, destination on the right
    c = Canvas(40, 24, 0.25)
    c.floor(0.25, 0.25, 39.75, 23.75)
    c.wall(16, 6, 22, 18)
    c.area("a", "origin", 0.25, 1, 2, 5)
    c.area("b", "origin", 0.25, 15, 2, 23)
    c.area("d", "destination", 38, 8, 39.75, 16)
    c.save("fig03_two_origins")


def arcs(name, bottlenecks=()):
    """106 m straight corridor with an upper arc (20..60 m) and a lower arc
    (40..85 m), all 4 m wide; stubs narrow the straight to 2 m at ``bottlenecks``."""
    cw, hu, hl = 4, 8, 12
    c = Canvas(106, 2 * hl + 10, 0.5)
    y0 = c.h * c.cell / 2 - cw / 2
    c.floor(0.5, y0, 105.5, y0 + cw)
    top = y0 - hu
    c.floor(20, top, 20 + cw, y0)
    c.floor(60 - cw, top, 60, y0)
    c.floor(20, top, 60, top + cw)
    bot = y0 + cw + hl
    c.floor(40, y0 + cw, 40 + cw, bot)
    c.floor(85 - cw, y0 + cw, 85, bot)
    c.floor(40, bot - cw, 85, bot)
    for bx in bottlenecks:
        c.wall(bx, y0, bx + 1, y0 + 1)
        c.wall(bx, y0 + cw - 1, bx + 1, y0 + cw)
    c.area("o", "origin", 0.5, y0, 4, y0 + cw)
    c.area("d", "destination", 103, y0, 105.5, y0 + cw)
    c.save(name)


def twin_corridors():
    # mirror-symmetric about the horizontal centre line
    c = Canvas(40, 13, 0.5)
    c.floor(0.5, 0.5, 39.5, 12.5)
    c.wall(8, 3.5, 32, 9.5)
    c.area("o", "origin", 0.5, 4.5, 3, 8.5)
    c.area("d", "destination", 37, 4.5, 39.5, 8.5)
    c.save("twin_corridors")


if __name__ == "__main__":
    fig2()
    fig3()
    fig7()
    fig8()
    arcs("fig10_nested_arcs")
    arcs("fig11_example_bottlenecks", bottlenecks=(28, 36))
    twin_corridors()
