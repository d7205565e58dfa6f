#!/usr/bin/env python3
"""Regenerates data/baseline_6x6.json and data/baseline_5x5.json.

Nodes are (row, col) on a row-major grid with row 0 on the ground and node 0
(bottom-left) carrying the payload. Every listed edge is solid; unlisted edges
are void.
"""
import json
import pathlib
import sys


def node(cols, r, c):
    return r * cols + c


class Layout:
    def __init__(self, rows, cols):
        self.rows, self.cols = rows, cols
        self.edges = {}

    def add(self, a, b, state):
        i, j = sorted((node(self.cols, *a), node(self.cols, *b)))
        prev = self.edges.get((i, j))
        if prev is not None and prev != state:
            sys.exit(f"edge {(i, j)} assigned twice: {prev} vs {state}")
        self.edges[(i, j)] = state

    def horizontal(self, r, c, state="skeleton"):
        self.add((r, c), (r, c + 1), state)

    def vertical(self, r, c, state="actuator"):
        self.add((r, c), (r + 1, c), state)

    def diagonal(self, r, c, state="skeleton"):
        self.add((r, c), (r + 1, c + 1), state)

    def anti(self, r, c, state="skeleton"):
        self.add((r, c + 1), (r + 1, c), state)

    def dump(self, description):
        total = 2 * (self.rows - 1) * (self.cols - 1) + (self.rows - 1) * self.cols + self.rows * (self.cols - 1)
        solid = len(self.edges)
        act = sum(1 for s in self.edges.values() if s == "actuator")
        return {
            "rows": self.rows,
            "cols": self.cols,
            "description": description,
            "num_edges": total,
            "V": solid / total,
            "V_act": act / total,
            "edges": [{"i": i, "j": j, "state": s} for (i, j), s in sorted(self.edges.items())],
        }


def baseline_6x6():
    g = Layout(6, 6)
    # Three legs, each one cell wide and three cells tall: vertical actuators
    # on both sides, a passive rung at every level below the body and one
    # passive brace per cell.
    for c in (0, 2, 4):
        for r in range(3):
            g.vertical(r, c)
            g.vertical(r, c + 1)
            g.horizontal(r, c)
            g.diagonal(r, c)
    # Body: one cell row with passive chords, vertical actuators throughout
    # and braces above each leg.
    for c in range(5):
        g.horizontal(3, c)
        g.horizontal(4, c)
    for c in range(6):
        g.vertical(3, c)
    for c in (0, 2, 4):
        g.diagonal(3, c)
    return g.dump("three-legged baseline: legs at cell columns 0, 2, 4 with vertical actuators "
                  "and one brace per cell; braced body strip on node rows 3-4; top row void")


def baseline_5x5():
    g = Layout(5, 5)
    # Rear and front legs, two cells tall.
    for c in (0, 3):
        for r in range(2):
            g.vertical(r, c)
            g.vertical(r, c + 1)
            g.horizontal(r, c)
            g.diagonal(r, c)
    # Middle leg: a single actuated column braced to the front leg.
    g.vertical(0, 2)
    g.vertical(1, 2)
    g.diagonal(1, 2)
    # Body strip on node rows 2-3.
    for c in range(4):
        g.horizontal(2, c)
        g.horizontal(3, c)
    for c in range(5):
        g.vertical(2, c)
    for c in range(4):
        if c != 2:
            g.diagonal(2, c)
    g.anti(2, 2)
    return g.dump("three-legged baseline: legs at cell columns 0 and 3 plus a single actuated "
                  "middle column at node column 2; braced body strip on node rows 2-3; top row void")


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data"
    out.mkdir(exist_ok=True)
    for name, layout in (("baseline_6x6.json", baseline_6x6()), ("baseline_5x5.json", baseline_5x5())):
        (out / name).write_text(json.dumps(layout, indent=1) + "\n")
        print(f"{name}: {len(layout['edges'])} solid edges, V={layout['V']:.4f}, V_act={layout['V_act']:.4f}")


if __name__ == "__main__":
    main()
