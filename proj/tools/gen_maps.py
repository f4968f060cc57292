#!/usr/bin/env python3
"""Writes the bundled test maps under data/maps.

Maps are built as dense class grids and saved in the run-length layer format
the loader reads. Rerun after editing a layout; demos must then be
re-verified with `ccpt demo-verify`.
"""

import json
import pathlib

EMPTY, SOLID, CLIMB = 0, 1, 2


class Grid:
    def __init__(self, name, nx, ny, nz):
        self.name = name
        self.nx, self.ny, self.nz = nx, ny, nz
        self.cells = [[[EMPTY] * nx for _ in range(nz)] for _ in range(ny)]

    def box(self, lo, hi, value):
        for y in range(lo[1], hi[1] + 1):
            for z in range(lo[2], hi[2] + 1):
                for x in range(lo[0], hi[0] + 1):
                    self.cells[y][z][x] = value

    def layer(self, y):
        flat = [c for row in self.cells[y] for c in row]
        tokens = []
        i = 0
        while i < len(flat):
            j = i
            while j < len(flat) and flat[j] == flat[i]:
                j += 1
            run = j - i
            tokens.append(f"{flat[i]}*{run}" if run > 1 else str(flat[i]))
            i = j
        return " ".join(tokens)

    def document(self, spawn, goals, bugs=(), platforms=(), intended=()):
        return {
            "format_version": 1,
            "name": self.name,
            "dims": [self.nx, self.ny, self.nz],
            "voxels": [self.layer(y) for y in range(self.ny)],
            "spawn": list(spawn),
            "goals": list(goals),
            "bugs": list(bugs),
            "platforms": list(platforms),
            "intended": [list(v) for v in intended],
        }


def testmap_area1():
    # Walled goal room entered over the south wall by a ladder near the spawn.
    # The missing collision sits on the far (north) wall, so the bug route is
    # longer than the intended one.
    g = Grid("testmap_area1", 13, 10, 17)
    g.box((0, 0, 0), (12, 0, 16), SOLID)
    g.box((3, 1, 8), (9, 5, 8), SOLID)    # south wall
    g.box((3, 1, 8), (3, 5, 14), SOLID)   # west wall
    g.box((9, 1, 8), (9, 5, 14), SOLID)   # east wall
    g.box((3, 1, 14), (9, 5, 14), SOLID)  # north wall
    g.box((7, 1, 8), (7, 5, 8), CLIMB)    # ladder on the outer face of the south wall
    return g.document(
        spawn=(6, 1, 2),
        goals=[{"id": 0, "active": True, "boxes": [[[5, 1, 9], [7, 1, 10]]]}],
        bugs=[
            {"kind": "missing_collision", "voxels": [[6, 1, 14]]},
            {"kind": "infinite_jump_glitch", "boxes": [[[10, 1, 9], [11, 7, 11]]]},
        ],
        platforms=[{"footprint": [[1, 1, 1], [2, 1, 1]], "axis": "y", "amplitude": 2, "period": 8}],
        # Without bugs the only way into the room is over the top of a wall.
        intended=[(x, y, z) for y in range(6, 10) for z in range(8, 15) for x in range(3, 10)
                  if x in (3, 9) or z in (8, 14)],
    )


def testmap_area2():
    # Spawn west of a dividing wall; the goal sits on a plateau in the east.
    g = Grid("testmap_area2", 13, 9, 13)
    g.box((0, 0, 0), (12, 0, 12), SOLID)
    g.box((5, 1, 0), (5, 5, 12), SOLID)    # dividing wall
    g.box((5, 1, 1), (5, 5, 2), EMPTY)     # door
    g.box((8, 1, 8), (11, 5, 11), SOLID)   # plateau
    g.box((9, 1, 7), (10, 2, 7), SOLID)    # step below the plateau
    return g.document(
        spawn=(2, 1, 6),
        goals=[{"id": 0, "active": True, "boxes": [[[9, 6, 9], [10, 6, 10]]]}],
        bugs=[
            {"kind": "unintended_climbable", "boxes": [[[9, 1, 11], [10, 5, 11]]]},
            {"kind": "missing_collision", "voxels": [[5, 1, 10]]},
        ],
        intended=[(5, 1, 1), (5, 1, 2), (5, 2, 1), (5, 2, 2), (5, 3, 1), (5, 3, 2), (5, 4, 1), (5, 4, 2),
                  (5, 5, 1), (5, 5, 2), (9, 3, 7), (10, 3, 7)],
    )


def corridor():
    # One voxel wide, with a single hurdle to jump.
    g = Grid("corridor", 10, 4, 1)
    g.box((0, 0, 0), (9, 0, 0), SOLID)
    g.box((4, 1, 0), (4, 1, 0), SOLID)
    return g.document(spawn=(0, 1, 0), goals=[{"id": 0, "active": True, "boxes": [[[8, 1, 0], [9, 1, 0]]]}])


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "maps"
    out.mkdir(parents=True, exist_ok=True)
    for doc in (testmap_area1(), testmap_area2(), corridor()):
        path = out / f"{doc['name']}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        print(path)


if __name__ == "__main__":
    main()
