import numpy as np
import pytest

from gridexplore.mapping import FREE, OCCUPIED, UNKNOWN, OccupancyGrid
from gridexplore.world import WorldMap


def box_world(width, height, resolution=0.05):
    occ = np.zeros((height, width), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return occ


@pytest.fixture
def open_world():
    return WorldMap(box_world(40, 40))


def random_belief(rng, h, w, p=(0.3, 0.5, 0.2)):
    """Random three-state belief grid for oracle comparisons."""
    state = rng.choice([UNKNOWN, FREE, OCCUPIED], size=(h, w), p=p).astype(np.int8)
    return OccupancyGrid.from_states(state)


def bfs_component(free, start):
    """Plain 8-connected flood fill (test oracle)."""
    h, w = free.shape
    seen = {start}
    stack = [start]
    while stack:
        x, y = stack.pop()
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                nx, ny = x + dx, y + dy
                if 0 <= nx < w and 0 <= ny < h and free[ny, nx] and (nx, ny) not in seen:
                    seen.add((nx, ny))
                    stack.append((nx, ny))
    return seen


ACCEPTANCE = {}   # criterion number -> (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
