"""Global planning on the belief map and path execution with en-route sensing."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .mapping import LidarConfig, OccupancyGrid, Pose, observe
from .world import WorldMap

SQRT2 = math.sqrt(2.0)
DEFAULT_CLEARANCE = 2
DEFAULT_SENSE_EVERY = 3

_MOVES = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass
class Path:
    cells: list = field(default_factory=list)
    total_cost: float = 0.0

    @property
    def start(self):
        return self.cells[0]

    @property
    def goal(self):
        return self.cells[-1]

    def __len__(self):
        return len(self.cells)


def step_cost(a, b) -> float:
    return SQRT2 if a[0] != b[0] and a[1] != b[1] else 1.0


def path_cost(cells) -> float:
    """Octile length computed from move counts so equal paths give equal floats."""
    diag = sum(1 for a, b in zip(cells, cells[1:]) if a[0] != b[0] and a[1] != b[1])
    axis = len(cells) - 1 - diag
    return axis + diag * SQRT2


def octile(ax, ay, bx, by) -> float:
    dx, dy = abs(ax - bx), abs(ay - by)
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def obstacle_distance(grid: OccupancyGrid) -> np.ndarray:
    """Chebyshev distance from each cell to the nearest known-occupied cell."""
    occ = grid.known_occupied()
    if not occ.any():
        return np.full(occ.shape, np.inf)
    return ndimage.distance_transform_cdt(~occ, metric="chessboard").astype(float)


def traversable(grid: OccupancyGrid, clearance: int = DEFAULT_CLEARANCE) -> np.ndarray:
    ok = grid.known_free()
    if clearance > 1:
        ok &= obstacle_distance(grid) >= clearance
    return ok


def astar(grid: OccupancyGrid, start, goal, clearance: int = DEFAULT_CLEARANCE) -> Path | None:
    """Optimal 8-connected path over known-free cells keeping ``clearance``.

    The start cell is exempt from the clearance rule (the robot is already
    there). Returns None when the goal is not known-free or cannot be reached.
    Ties are broken by lower f, then lower h, then lower linear cell index.
    """
    sx, sy = start
    gx, gy = goal
    if not grid.is_free(sx, sy):
        raise ValueError(f"start {tuple(start)} is not known-free")
    if not grid.is_free(gx, gy):
        return None
    ok = traversable(grid, clearance)
    ok[sy, sx] = True
    if not ok[gy, gx]:
        return None
    w, h = grid.width, grid.height
    ok_flat = ok.ravel().tolist()
    s, g = sy * w + sx, gy * w + gx
    best = {s: 0.0}
    parent = {s: -1}
    closed = set()
    h0 = octile(sx, sy, gx, gy)
    heap = [(h0, h0, s)]
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == g:
            return _reconstruct(parent, g, w)
        closed.add(cur)
        cy, cx = divmod(cur, w)
        gc = best[cur]
        for dx, dy in _MOVES:
            nx, ny = cx + dx, cy + dy
            if not (0 <= nx < w and 0 <= ny < h):
                continue
            n = ny * w + nx
            if not ok_flat[n] or n in closed:
                continue
            ng = gc + (SQRT2 if dx and dy else 1.0)
            if ng < best.get(n, math.inf):
                best[n] = ng
                parent[n] = cur
                hn = octile(nx, ny, gx, gy)
                heapq.heappush(heap, (ng + hn, hn, n))
    return None


def _reconstruct(parent, g, w) -> Path:
    cells = []
    cur = g
    while cur != -1:
        y, x = divmod(cur, w)
        cells.append((x, y))
        cur = parent[cur]
    cells.reverse()
    return Path(cells, path_cost(cells))


def cost_field(grid: OccupancyGrid, start, clearance: int = DEFAULT_CLEARANCE) -> np.ndarray:
    """Dijkstra path cost from ``start`` to every cell (inf where unreachable)."""
    w, h = grid.width, grid.height
    ok = traversable(grid, clearance)
    ok[start[1], start[0]] = True
    ok_flat = ok.ravel().tolist()
    dist = [math.inf] * (w * h)
    s = start[1] * w + start[0]
    dist[s] = 0.0
    heap = [(0.0, s)]
    while heap:
        d, cur = heapq.heappop(heap)
        if d > dist[cur]:
            continue
        cy, cx = divmod(cur, w)
        for dx, dy in _MOVES:
            nx, ny = cx + dx, cy + dy
            if not (0 <= nx < w and 0 <= ny < h):
                continue
            n = ny * w + nx
            if not ok_flat[n]:
                continue
            nd = d + (SQRT2 if dx and dy else 1.0)
            if nd < dist[n]:
                dist[n] = nd
                heapq.heappush(heap, (nd, n))
    return np.array(dist).reshape(h, w)


def path_length_m(path: Path, resolution: float) -> float:
    return path.total_cost * resolution


def execute_path(world: WorldMap, grid: OccupancyGrid, path: Path, lidar_cfg: LidarConfig,
                 sense_every: int = DEFAULT_SENSE_EVERY):
    """Walk ``path`` cell by cell, scanning at the start, every ``sense_every``
    cells and at the goal. ``grid`` is updated in place.

    Returns ``(grid, final_pose, traveled_m)``.
    """
    if sense_every < 1:
        raise ValueError("sense_every must be >= 1")
    last = len(path.cells) - 1
    for i, (x, y) in enumerate(path.cells):
        if world.occupied[y, x]:
            raise RuntimeError(f"path enters occupied world cell {(x, y)}")
        if i == 0 or i == last or i % sense_every == 0:
            observe(world, grid, Pose(x, y), lidar_cfg)
    x, y = path.cells[-1]
    return grid, Pose(x, y), path_length_m(path, world.resolution)
