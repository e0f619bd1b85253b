"""Simulated lidar and the robot's occupancy belief.

Beams are traced with a supercover cell traversal from the robot's cell
centre. The traversal only depends on the beam angle, so it is computed once
per angle as a list of cell offsets and reused for every pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .world import WorldMap, free_cell_count

UNKNOWN, FREE, OCCUPIED = 0, 1, 2
DEFAULT_P_KNOWN = 0.999
_TIE = 1e-9


class Pose(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class LidarConfig:
    beam_count: int = 72
    max_range: float = 3.5
    angular_offset: float = 0.0

    def validate(self, resolution: float) -> None:
        if self.beam_count < 8:
            raise ValueError("beam_count must be >= 8")
        if self.max_range < 2 * resolution:
            raise ValueError("max_range must cover at least two cells")

    def angles(self) -> np.ndarray:
        k = np.arange(self.beam_count)
        return self.angular_offset + 2.0 * np.pi * k / self.beam_count


@dataclass
class LidarScan:
    """Per-beam angle, range (m) and hit flag.

    ``stop`` is the index into the beam's traversal of the cell where the beam
    ended: the hit cell, a wall beyond range, or the traversal length.
    """
    angles: np.ndarray
    ranges: np.ndarray
    hits: np.ndarray
    stop: np.ndarray
    max_range: float
    resolution: float

    def __len__(self):
        return len(self.angles)


def beam_traversal(angle: float, max_cells: float):
    """Cells crossed by a ray from the origin cell centre, up to ``max_cells``.

    Returns ``(offsets, center_dist, entry)``: (L, 2) integer ``(dx, dy)``
    offsets with rows growing downward, the Euclidean distance of each cell
    centre, and the ray parameter at which the cell is entered. When the ray
    passes exactly through a cell corner both side cells are included.
    """
    return _traversal(round(float(angle), 15), float(max_cells))


@lru_cache(maxsize=4096)
def _traversal(angle, max_cells):
    # round so mirrored angles give bit-identical magnitudes
    dx = round(math.cos(angle), 12)
    dy = round(-math.sin(angle), 12)
    sx = (dx > 0) - (dx < 0)
    sy = (dy > 0) - (dy < 0)
    ax, ay = abs(dx), abs(dy)
    t_dx = 1.0 / ax if ax else math.inf
    t_dy = 1.0 / ay if ay else math.inf
    t_x = 0.5 * t_dx
    t_y = 0.5 * t_dy
    x = y = 0
    cells = [(0, 0)]
    entry = [0.0]
    while True:
        if abs(t_x - t_y) <= _TIE:
            t = t_x
            if t > max_cells:
                break
            side = sorted([(x + sx, y), (x, y + sy)], key=lambda c: c[0] ** 2 + c[1] ** 2)
            for c in side:
                cells.append(c)
                entry.append(t)
            x += sx
            y += sy
            cells.append((x, y))
            entry.append(t)
            t_x += t_dx
            t_y += t_dy
        elif t_x < t_y:
            if t_x > max_cells:
                break
            x += sx
            cells.append((x, y))
            entry.append(t_x)
            t_x += t_dx
        else:
            if t_y > max_cells:
                break
            y += sy
            cells.append((x, y))
            entry.append(t_y)
            t_y += t_dy
    offsets = np.array(cells, dtype=np.int64)
    dist = np.hypot(offsets[:, 0], offsets[:, 1])
    return offsets, dist, np.array(entry)


@lru_cache(maxsize=64)
def _beam_table(angles: tuple, max_cells: float):
    traversals = [_traversal(a, max_cells) for a in angles]
    n = len(traversals)
    length = max(len(t[0]) for t in traversals)
    offsets = np.zeros((n, length, 2), dtype=np.int64)
    dist = np.full((n, length), np.inf)
    lengths = np.zeros(n, dtype=np.int64)
    for i, (off, d, _) in enumerate(traversals):
        offsets[i, :len(off)] = off
        dist[i, :len(off)] = d
        lengths[i] = len(off)
    return offsets, dist, lengths


def _table_for(angles, max_range, resolution):
    key = tuple(round(float(a), 15) for a in angles)
    return _beam_table(key, float(max_range) / resolution)


def raycast(world: WorldMap, pose: Pose, cfg: LidarConfig) -> LidarScan:
    if not world.is_free(pose.x, pose.y):
        raise ValueError(f"pose {tuple(pose)} is not on a free world cell")
    cfg.validate(world.resolution)
    angles = cfg.angles()
    max_cells = cfg.max_range / world.resolution
    offsets, dist, lengths = _table_for(angles, cfg.max_range, world.resolution)
    xs = pose.x + offsets[..., 0]
    ys = pose.y + offsets[..., 1]
    inside = (xs >= 0) & (xs < world.width) & (ys >= 0) & (ys < world.height)
    blocked = ~inside | world.occupied[np.clip(ys, 0, world.height - 1), np.clip(xs, 0, world.width - 1)]
    blocked &= np.arange(offsets.shape[1]) < lengths[:, None]
    any_block = blocked.any(axis=1)
    first = np.where(any_block, blocked.argmax(axis=1), lengths)
    stop_dist = dist[np.arange(len(angles)), np.minimum(first, offsets.shape[1] - 1)]
    hits = any_block & (stop_dist <= max_cells + _TIE)
    ranges = np.where(hits, stop_dist * world.resolution, cfg.max_range)
    return LidarScan(angles, ranges, hits, first, cfg.max_range, world.resolution)


class OccupancyGrid:
    """Belief map with three cell states; probabilities derive from ``p_known``."""

    def __init__(self, width: int, height: int, resolution: float, p_known: float = DEFAULT_P_KNOWN):
        if not 0.5 < p_known < 1.0:
            raise ValueError("p_known must lie in (0.5, 1)")
        self.width = width
        self.height = height
        self.resolution = resolution
        self.p_known = p_known
        self.state = np.zeros((height, width), dtype=np.int8)

    @classmethod
    def for_world(cls, world: WorldMap, p_known: float = DEFAULT_P_KNOWN) -> "OccupancyGrid":
        return cls(world.width, world.height, world.resolution, p_known)

    @classmethod
    def from_states(cls, state, resolution: float = 0.05, p_known: float = DEFAULT_P_KNOWN):
        state = np.asarray(state, dtype=np.int8)
        grid = cls(state.shape[1], state.shape[0], resolution, p_known)
        grid.state[:] = state
        return grid

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid.from_states(self.state.copy(), self.resolution, self.p_known)

    @property
    def shape(self):
        return self.state.shape

    def known_free(self) -> np.ndarray:
        return self.state == FREE

    def known_occupied(self) -> np.ndarray:
        return self.state == OCCUPIED

    def unknown(self) -> np.ndarray:
        return self.state == UNKNOWN

    def is_free(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height and self.state[y, x] == FREE

    def known_count(self) -> int:
        return int(np.count_nonzero(self.state))

    def probabilities(self) -> np.ndarray:
        p = np.full(self.state.shape, 0.5)
        p[self.state == FREE] = 1.0 - self.p_known
        p[self.state == OCCUPIED] = self.p_known
        return p

    def mark_free(self, xs, ys) -> None:
        sub = self.state[ys, xs]
        self.state[ys, xs] = np.where(sub == OCCUPIED, OCCUPIED, FREE)

    def mark_occupied(self, xs, ys) -> None:
        self.state[ys, xs] = OCCUPIED

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (self.resolution == other.resolution and self.p_known == other.p_known
                and np.array_equal(self.state, other.state))


def integrate_scan(grid: OccupancyGrid, pose: Pose, scan: LidarScan) -> OccupancyGrid:
    """Write a scan into ``grid`` in place and return it.

    Cells strictly between the robot and each beam end become free; hit cells
    become occupied. Occupied cells are never downgraded to free.
    """
    offsets, _, _ = _table_for(scan.angles, scan.max_range, scan.resolution)
    n, length = offsets.shape[:2]
    idx = np.arange(length)
    free_sel = (idx >= 1) & (idx < scan.stop[:, None])
    xs = pose.x + offsets[..., 0]
    ys = pose.y + offsets[..., 1]
    inside = (xs >= 0) & (xs < grid.width) & (ys >= 0) & (ys < grid.height)
    free_sel &= inside
    grid.mark_free(xs[free_sel], ys[free_sel])
    hit_rows = np.nonzero(scan.hits)[0]
    if len(hit_rows):
        hx = xs[hit_rows, scan.stop[hit_rows]]
        hy = ys[hit_rows, scan.stop[hit_rows]]
        grid.mark_occupied(hx, hy)
    return grid


def observe(world: WorldMap, grid: OccupancyGrid, pose: Pose, cfg: LidarConfig) -> OccupancyGrid:
    """Scan from ``pose``; the robot also knows the cell it stands on is free."""
    integrate_scan(grid, pose, raycast(world, pose, cfg))
    grid.mark_free(np.array([pose.x]), np.array([pose.y]))
    return grid


def bernoulli_entropy(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log(p) + (1 - p) * np.log(1 - p))
    return np.where((p <= 0) | (p >= 1), 0.0, h)


def entropy(grid: OccupancyGrid) -> float:
    """Map entropy in nats: sum of per-cell Bernoulli entropies."""
    n_unknown = np.count_nonzero(grid.state == UNKNOWN)
    n_known = grid.state.size - n_unknown
    return float(n_unknown * math.log(2.0) + n_known * float(bernoulli_entropy(grid.p_known)))


def explored_region_rate(grid: OccupancyGrid, world: WorldMap) -> float:
    if grid.shape != world.occupied.shape:
        raise ValueError(f"grid {grid.shape} and world {world.occupied.shape} differ in size")
    explored = np.count_nonzero((grid.state == FREE) & ~world.occupied)
    return explored / free_cell_count(world)
