"""Frontier extraction, clustering, the nearest-frontier baseline and
edge-segmentation labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .actions import TERMINAL, Action
from .mapping import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, Pose
from .planning import DEFAULT_CLEARANCE, cost_field

CONTOUR, FRONTIER, OTHER = 0, 1, 2
N_SEG_CLASSES = 3
DEFAULT_MIN_CLUSTER = 3
_K8 = np.ones((3, 3), dtype=bool)


@dataclass
class FrontierCluster:
    cells: list
    centroid: tuple[int, int]


def _touches(mask: np.ndarray) -> np.ndarray:
    """Cells with at least one ``mask`` cell among their 8 neighbours."""
    padded = np.pad(mask, 1)
    h, w = mask.shape
    out = np.zeros_like(mask)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx or dy:
                out |= padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    return out


def frontier_mask(grid: OccupancyGrid) -> np.ndarray:
    return (grid.state == FREE) & _touches(grid.state == UNKNOWN)


def detect_frontiers(grid: OccupancyGrid) -> set:
    """Known-free cells with an unknown 8-neighbour, as ``(x, y)`` tuples."""
    ys, xs = np.nonzero(frontier_mask(grid))
    return set(zip(xs.tolist(), ys.tolist()))


def cluster_frontiers(cells, min_cluster_size: int = DEFAULT_MIN_CLUSTER,
                      grid: OccupancyGrid | None = None) -> list:
    """8-connected components of ``cells`` with at least ``min_cluster_size`` members.

    The centroid is the rounded mean cell, snapped to the nearest member when
    ``grid`` is given and the rounded cell is not known-free. Clusters are
    ordered by their lowest linear cell index.
    """
    cells = sorted(cells, key=lambda c: (c[1], c[0]))
    if not cells:
        return []
    xs = np.array([c[0] for c in cells])
    ys = np.array([c[1] for c in cells])
    x0, y0 = xs.min(), ys.min()
    mask = np.zeros((ys.max() - y0 + 1, xs.max() - x0 + 1), dtype=bool)
    mask[ys - y0, xs - x0] = True
    labels, n = ndimage.label(mask, structure=_K8)
    member_label = labels[ys - y0, xs - x0]
    clusters = []
    for lab in range(1, n + 1):
        sel = member_label == lab
        if sel.sum() < min_cluster_size:
            continue
        cx, cy = xs[sel], ys[sel]
        members = list(zip(cx.tolist(), cy.tolist()))
        centroid = (int(np.floor(cx.mean() + 0.5)), int(np.floor(cy.mean() + 0.5)))
        if grid is not None and not grid.is_free(*centroid):
            d2 = (cx - centroid[0]) ** 2 + (cy - centroid[1]) ** 2
            k = int(np.argmin(d2))  # members are row-major, so ties go to the lowest index
            centroid = members[k]
        clusters.append(FrontierCluster(members, centroid))
    clusters.sort(key=lambda c: (c.cells[0][1], c.cells[0][0]))
    return clusters


def frontier_policy(grid: OccupancyGrid, pose: Pose, min_cluster_size: int = DEFAULT_MIN_CLUSTER,
                    clearance: int = DEFAULT_CLEARANCE):
    """Nearest reachable frontier centroid by path cost.

    Returns ``(action, stall)``. ``stall`` is set when the chosen centroid is
    the robot's own cell; the action is then terminal.
    """
    clusters = cluster_frontiers(detect_frontiers(grid), min_cluster_size, grid)
    if not clusters:
        return TERMINAL, False
    costs = cost_field(grid, tuple(pose), clearance)
    best = None
    for c in clusters:
        x, y = c.centroid
        cost = costs[y, x]
        if not np.isfinite(cost):
            continue
        key = (cost, y * grid.width + x)
        if best is None or key < best[0]:
            best = (key, c.centroid)
    if best is None:
        return TERMINAL, False
    if best[1] == tuple(pose):
        return TERMINAL, True
    return Action(best[1]), False


def segmentation_target(grid: OccupancyGrid) -> np.ndarray:
    """Per-cell labels: obstacle contour, frontier or other."""
    labels = np.full(grid.shape, OTHER, dtype=np.int64)
    contour = (grid.state == OCCUPIED) & _touches(grid.state == FREE)
    labels[contour] = CONTOUR
    labels[frontier_mask(grid)] = FRONTIER
    return labels
