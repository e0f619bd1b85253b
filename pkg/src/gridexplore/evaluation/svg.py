"""Deterministic SVG renders of belief grids, Q-value maps and trajectories.

Coordinates are in cell units (``viewBox``); ``cell_px`` only sets the
displayed size.
"""

from __future__ import annotations

import numpy as np

from ..mapping import FREE, OCCUPIED

GRAY, WHITE, BLACK = "#808080", "#ffffff", "#000000"


def _header(width, height, cell_px):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width * cell_px}" '
            f'height="{height * cell_px}" viewBox="0 0 {width} {height}" shape-rendering="crispEdges">\n')


def _grid_body(state: np.ndarray) -> list:
    h, w = state.shape
    parts = [f'<rect x="0" y="0" width="{w}" height="{h}" fill="{GRAY}"/>\n']
    for y in range(h):
        row = state[y]
        x = 0
        while x < w:
            v = row[x]
            end = x + 1
            while end < w and row[end] == v:
                end += 1
            if v == FREE or v == OCCUPIED:
                colour = WHITE if v == FREE else BLACK
                parts.append(f'<rect x="{x}" y="{y}" width="{end - x}" height="1" fill="{colour}"/>\n')
            x = end
    return parts


def render_grid_svg(state: np.ndarray, cell_px: int = 4) -> str:
    """White = known free, gray = unknown, black = known occupied."""
    state = np.asarray(state)
    h, w = state.shape
    return "".join([_header(w, h, cell_px), *_grid_body(state), "</svg>\n"])


def heat_colour(v: float) -> str:
    """Blue (0) to red (1)."""
    r = int(round(255 * v))
    b = 255 - r
    return f"#{r:02x}40{b:02x}"


def normalise(values: np.ndarray) -> np.ndarray:
    """Min-max scaling to [0, 1]; a constant vector maps to 0.5."""
    values = np.asarray(values, dtype=float)
    lo, hi = values.min(), values.max()
    if not hi > lo:
        return np.full(values.shape, 0.5)
    return (values - lo) / (hi - lo)


def render_q_svg(q: np.ndarray, rows: int, cols: int, stride: int, cell_px: int = 4) -> str:
    """Heat map of the point-action Q-values on their lattice; the terminal
    value (last entry) is printed underneath."""
    q = np.asarray(q, dtype=float).ravel()
    if q.size != rows * cols + 1:
        raise ValueError(f"expected {rows * cols + 1} Q-values, got {q.size}")
    w, h = cols * stride, rows * stride
    label_h = stride
    parts = [_header(w, h + label_h, cell_px)]
    norm = normalise(q[:-1]) if rows * cols else np.zeros(0)
    for k, v in enumerate(norm):
        i, j = divmod(k, cols)
        parts.append(f'<rect x="{j * stride}" y="{i * stride}" width="{stride}" height="{stride}" '
                     f'fill="{heat_colour(v)}"/>\n')
    parts.append(f'<text x="1" y="{h + label_h - 2}" font-size="{max(stride // 2, 2)}" '
                 f'font-family="monospace">terminal {q[-1]:.4g}</text>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def render_trajectory_svg(state: np.ndarray, trajectory, cell_px: int = 4) -> str:
    """Belief grid with the robot path as a polyline and a marker per decision."""
    state = np.asarray(state)
    h, w = state.shape
    pts = [(x + 0.5, y + 0.5) for x, y in trajectory]
    parts = [_header(w, h, cell_px), *_grid_body(state)]
    if pts:
        coords = " ".join(f"{x:g},{y:g}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="#d02020" stroke-width="0.4"/>\n')
        for k, (x, y) in enumerate(pts):
            colour = "#20a020" if k == 0 else "#d02020"
            parts.append(f'<circle cx="{x:g}" cy="{y:g}" r="0.8" fill="{colour}"/>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def write_svg(text: str, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
