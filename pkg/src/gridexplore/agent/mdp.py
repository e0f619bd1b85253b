"""State encoding, goal classification, reward and epsilon-greedy selection."""

from __future__ import annotations

from enum import Enum

import numpy as np

from ..actions import Action
from ..mapping import FREE, OCCUPIED, OccupancyGrid, Pose
from ..planning import astar, obstacle_distance
from .config import RewardConfig

# belief channel values
BELIEF_UNKNOWN, BELIEF_FREE, BELIEF_OCCUPIED = 0.5, 0.0, 1.0


class GoalClass(str, Enum):
    SAFE = "safe"
    IN_UNKNOWN = "in_unknown"
    TOO_CLOSE = "too_close"
    UNREACHABLE = "unreachable"
    TERMINAL = "terminal"
    STALL = "stall"


def _stamp(channel: np.ndarray, cell, block: int) -> None:
    x, y = cell
    r = block // 2
    h, w = channel.shape
    channel[max(y - r, 0):min(y + r + 1, h), max(x - r, 0):min(x + r + 1, w)] = 1.0


def encode_state(grid: OccupancyGrid, pose: Pose, last_goal=None, block: int = 5) -> np.ndarray:
    """3xHxW input: belief map, current-position block, last-goal block."""
    state = np.zeros((3, grid.height, grid.width), dtype=np.float32)
    belief = state[0]
    belief[:] = BELIEF_UNKNOWN
    belief[grid.state == FREE] = BELIEF_FREE
    belief[grid.state == OCCUPIED] = BELIEF_OCCUPIED
    _stamp(state[1], pose, block)
    if last_goal is not None:
        _stamp(state[2], last_goal, block)
    return state


def plan_goal(grid: OccupancyGrid, pose: Pose, goal, robot_radius: int):
    """Classify ``goal`` and return ``(GoalClass, Path | None)``.

    Checks in order: not known-free, closer than ``robot_radius`` (Chebyshev)
    to a known obstacle, no path under the same clearance.
    """
    gx, gy = goal
    if not grid.is_free(gx, gy):
        return GoalClass.IN_UNKNOWN, None
    if obstacle_distance(grid)[gy, gx] < robot_radius:
        return GoalClass.TOO_CLOSE, None
    path = astar(grid, tuple(pose), goal, clearance=robot_radius)
    if path is None:
        return GoalClass.UNREACHABLE, None
    return GoalClass.SAFE, path


def classify_goal(grid: OccupancyGrid, goal, robot_radius: int, pose: Pose) -> GoalClass:
    return plan_goal(grid, pose, goal, robot_radius)[0]


def compute_reward(prev_entropy: float, new_entropy: float, traveled_m: float,
                   classification: GoalClass, action: Action, rho: float,
                   cfg: RewardConfig | None = None) -> float:
    cfg = cfg or RewardConfig()
    if action.is_terminal:
        return cfg.terminal_success if rho > cfg.rho_threshold else cfg.terminal_failure
    if classification != GoalClass.SAFE:
        return cfg.unsafe_penalty
    return cfg.alpha * (prev_entropy - new_entropy - traveled_m)


def select_action(q: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties go to the lowest index."""
    q = np.asarray(q).ravel()
    if rng.random() < epsilon:
        return int(rng.integers(len(q)))
    return int(np.argmax(q))


def valid_goal_mask(grid: OccupancyGrid, pose: Pose, space, robot_radius: int) -> np.ndarray:
    """Boolean mask over the action space; the terminal action is always valid."""
    mask = np.ones(len(space), dtype=bool)
    for i in range(space.n_goals):
        mask[i] = plan_goal(grid, pose, space.cell(i), robot_radius)[0] == GoalClass.SAFE
    return mask

