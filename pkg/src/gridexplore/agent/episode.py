"""Decision agents and the sense-decide-plan-move episode loop."""

from __future__ import annotations

import numpy as np

from ..actions import Action, ActionSpace
from ..evaluation.logs import EpisodeLog, StepRecord
from ..frontier import frontier_policy, segmentation_target
from ..mapping import OccupancyGrid, Pose, entropy, explored_region_rate, observe
from ..nn import NetworkParams, q_values
from ..planning import execute_path
from ..world import WorldMap
from .config import RunConfig
from .learner import Learner
from .mdp import GoalClass, compute_reward, encode_state, plan_goal, select_action, valid_goal_mask
from .replay import Transition


class FrontierAgent:
    name = "frontier"

    def __init__(self, min_cluster_size: int = 3, clearance: int = 2):
        self.min_cluster_size = min_cluster_size
        self.clearance = clearance

    def decide(self, grid, pose, last_goal, epsilon, rng):
        action, stall = frontier_policy(grid, pose, self.min_cluster_size, self.clearance)
        return action, None, None, stall


class NetAgent:
    """Greedy / epsilon-greedy goal selection from a value network."""

    def __init__(self, params: NetworkParams, name: str | None = None, block: int = 5,
                 robot_radius: int = 2, mask_invalid: bool = False):
        self.params = params
        self.name = name or params.variant.lower()
        self.block = block
        self.robot_radius = robot_radius
        self.mask_invalid = mask_invalid
        self._spaces = {}

    def space(self, grid: OccupancyGrid) -> ActionSpace:
        key = grid.shape
        if key not in self._spaces:
            self._spaces[key] = ActionSpace(grid.height, grid.width, self.params.stride)
        return self._spaces[key]

    def decide(self, grid, pose, last_goal, epsilon, rng):
        space = self.space(grid)
        state = encode_state(grid, pose, last_goal, self.block)
        q = q_values(self.params, state)[0]
        if len(q) != len(space):
            raise ValueError(f"network emits {len(q)} Q-values for an action space of {len(space)}")
        choice = q
        if self.mask_invalid:
            mask = valid_goal_mask(grid, pose, space, self.robot_radius)
            choice = np.where(mask, q, -np.inf)
        index = select_action(choice, epsilon, rng)
        return space.action(index), index, q, False


def sample_start(world: WorldMap, rng: np.random.Generator) -> Pose:
    cells = world.free_cells()
    x, y = cells[rng.integers(len(cells))]
    return Pose(int(x), int(y))


def run_episode(world: WorldMap, agent, cfg: RunConfig, mode: str = "eval",
                rng: np.random.Generator | None = None, learner: Learner | None = None,
                start: Pose | None = None, episode_id: int = 0, map_name: str = "",
                epsilon: float | None = None, record_q: bool = False) -> EpisodeLog:
    """One exploration episode from an unknown map.

    ``mode="train"`` requires a ``learner``; transitions are stored and a
    learning step runs after every decision. In eval mode epsilon defaults to 0.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "train" and learner is None:
        raise ValueError("train mode needs a learner")
    rng = rng if rng is not None else np.random.default_rng(0)
    env, rcfg = cfg.env, cfg.reward
    lidar = env.lidar
    if start is None:
        start = sample_start(world, rng)
    pose = Pose(*start)
    grid = OccupancyGrid.for_world(world)
    observe(world, grid, pose, lidar)
    h_now = entropy(grid)
    rho = explored_region_rate(grid, world)
    log = EpisodeLog(episode_id, agent.name, map_name, tuple(pose), h_now, start_rho=rho)
    last_goal = None
    is_net = isinstance(agent, NetAgent)
    afcqn = is_net and agent.params.variant == "AFCQN"
    cap = cfg.train.max_decisions

    for t in range(cap):
        eps = learner.epsilon if mode == "train" else (epsilon or 0.0)
        state = encode_state(grid, pose, last_goal, env.position_block) if mode == "train" else None
        seg = segmentation_target(grid) if (mode == "train" and afcqn) else None
        action, index, q, stall = agent.decide(grid, pose, last_goal, eps, rng)
        if record_q and q is not None:
            log.q_maps.append(np.asarray(q, dtype=float).copy())
        traveled = 0.0
        h_prev = h_now
        if stall:
            cls = GoalClass.STALL
        elif action.is_terminal:
            cls = GoalClass.TERMINAL
        else:
            cls, path = plan_goal(grid, pose, action.goal, env.robot_radius)
            if cls == GoalClass.SAFE:
                grid, pose, traveled = execute_path(world, grid, path, lidar, env.sense_every)
                last_goal = action.goal
                h_now = entropy(grid)
                rho = explored_region_rate(grid, world)
        reward = compute_reward(h_prev, h_now, traveled, cls, action if not stall else Action.terminal(),
                                rho, rcfg)
        ends = stall or action.is_terminal
        done = ends or t == cap - 1
        log.steps.append(StepRecord(index, action.goal, cls.value, reward, h_now, rho, traveled, tuple(pose)))
        if mode == "train" and index is not None:
            next_state = encode_state(grid, pose, last_goal, env.position_block)
            learner.observe(Transition(state, index, reward, next_state, done, seg))
        if ends:
            log.terminated_by = "stall" if stall else "terminal"
            break
    else:
        log.terminated_by = "cap"
    log.final_state = grid.state.copy()
    return log
