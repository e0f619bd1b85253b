"""Training and evaluation drivers over a set of maps."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..nn import NetworkParams, init_params
from ..rng import rng_for
from ..world import WorldMap
from .config import RunConfig
from .episode import FrontierAgent, NetAgent, run_episode, sample_start
from .learner import Learner

log = logging.getLogger(__name__)


def start_pose(world: WorldMap, seed: int, episode: int):
    """Start cell for ``episode``; identical for every agent given the seed."""
    return sample_start(world, rng_for(seed, "start-pose", episode))


def make_agent(name: str, cfg: RunConfig, params: NetworkParams | None = None):
    env = cfg.env
    if name == "frontier":
        return FrontierAgent(env.min_cluster_size, env.robot_radius)
    if params is None:
        raise ValueError(f"agent {name!r} needs network parameters")
    if params.variant.lower() != name:
        raise ValueError(f"agent {name!r} given {params.variant} parameters")
    return NetAgent(params, name, env.position_block, env.robot_radius, env.eval_mask)


def train(maps, variant: str, cfg: RunConfig, progress=None):
    """Train a fresh network on ``maps`` (list of ``(name, WorldMap)``).

    Episode ``k`` runs on map ``k % len(maps)``. Returns ``(params, logs)``.
    """
    cfg.validate()
    tc = cfg.train
    variant = variant.upper()
    shapes = {w.occupied.shape for _, w in maps}
    input_hw = None
    if variant == "DQN":
        if len(shapes) != 1:
            raise ValueError(f"DQN needs maps of a single size, got {sorted(shapes)}")
        input_hw = shapes.pop()
    params = init_params(variant, rng_for(tc.seed, "init"), input_hw=input_hw)
    learner = Learner(params, tc, rng_for(tc.seed, "replay"))
    agent = NetAgent(params, variant.lower(), cfg.env.position_block, cfg.env.robot_radius)
    eps_rng = rng_for(tc.seed, "epsilon-greedy")
    logs = []
    for ep in range(tc.episodes):
        name, world = maps[ep % len(maps)]
        ep_log = run_episode(world, agent, cfg, "train", eps_rng, learner,
                             start=start_pose(world, tc.seed, ep), episode_id=ep, map_name=name)
        logs.append(ep_log)
        if progress is not None:
            progress(ep, ep_log, learner)
    return learner.params, logs


def _eval_one(args):
    world, name, agent, cfg, seed, ep, record_q = args
    rng = rng_for(seed, "epsilon-greedy", ep)
    return run_episode(world, agent, cfg, "eval", rng, start=start_pose(world, seed, ep),
                       episode_id=ep, map_name=name, epsilon=0.0, record_q=record_q)


def evaluate(maps, agent, cfg: RunConfig, episodes: int, seed: int, record_q: bool = False,
             threads: int | None = None):
    """Greedy rollouts; episode ``k`` runs on map ``k % len(maps)``.

    ``threads`` (default: ``EXPLORE_SIM_THREADS``, 0 = sequential) sets the
    worker-process count; results are returned in episode order either way.
    """
    if threads is None:
        threads = int(os.environ.get("EXPLORE_SIM_THREADS", "0") or 0)
    jobs = [(maps[ep % len(maps)][1], maps[ep % len(maps)][0], agent, cfg, seed, ep, record_q)
            for ep in range(episodes)]
    if threads > 0 and episodes > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            logs = list(pool.map(_eval_one, jobs))
    else:
        logs = [_eval_one(j) for j in jobs]
    return sorted(logs, key=lambda lg: lg.episode_id)


def returns(logs) -> np.ndarray:
    return np.array([lg.total_return for lg in logs])
