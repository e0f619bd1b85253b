"""TD targets, the combined DQN + segmentation update, and the learner that
owns online/target parameters, optimizer state and replay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import AdamState, NetworkParams, OutputGrads, adam_step, backward, combine_dueling, forward, q_values
from ..nn.layers import softmax_xent_loss, td_mse_loss
from .config import TrainConfig
from .replay import Batch, ReplayBuffer, Transition


def td_targets(rewards, dones, next_q, gamma: float) -> np.ndarray:
    """``r`` for terminal transitions, else ``r + gamma * max_a' Q(s', a')``.

    ``next_q`` is the (N, |A|) target-network Q matrix for the next states.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    bootstrap = np.asarray(next_q, dtype=np.float64).max(axis=1)
    return np.where(np.asarray(dones, dtype=bool), rewards, rewards + gamma * bootstrap)


def batch_targets(batch: Batch, target: NetworkParams, gamma: float) -> np.ndarray:
    return td_targets(batch.rewards, batch.dones, q_values(target, batch.next_states), gamma)


@dataclass
class StepResult:
    loss_dqn: float
    loss_seg: float


def train_step(params: NetworkParams, target: NetworkParams, batch: Batch, seg_targets,
               cfg: TrainConfig, opt: AdamState) -> StepResult:
    """One optimizer step on ``L_dqn + lambda * L_seg`` (in place on ``params``).

    With ``cfg.eq15_literal_sign`` the segmentation gradient enters the encoder
    with a minus sign, i.e. the encoder ascends the segmentation loss.
    """
    targets = batch_targets(batch, target, cfg.gamma).astype(params.dtype)
    out, cache = forward(params, batch.states)
    q = combine_dueling(out)
    loss_dqn, dq = td_mse_loss(q, batch.actions, targets)
    loss_seg = 0.0
    d_seg = None
    if params.variant == "AFCQN" and seg_targets is not None:
        loss_seg, dlogits = softmax_xent_loss(out.seg_logits, seg_targets)
        d_seg = cfg.lambda_seg * dlogits
    grads = backward(params, cache, OutputGrads(
        d_q=dq, d_seg=d_seg, seg_encoder_scale=-1.0 if cfg.eq15_literal_sign else 1.0))
    adam_step(params.tensors, grads, opt, cfg.learning_rate)
    return StepResult(loss_dqn, loss_seg)


class Learner:
    """Online network, target network, Adam state and replay for one run."""

    def __init__(self, params: NetworkParams, cfg: TrainConfig, rng: np.random.Generator):
        self.params = params
        self.target = params.copy()
        self.cfg = cfg
        self.opt = AdamState()
        self.buffer = ReplayBuffer(cfg.buffer_capacity)
        self.rng = rng
        self.decisions = 0
        self.updates = 0
        self.losses: list = []

    @property
    def epsilon(self) -> float:
        return self.cfg.epsilon(self.decisions)

    def observe(self, t: Transition) -> StepResult | None:
        self.buffer.push(t)
        self.decisions += 1
        cfg = self.cfg
        if len(self.buffer) < max(cfg.batch_size, cfg.learn_start) or self.decisions % cfg.train_every:
            return None
        batch = self.buffer.sample(cfg.batch_size, self.rng)
        res = train_step(self.params, self.target, batch, batch.seg_labels, cfg, self.opt)
        self.updates += 1
        if self.updates % cfg.target_sync == 0:
            self.target = self.params.copy()
        self.losses.append(res)
        return res
