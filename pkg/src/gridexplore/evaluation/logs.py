from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class StepRecord:
    action_index: int | None      # lattice index, None for the frontier agent
    goal: tuple | None            # goal cell, None for the terminal action
    classification: str
    reward: float
    entropy_after: float
    rho_after: float
    traveled_m: float
    pose_after: tuple


@dataclass
class EpisodeLog:
    episode_id: int
    agent: str
    map_name: str
    start: tuple
    entropy_start: float
    steps: list = field(default_factory=list)
    terminated_by: str = "cap"
    start_rho: float = 0.0
    q_maps: list = field(default_factory=list, compare=False)  # optional per-step Q vectors
    final_state: object = field(default=None, compare=False)  # belief states at the end

    @property
    def path_length_m(self) -> float:
        return float(sum(s.traveled_m for s in self.steps))

    @property
    def total_return(self) -> float:
        return float(sum(s.reward for s in self.steps))

    @property
    def entropy_end(self) -> float:
        return self.steps[-1].entropy_after if self.steps else self.entropy_start

    @property
    def explored_rate(self) -> float:
        return self.steps[-1].rho_after if self.steps else self.start_rho

    def trajectory(self) -> list:
        """Robot cells at the start and after every decision."""
        return [tuple(self.start)] + [tuple(s.pose_after) for s in self.steps]
