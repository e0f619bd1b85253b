"""Per-agent summary statistics over episode logs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

METRICS = ("explored_rate", "path_length_m", "efficiency")


@dataclass
class MetricRow:
    agent: str
    metric: str
    mean: float
    std: float
    n: int


@dataclass
class MetricsTable:
    rows: list = field(default_factory=list)

    def get(self, agent: str, metric: str) -> MetricRow:
        for r in self.rows:
            if r.agent == agent and r.metric == metric:
                return r
        raise KeyError((agent, metric))

    @property
    def agents(self) -> list:
        return sorted({r.agent for r in self.rows})


def episode_efficiency(log) -> float:
    """Entropy reduced per metre for one episode (nan if the robot never moved)."""
    length = log.path_length_m
    return (log.entropy_start - log.entropy_end) / length if length > 0 else math.nan


def aggregate(logs) -> MetricsTable:
    """Mean and population std of explored rate and path length per agent.

    Efficiency is pooled: total entropy reduction over total path length. Its
    std is taken over the per-episode efficiencies of episodes that moved.
    """
    logs = list(logs)
    if not logs:
        raise ValueError("aggregate needs at least one episode")
    table = MetricsTable()
    for agent in sorted({lg.agent for lg in logs}):
        mine = sorted((lg for lg in logs if lg.agent == agent), key=lambda lg: (lg.episode_id, lg.map_name))
        n = len(mine)
        rates = np.array([lg.explored_rate for lg in mine])
        lengths = np.array([lg.path_length_m for lg in mine])
        drops = np.array([lg.entropy_start - lg.entropy_end for lg in mine])
        table.rows.append(MetricRow(agent, "explored_rate", float(rates.mean()), float(rates.std()), n))
        table.rows.append(MetricRow(agent, "path_length_m", float(lengths.mean()), float(lengths.std()), n))
        total = lengths.sum()
        pooled = float(drops.sum() / total) if total > 0 else math.nan
        per_ep = drops[lengths > 0] / lengths[lengths > 0]
        spread = float(per_ep.std()) if per_ep.size else math.nan
        table.rows.append(MetricRow(agent, "efficiency", pooled, spread, n))
    return table
