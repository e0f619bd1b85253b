from .logs import EpisodeLog, StepRecord
from .metrics import METRICS, MetricRow, MetricsTable, aggregate, episode_efficiency
from .report import (EPISODE_COLUMNS, SUMMARY_COLUMNS, episodes_csv, read_csv, summary_csv,
                     write_episodes_csv, write_summary_csv)
from .svg import render_grid_svg, render_q_svg, render_trajectory_svg, write_svg
