"""CSV output for episode logs and summary tables."""

from __future__ import annotations

import csv
import io

from .metrics import MetricsTable

EPISODE_COLUMNS = ("episode_id", "agent", "map", "steps", "path_length_m", "explored_rate",
                   "entropy_start_nats", "entropy_end_nats", "return", "terminated_by")
SUMMARY_COLUMNS = ("agent", "metric", "mean", "std", "n")
SUMMARY_NOTE = ("# std = population standard deviation; efficiency mean = pooled entropy "
                "reduction (nats) / pooled path length (m)")


def fmt(value: float) -> str:
    return format(float(value), ".6g")


def _write(text: str, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def episodes_csv(logs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EPISODE_COLUMNS)
    for lg in sorted(logs, key=lambda lg: (lg.episode_id, lg.agent)):
        w.writerow([lg.episode_id, lg.agent, lg.map_name, len(lg.steps), fmt(lg.path_length_m),
                    fmt(lg.explored_rate), fmt(lg.entropy_start), fmt(lg.entropy_end),
                    fmt(lg.total_return), lg.terminated_by])
    return buf.getvalue()


def summary_csv(table: MetricsTable) -> str:
    buf = io.StringIO()
    buf.write(SUMMARY_NOTE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in table.rows:
        w.writerow([r.agent, r.metric, fmt(r.mean), fmt(r.std), r.n])
    return buf.getvalue()


def write_episodes_csv(logs, path) -> None:
    _write(episodes_csv(logs), path)


def write_summary_csv(table: MetricsTable, path) -> None:
    _write(summary_csv(table), path)


_INT = {"episode_id", "steps", "n"}
_STR = {"agent", "map", "terminated_by", "metric"}


def _typed(row: dict) -> dict:
    return {k: (int(v) if k in _INT else v if k in _STR else float(v)) for k, v in row.items()}


def read_csv(path) -> list:
    """Rows of an episode or summary CSV as typed dicts (comment lines skipped)."""
    with open(path, encoding="utf-8", newline="") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    return [_typed(r) for r in csv.DictReader(lines)]
