"""Metric rows and their byte-deterministic CSV form.

One row is one (scenario, expert_set, snr, metric) measurement. The CSV
sorts rows, prints values with fixed precision, and uses LF endings, so
equal row lists always serialize to equal bytes.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from .errors import ConfigError

CSV_HEADER = "scenario,expert_set,snr_db,metric,value,seed"
METRIC_NAMES = ("accuracy", "eavesdropper_accuracy", "dfp", "mse")
_PROBABILITY_METRICS = ("accuracy", "eavesdropper_accuracy", "dfp")


@dataclass(frozen=True)
class MetricRow:
    scenario: str
    expert_set: str
    snr_db: float
    metric: str
    value: float
    seed: int

    def __post_init__(self):
        if self.metric not in METRIC_NAMES:
            raise ConfigError(f"unknown metric: {self.metric}")
        if self.metric in _PROBABILITY_METRICS and not 0.0 <= self.value <= 1.0:
            raise ConfigError(
                f"{self.metric} must lie in [0, 1], got {self.value!r}")
        if "," in self.scenario or "," in self.expert_set:
            raise ConfigError("scenario and expert_set must be comma-free")


def _sort_key(row: MetricRow):
    return (row.scenario, row.expert_set, row.snr_db, row.metric)


def render_csv(rows) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for r in sorted(rows, key=_sort_key):
        out.write(f"{r.scenario},{r.expert_set},{r.snr_db:g},{r.metric},"
                  f"{r.value:.6f},{r.seed}\n")
    return out.getvalue()


def emit_csv(rows, path) -> None:
    """Write sorted rows to `path`; equal inputs give equal bytes."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_csv(rows))


def parse_csv(path) -> list:
    """Rows back from a file emit_csv wrote."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ConfigError(f"unrecognized metrics header in {path}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != 6:
                raise ConfigError(f"malformed metrics row in {path}: {line!r}")
            rows.append(MetricRow(parts[0], parts[1], float(parts[2]),
                                  parts[3], float(parts[4]), int(parts[5])))
    return rows
