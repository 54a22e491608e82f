"""Streaming log anomaly detection: template mining, univariate scoring and
topology-weighted aggregation."""

import json

from ._core import (
    ConfigError,
    MalformedError,
    TemplateMiner,
    TopologyError,
    effective_weight,
    f1,
    generate,
    implicit_weights,
    metrics,
    normalize_rank,
    parse_line,
    percentile_rank,
    weighted_mean,
    wpm,
)
from . import _core


def run_detect(config):
    """Run detection for a config dict (same layout as the CLI config file).

    Returns one summary dict per datacenter."""
    return json.loads(_core.run_detect_json(json.dumps(config)))


def evaluate(alerts, incidents, tau_minutes=5.0):
    """Score an alert file against an incident file; returns the report dict."""
    return json.loads(_core.evaluate_json(str(alerts), str(incidents), tau_minutes))


__all__ = [
    "ConfigError",
    "MalformedError",
    "TemplateMiner",
    "TopologyError",
    "effective_weight",
    "evaluate",
    "f1",
    "generate",
    "implicit_weights",
    "metrics",
    "normalize_rank",
    "parse_line",
    "percentile_rank",
    "run_detect",
    "weighted_mean",
    "wpm",
]
