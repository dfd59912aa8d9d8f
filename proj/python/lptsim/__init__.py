"""Python bindings for the lptsim scheduler and simulator."""

import json

from ._lptsim import (
    GpuInterval,
    Job,
    JobOutcome,
    LptsimError,
    RunReport,
    allocate_warm,
    bank_lookup_evals,
    config_hash,
    default_config,
    delay_schedulable,
    kmedoid,
    predict_time,
    preset_trace,
    report_json,
    run_cli,
    simulate,
)

POLICIES = ("prompttuner", "infless_like", "elasticflow_like")


def compare(trace, config=None, seed=None):
    """Runs every policy on `trace` and returns {policy: RunReport}."""
    return {p: simulate(trace, p, config=config, seed=seed) for p in POLICIES}


def report(trace, policy="prompttuner", config=None, seed=None):
    """Report document of one run as a dict."""
    return json.loads(report_json(trace, policy, config=config, seed=seed))
