"""Order book microprice with a Tsetlin machine tick adjustment."""

import json

from ._microhd import *  # noqa: F401,F403
from ._microhd import run_experiment as _run_experiment, backtest as _backtest


def run_experiment(events, config=None):
    """Train on the head of `events`, backtest on the tail.

    Returns (table, pool, train_report, backtest_report, split) with both
    reports as dicts.
    """
    table, pool, train, report, split = _run_experiment(events, config or {})
    return table, pool, json.loads(train), json.loads(report), split


def backtest(events, config, table, pool, start=0, oracle=False):
    return json.loads(_backtest(events, config, table, pool, start, oracle))
