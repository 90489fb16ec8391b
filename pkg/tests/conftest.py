from datetime import datetime

import numpy as np
import pytest

from crowdwarn.series import HourlySeries, Signal
from crowdwarn.simgen import flagship_config, generate

_acceptance = []


def make_series(values, start=datetime(2014, 1, 6), poi="p", signal=Signal.MAP_QUERY):
    return HourlySeries(poi, signal, start, np.asarray(values, dtype=np.int64))


@pytest.fixture(scope="session")
def flagship():
    """(query, positioning, SimOutput) for the seed-42 flagship fixture."""
    sim = generate(flagship_config(42))
    q, p = sim.series().pair("bund")
    return q, p, sim


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
