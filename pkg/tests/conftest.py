from __future__ import annotations

import numpy as np
import pytest

from spotforecast.sample import SAMPLE_PATH
from spotforecast.series import HourlySeries, ingest_csv


def hourly(prices, start="2014-01-06T00:00", offset_minutes=0) -> HourlySeries:
    """Hourly series whose first point is ``start`` in local time."""
    prices = np.asarray(prices, dtype=float)
    t0 = np.datetime64(start, "m") - np.timedelta64(offset_minutes, "m")
    times = t0 + np.timedelta64(60, "m") * np.arange(prices.size)
    return HourlySeries(times, prices, offset_minutes)


def days(profile_rows, start="2014-01-06T00:00", offset_minutes=0) -> HourlySeries:
    """Series built from a (days, 24) grid."""
    return hourly(np.asarray(profile_rows, dtype=float).ravel(), start, offset_minutes)


@pytest.fixture(scope="session")
def sample_series() -> HourlySeries:
    return ingest_csv(SAMPLE_PATH)


# one PASS/FAIL line per acceptance criterion in the terminal summary
_CRITERIA: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        prev_ok = _CRITERIA.get(n, (title, True))[1]
        _CRITERIA[n] = (title, prev_ok and rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok = _CRITERIA[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {title}")
