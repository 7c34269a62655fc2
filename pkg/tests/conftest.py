from datetime import datetime, timezone

import numpy as np
import pytest

from glucokit.core import CGM, DatasetFrame

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


def make_frame(cgm, interval=5, start=T0, **columns):
    cols = {CGM: np.asarray(cgm, dtype=np.float64)}
    for name, values in columns.items():
        cols[name] = np.asarray(values, dtype=np.float64)
    return DatasetFrame(start, interval, cols)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report: (criterion, passed, detail), filled by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
