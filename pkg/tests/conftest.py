import sys
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pedroute.cli import bundled_scenarios  # noqa: E402
from pedroute.scenario import load_scenario  # noqa: E402


@lru_cache(maxsize=None)
def bundled(name):
    return load_scenario(str(bundled_scenarios()[name]))


@pytest.fixture
def scenario():
    return bundled


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
