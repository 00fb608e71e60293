import time

import numpy as np
import pytest

from xinform.geometry import AxisBox, UniformBox
from xinform.scenarios import list_scenarios, run_scenario


def unit(d: int) -> UniformBox:
    return UniformBox(AxisBox.closed((0.0,) * d, (1.0,) * d))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def registry_run():
    """Every registry scenario at its defaults, run once per session: (outcomes, seconds)."""
    start = time.perf_counter()
    outcomes = {s["id"]: run_scenario(s["id"]) for s in list_scenarios()}
    return outcomes, time.perf_counter() - start


ACCEPTANCE_LINES = []


def acceptance(number: int, title: str, ok: bool, detail: str) -> bool:
    """Print and record one pass/fail line for an acceptance criterion."""
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
