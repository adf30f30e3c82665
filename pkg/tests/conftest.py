import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from branchstereo.geometry import StereoRig  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def rig100():
    """fx = 1000, b = 0.1 m, so W = 100."""
    return StereoRig.from_values(1000.0, 1000.0, 0.0, 0.0, 0.1)


@pytest.fixture
def zed_like():
    return StereoRig.from_values(1000.0, 1000.0, 96.0, 64.0, 0.063)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            if rep.when != "call" and not rep.failed:
                continue
            name = nodeid.split("::")[-1]
            number = int(name.split("_")[2])
            detail = dict(rep.user_properties).get("detail", "")
            status = "PASS" if rep.passed else "FAIL"
            lines[number] = f"criterion {number:2d} {status}  {name[len('test_criterion_00_'):]}  {detail}".rstrip()
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
