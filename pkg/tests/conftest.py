from __future__ import annotations

import pytest

from acrepair.solidity import SourceUnit

from .helpers import load_fixture


@pytest.fixture
def gymvault() -> SourceUnit:
    return load_fixture("cases/gymvault/GymVault.sol")


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
