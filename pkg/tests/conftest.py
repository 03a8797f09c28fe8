import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nfbeam import BeamAnalytics, DmaGeometry  # noqa: E402


@pytest.fixture(scope="session")
def geom():
    return DmaGeometry()


@pytest.fixture(scope="session")
def analytics(geom):
    return BeamAnalytics(geom)


def pytest_terminal_summary(terminalreporter):
    verdicts = getattr(sys.modules.get("test_acceptance"), "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in sorted(verdicts, key=lambda v: int(v.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
