import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shmeta.potential import PotentialSpec  # noqa: E402


@pytest.fixture
def proto():
    return PotentialSpec.prototype()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
