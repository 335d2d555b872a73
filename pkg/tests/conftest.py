import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mecoffload.core import Config  # noqa: E402


DESK = {"num_mds": 3, "num_eds": 2, "episode_slots": 50}


@pytest.fixture
def desk_config():
    return Config().replace(sim=DESK)


@pytest.fixture
def small_config():
    return Config().replace(sim={"num_mds": 3, "num_eds": 2, "episode_slots": 12})


# one verdict line per acceptance criterion, printed at the end of the run
VERDICTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[n])
