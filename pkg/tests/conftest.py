import numpy as np
import pytest
from hypothesis import settings

from ccbf.scenario import Popularity, RadioConfig, build_scenario

settings.register_profile("ci", deadline=None, max_examples=60)
settings.load_profile("ci")

SMALLNET_RADIO = RadioConfig(n_bs=3, n_ant=3, n_users=6, n_contents=4)
SMALLNET_POP = Popularity(np.array([0.48, 0.24, 0.16, 0.12]))


def smallnet_scenario(seed: int, strategy: str = "PopC", cache_size: int = 2, radio: RadioConfig = SMALLNET_RADIO):
    return build_scenario(radio, seed, SMALLNET_POP, strategy, cache_size)


@pytest.fixture
def smallnet():
    return smallnet_scenario


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
