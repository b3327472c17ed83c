import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("fedcap", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("fedcap")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
