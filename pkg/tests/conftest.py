import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class CountingProvider:
    """Wraps a provider and counts ``embed`` calls per frame key."""

    deterministic = True

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def embed(self, frame, stride=None):
        self.calls += 1
        return self.inner.embed(frame, stride)


@pytest.fixture
def counting_provider():
    return CountingProvider


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS):
        terminalreporter.write_line(line)
