import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("displab", max_examples=30, deadline=None)
settings.load_profile("displab")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
