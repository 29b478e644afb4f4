import time

import numpy as np
import pytest

ACCEPTANCE_RESULTS = []


def pytest_addoption(parser):
    parser.addoption("--update-golden", action="store_true", help="rewrite CLI help golden files")


@pytest.fixture
def update_golden(request):
    return request.config.getoption("--update-golden")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


class _Recorder:
    """Appends one ``PASS``/``FAIL`` line per criterion to the summary."""

    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        status = "PASS" if exc_type is None else "FAIL"
        note = f" ({self.detail})" if self.detail else ""
        if exc_type is not None and exc_type is not AssertionError:
            note += f" [{exc_type.__name__}: {exc}]"
        ACCEPTANCE_RESULTS.append(f"{status} criterion {self.number:>2}: {self.title}{note} in {elapsed:.2f}s")
        return False


@pytest.fixture
def criterion():
    return _Recorder
